"""Eigenvalues of a star graph: secular equation, root solver, verification.

Two independent secular functions are kept side by side:

* ``secular_tan`` -- the O(v) scalar form  sum_i tan(lambda * l_i), whose
  roots between consecutive poles are the eigenvalues.  This drives the
  production solver.
* ``secular_det`` -- the determinant  det(I - exp(-i*lambda*Lhat) S)  over the
  2v directed edges.  It is O(v^3) per evaluation and is retained purely as a
  cross-check oracle: every root found by the tan form must annihilate the
  determinant, and independent root counts from both must agree.

``secular_real`` is a rotation of the determinant onto the real axis (the
determinant times ``exp(i*lambda*L/2)`` is purely imaginary for this S-matrix),
which gives the determinant-side polish a real-valued target.  Root counting
on the determinant side goes through the eigenphases of the unitary evolution
instead (``det_root_count``), which stays exact where the determinant's
magnitude underflows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import StarGraph

__all__ = [
    "PoleProximity",
    "Spectrum",
    "secular_det",
    "secular_tan",
    "secular_real",
    "solve_spectrum",
    "polish_roots_det",
    "det_root_count",
    "mean_spacing",
]


class PoleProximity(ValueError):
    """Raised when secular_tan is evaluated too close to a tangent pole."""


@dataclass(frozen=True)
class Spectrum:
    """Sorted positive eigenvalues of one graph realization up to lambda_max."""

    eigenvalues: np.ndarray
    lambda_max: float
    graph: StarGraph

    def __len__(self) -> int:
        return len(self.eigenvalues)


def mean_spacing(graph: StarGraph) -> float:
    """Mean eigenvalue spacing 2*pi/L from the Weyl density L/(2*pi)."""
    return 2.0 * np.pi / graph.total_length


@lru_cache(maxsize=64)
def _bond_matrix(v: int) -> np.ndarray:
    """2v x 2v directed-edge scattering matrix.

    Directed edges are ordered [out(center->1..v), in(1..v->center)].  An out
    edge reflects trivially into its own in edge; an in edge scatters at the
    center with backscatter -1+2/v into itself and transmit 2/v elsewhere.
    Rows index the outgoing directed edge.
    """
    m = np.zeros((2 * v, 2 * v))
    center = np.full((v, v), 2.0 / v) - np.eye(v)
    m[:v, v:] = center
    m[v:, :v] = np.eye(v)
    return m


def _directed_lengths(graph: StarGraph) -> np.ndarray:
    l = graph.lengths_array()
    return np.concatenate([l, l])


def secular_det(graph: StarGraph, lam: float) -> complex:
    """det(I - exp(-i*lam*Lhat) S) over directed edges; zero at eigenvalues."""
    m = _bond_matrix(graph.v)
    phase = np.exp(-1j * lam * _directed_lengths(graph))
    return complex(np.linalg.det(np.eye(2 * graph.v) - phase[:, None] * m))


def _secular_det_batch(graph: StarGraph, lams: np.ndarray) -> np.ndarray:
    m = _bond_matrix(graph.v)
    ld = _directed_lengths(graph)
    out = np.empty(len(lams), dtype=complex)
    eye = np.eye(2 * graph.v)
    step = max(1, 2_000_000 // (4 * graph.v * graph.v))
    for start in range(0, len(lams), step):
        chunk = lams[start : start + step]
        phase = np.exp(-1j * np.multiply.outer(chunk, ld))
        out[start : start + len(chunk)] = np.linalg.det(eye - phase[:, :, None] * m)
    return out


def secular_real(graph: StarGraph, lams) -> np.ndarray:
    """Real-valued rotation Im(det * exp(i*lam*L/2)); same zeros as the det.

    det(S) = -1 for every v here, which forces det(I - e^{-i lam Lhat} S) *
    e^{i lam L / 2} onto the imaginary axis, so its imaginary part carries all
    the information.  For v=1, l=1 this reduces to 2*sin(lam).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    dets = _secular_det_batch(graph, lams)
    return np.imag(dets * np.exp(1j * lams * graph.total_length / 2.0))


def secular_tan(graph: StarGraph, lam: float, pole_tol: float = 1e-8) -> float:
    """sum_i tan(lam * l_i); raises PoleProximity within pole_tol of any pole."""
    l = graph.lengths_array()
    # distance from lam to the nearest pole pi*(n+1/2)/l_i, per edge
    frac = lam * l / np.pi - 0.5
    dist = np.abs(frac - np.round(frac)) * np.pi / l
    if np.any(dist < pole_tol):
        raise PoleProximity(f"lambda={lam} is within {pole_tol} of a tangent pole")
    return float(np.sum(np.tan(lam * l)))


def _pole_grid(graph: StarGraph, lambda_max: float) -> np.ndarray:
    """All tangent poles in (0, lambda_max + one spacing], sorted."""
    l = graph.lengths_array()
    poles = []
    for li in l:
        n_max = int(np.ceil((lambda_max * li / np.pi - 0.5))) + 2
        n = np.arange(0, max(n_max, 1))
        poles.append((n + 0.5) * np.pi / li)
    poles = np.sort(np.concatenate(poles))
    return poles


def solve_spectrum(graph: StarGraph, lambda_max: float) -> Spectrum:
    """All eigenvalues in (0, lambda_max], one per inter-pole interval.

    sum_i tan(lam*l_i) is strictly increasing between consecutive poles
    (derivative sum l_i/cos^2 > 0) and runs from -inf to +inf, so each
    interval holds exactly one root; the interval (0, first pole) holds none.
    Bisection runs vectorized over all intervals at once, followed by a few
    Newton steps.  lambda=0 and roots indistinguishable from a pole are
    excluded.
    """
    if lambda_max <= 0:
        raise ValueError("lambda_max must be positive")
    l = graph.lengths_array()
    poles = _pole_grid(graph, lambda_max)
    a = poles[:-1]
    b = poles[1:]
    keep = a < lambda_max
    a, b = a[keep], b[keep]
    width = b - a
    ok = width > 1e-12
    if not np.all(ok):
        a, b, width = a[ok], b[ok], width[ok]

    def f(x):
        return np.tan(np.multiply.outer(x, l)).sum(axis=1)

    # Shrink offsets from each pole until the secular function shows the
    # correct sign (-) at the left and (+) at the right endpoint; a root very
    # close to a pole otherwise masquerades as a sign error.
    delta_a = width * 0.25
    delta_b = width * 0.25
    for _ in range(12):
        bad = f(a + delta_a) > 0
        if not bad.any():
            break
        delta_a[bad] /= 16.0
    for _ in range(12):
        bad = f(b - delta_b) < 0
        if not bad.any():
            break
        delta_b[bad] /= 16.0
    lo = a + delta_a
    hi = b - delta_b
    failed = (f(lo) > 0) | (f(hi) < 0)
    if failed.any():
        warnings.warn(
            f"{int(failed.sum())} inter-pole intervals kept a root closer than "
            "the bracketing resolution to a pole; those roots were dropped",
            RuntimeWarning,
        )
        lo, hi = lo[~failed], hi[~failed]

    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = f(mid) < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    roots = 0.5 * (lo + hi)

    # Newton polish; derivative sum_i l_i / cos^2(lam l_i) is available in
    # closed form and the bisection output is already inside the basin.
    for _ in range(3):
        arg = np.multiply.outer(roots, l)
        val = np.tan(arg).sum(axis=1)
        slope = (l / np.cos(arg) ** 2).sum(axis=1)
        roots = roots - val / slope

    in_range = (roots > 1e-12) & (roots <= lambda_max)
    roots = roots[in_range]
    roots = np.sort(roots)
    return Spectrum(eigenvalues=roots, lambda_max=float(lambda_max), graph=graph)


def polish_roots_det(graph: StarGraph, roots: np.ndarray, steps: int = 5) -> np.ndarray:
    """Secant-polish roots against the determinant-side secular function.

    Runs a few derivative-free steps on secular_real (central differences),
    vectorized across all roots.  Used to verify that tan-form roots are
    roots of the determinant too, to the determinant's own resolution.
    """
    lam = np.array(roots, dtype=float, copy=True)
    eps = 1e-7
    for _ in range(steps):
        stacked = np.concatenate([lam, lam + eps, lam - eps])
        h = secular_real(graph, stacked)
        n = len(lam)
        h0, hp, hm = h[:n], h[n : 2 * n], h[2 * n :]
        slope = (hp - hm) / (2 * eps)
        step = np.where(slope != 0.0, h0 / np.where(slope == 0.0, 1.0, slope), 0.0)
        # never walk further than a fraction of the local spacing
        cap = 0.25 * mean_spacing(graph)
        lam = lam - np.clip(step, -cap, cap)
    return lam


def _eigenphases(graph: StarGraph, lam: float) -> np.ndarray:
    """Principal eigenphases in [0, 2*pi) of U(lam) = exp(-i*lam*Lhat) S."""
    m = _bond_matrix(graph.v)
    phase = np.exp(-1j * lam * _directed_lengths(graph))
    mu = np.linalg.eigvals(phase[:, None] * m)
    return np.mod(np.angle(mu), 2.0 * np.pi)


def det_root_count(graph: StarGraph, lambda_max: float) -> int:
    """Count determinant-side roots in (0, lambda_max] by unitary winding.

    The directed-edge evolution U(lam) = exp(-i*lam*Lhat) S is unitary with
    det U = det(S) * exp(-i*lam*L), so its eigenphase sum decreases at the
    exact rate L while each individual phase decreases monotonically, at a
    rate between the shortest and longest edge length.  lam is an eigenvalue
    of the graph exactly when a phase passes through zero, so over a step
    short enough that no phase can complete a full turn the number of
    passes is the integer (step*L + sum(P_after) - sum(P_before)) / (2*pi).

    Unlike sign-change counting on the determinant's value, the winding is
    exact where eigenvalues cluster: with nearly equal edge lengths the low
    part of the spectrum packs v-1 roots into a tiny window, the determinant
    magnitude there underflows double precision, but each eigenphase of the
    unitary matrix stays perfectly conditioned.
    """
    if lambda_max <= 0:
        raise ValueError("lambda_max must be positive")
    two_pi = 2.0 * np.pi
    # each phase moves by at most step * l_max per step; stay well under 2*pi
    step = 0.5 * np.pi / float(graph.lengths_array().max())
    lams = np.linspace(0.0, lambda_max, int(np.ceil(lambda_max / step)) + 1)
    start = _eigenphases(graph, 0.0)
    # lam = 0 is always a determinant root but is excluded from the spectrum,
    # so the phase sitting at zero starts a full turn before its next crossing
    start[start < 1e-9] += two_pi
    total = 0
    prev_sum = float(start.sum())
    for prev_lam, lam in zip(lams[:-1], lams[1:]):
        cur_sum = float(_eigenphases(graph, float(lam)).sum())
        wraps = ((lam - prev_lam) * graph.total_length + cur_sum - prev_sum) / two_pi
        total += int(round(wraps))
        prev_sum = cur_sum
    return total
