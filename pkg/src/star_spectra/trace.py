"""Truncated trace formula for the spectral density, and its exact counterpart.

The density of states of a star graph splits into the constant Weyl term
L/(2*pi) plus one oscillatory term per periodic orbit:

    d(lambda) = L/(2*pi) + (1/pi) * sum_p (l_p / r_p) A_p cos(lambda * l_p)

where p runs over cyclic words (all repetitions included), l_p = 2 * sum of
visited edge lengths, r_p is the repetition number and A_p the product of
center amplitudes.  Both sides are compared after Gaussian smoothing in
lambda: smoothing the delta comb gives unit-mass Gaussians at the
eigenvalues, smoothing the orbit sum multiplies each cosine by
exp(-sigma^2 l_p^2 / 2) while leaving the Weyl term alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import StarGraph
from .orbits import amplitude, necklaces
from .spectrum import Spectrum

__all__ = ["SmoothedDensity", "density_from_orbits", "density_from_spectrum"]


@dataclass(frozen=True)
class SmoothedDensity:
    grid: np.ndarray
    values: np.ndarray
    sigma: float
    max_period: int  # 2*k_max; 0 when built from an exact spectrum


def density_from_spectrum(spectrum: Spectrum, grid, sigma: float) -> SmoothedDensity:
    """Sum of unit-mass Gaussians of width sigma centered at the eigenvalues."""
    grid = np.asarray(grid, dtype=float)
    values = np.zeros_like(grid)
    norm = 1.0 / (sigma * np.sqrt(2.0 * np.pi))
    eigs = spectrum.eigenvalues
    step = max(1, 4_000_000 // max(len(grid), 1))
    for start in range(0, len(eigs), step):
        chunk = eigs[start : start + step]
        values += norm * np.exp(
            -((grid[None, :] - chunk[:, None]) ** 2) / (2.0 * sigma * sigma)
        ).sum(axis=0)
    return SmoothedDensity(grid=grid, values=values, sigma=float(sigma), max_period=0)


def density_from_orbits(
    graph: StarGraph,
    grid,
    sigma: float,
    k_max: int,
    max_words: int = 10**7,
) -> SmoothedDensity:
    """Weyl term plus the Gaussian-smoothed orbit sum up to half-period k_max.

    Orbits are enumerated as canonical cyclic words of each length k <= k_max
    (repetitions included, weighted 1/r_p), so the word count grows like
    v^k_max / k_max; the max_words budget guards against runaway requests.
    k_max=0 returns the bare Weyl density L/(2*pi).
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    if k_max > 0 and graph.v**k_max > max_words:
        raise ValueError(
            f"orbit enumeration v^k_max = {graph.v}^{k_max} exceeds the "
            f"budget of {max_words} words"
        )
    grid = np.asarray(grid, dtype=float)
    values = np.full_like(grid, graph.total_length / (2.0 * np.pi))
    l = graph.lengths_array()
    for k in range(1, k_max + 1):
        words = necklaces(k, graph.v)
        lengths = np.empty(len(words))
        coefs = np.empty(len(words))
        for idx, (word, r) in enumerate(words):
            lp = 2.0 * float(l[list(word)].sum())
            lengths[idx] = lp
            coefs[idx] = (lp / r) * amplitude(word, graph.v)
        damp = np.exp(-0.5 * (sigma * lengths) ** 2)
        values += (coefs * damp) @ np.cos(np.multiply.outer(lengths, grid)) / np.pi
    return SmoothedDensity(
        grid=grid, values=values, sigma=float(sigma), max_period=2 * k_max
    )
