"""Eigenvalue solver cross-checks between the tangent and determinant forms."""

import numpy as np
import pytest

from star_spectra import (
    PoleProximity,
    StarGraph,
    build_graph,
    det_root_count,
    mean_spacing,
    polish_roots_det,
    secular_det,
    secular_real,
    secular_tan,
    solve_spectrum,
)


def test_single_edge_unit_length_spectrum_is_pi_grid():
    # one unit edge: sum tan(lambda * l) = tan(lambda) = 0 at multiples of pi
    graph = StarGraph(v=1, lengths=(1.0,), seed=0)
    spectrum = solve_spectrum(graph, 20.0)
    assert np.allclose(spectrum.eigenvalues, np.pi * np.arange(1, 7), atol=1e-10, rtol=0)
    assert len(spectrum) == det_root_count(graph, 20.0) == 6
    assert mean_spacing(graph) == pytest.approx(np.pi, rel=1e-15)


def test_solver_is_deterministic():
    graph = build_graph(6, seed=8)
    a = solve_spectrum(graph, 60.0)
    b = solve_spectrum(graph, 60.0)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_eigenvalues_sorted_positive_below_cutoff():
    graph = build_graph(4, seed=21)
    spectrum = solve_spectrum(graph, 80.0)
    eigs = spectrum.eigenvalues
    assert np.all(eigs > 0)
    assert np.all(eigs <= 80.0)
    assert np.all(np.diff(eigs) > 0)
    assert len(spectrum) == len(eigs)


def test_count_tracks_mean_spacing():
    graph = build_graph(8, seed=2)
    spectrum = solve_spectrum(graph, 90.0)
    assert len(spectrum) == pytest.approx(90.0 / mean_spacing(graph), rel=0.05)


def test_tan_form_increases_between_poles():
    graph = build_graph(3, seed=11)
    poles = np.sort(
        np.concatenate([(np.arange(6) + 0.5) * np.pi / l for l in graph.lengths])
    )
    for a, b in zip(poles[:-1], poles[1:]):
        if b - a < 1e-6:
            continue
        xs = np.linspace(a + 0.15 * (b - a), b - 0.15 * (b - a), 5)
        vals = [secular_tan(graph, float(x)) for x in xs]
        assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))


def test_tan_form_rejects_pole_neighborhood():
    graph = build_graph(2, seed=4)
    pole = 0.5 * np.pi / graph.lengths[0]
    with pytest.raises(PoleProximity):
        secular_tan(graph, float(pole))


def test_roots_satisfy_determinant_form():
    graph = build_graph(5, seed=19)
    spectrum = solve_spectrum(graph, 50.0)
    polished = polish_roots_det(graph, spectrum.eigenvalues)
    residuals = np.array([abs(secular_det(graph, float(lam))) for lam in polished])
    assert residuals.max() < 1e-8
    # polishing against the determinant must not move the tangent roots far
    assert np.abs(polished - spectrum.eigenvalues).max() < 1e-6


def test_root_counts_agree_between_forms():
    for v, seed in ((2, 1), (7, 3), (13, 5)):
        graph = build_graph(v, seed=seed)
        spectrum = solve_spectrum(graph, 60.0)
        assert det_root_count(graph, 60.0) == len(spectrum)


def test_determinant_side_flips_sign_across_roots():
    graph = build_graph(3, seed=9)
    spectrum = solve_spectrum(graph, 30.0)
    eps = 1e-4
    for lam in spectrum.eigenvalues[:10]:
        lo, hi = secular_real(graph, np.array([lam - eps, lam + eps]))
        assert lo * hi < 0


def test_nonpositive_cutoff_rejected():
    graph = build_graph(2, seed=0)
    with pytest.raises(ValueError):
        solve_spectrum(graph, 0.0)
