import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutoff_gff.errors import ConfigurationError
from cutoff_gff.markov import (
    GaussianModel,
    build_discrete_gff,
    conditional_predictor,
    cycle_adjacency,
    grid_adjacency,
    kernel_gaussian_model,
    markov_discrepancy,
    node_boundary,
    path_adjacency,
)
from cutoff_gff.spectral import CutoffSpec, Geometry, build_basis, gff_kernel, region_partition


def schur_delta(cov, region, boundary, target):
    """Conditional variances by explicit Schur complements."""
    def cond_var(s):
        s = list(s)
        return cov[target, target] - cov[target, s] @ np.linalg.solve(cov[np.ix_(s, s)], cov[s, target])

    return cond_var(boundary) - cond_var(region)


def test_two_vertex_path():
    m = build_discrete_gff(path_adjacency(2), 1.0)
    assert np.allclose(m.covariance, np.array([[2, 1], [1, 2]]) / 3)


def test_cycle_matches_graph_fourier_modes():
    n = 8
    m = build_discrete_gff(cycle_adjacency(n), 1.0)
    j = np.arange(n)
    spectral = np.zeros((n, n))
    for k in range(n):
        lam = 2 - 2 * np.cos(2 * np.pi * k / n)
        spectral += np.cos(2 * np.pi * k * (j[:, None] - j[None, :]) / n) / (lam + 1) / n
    assert np.allclose(m.covariance, spectral, atol=1e-10)


def test_disconnected_graph_rejected():
    adj = np.zeros((3, 3))
    adj[0, 1] = adj[1, 0] = 1
    with pytest.raises(ConfigurationError):
        build_discrete_gff(adj)


def test_predictor_target_in_conditioning():
    m = build_discrete_gff(path_adjacency(5))
    w = conditional_predictor(m, [1, 2, 3], 2)
    assert np.allclose(w, [0, 1, 0], atol=1e-12)


def test_predictor_independent_coordinates():
    m = GaussianModel((0, 1, 2), np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(conditional_predictor(m, [0, 1], 2), 0)


def test_three_vertex_path_predictor():
    m = build_discrete_gff(path_adjacency(3))
    cov = m.covariance
    w = conditional_predictor(m, [1], 0)
    assert w[0] == pytest.approx(cov[0, 1] / cov[1, 1])
    # Markov: the middle vertex screens the ends
    w2 = conditional_predictor(m, [1, 2], 0)
    assert w2[1] == pytest.approx(0, abs=1e-12)


def test_path16_markov_holds():
    adj = path_adjacency(16)
    m = build_discrete_gff(adj)
    region = list(range(8))
    boundary = node_boundary(adj, region)
    assert boundary == [7]
    r = markov_discrepancy(m, region, boundary, range(8, 16))
    assert r.markov_verdict == "holds"
    assert r.max_delta_sq <= 1e-10
    for t, d in zip(r.targets, r.per_target_delta_sq):
        assert d == pytest.approx(schur_delta(m.covariance, region, boundary, t), abs=1e-12)


def test_target_in_boundary_zero():
    m = build_discrete_gff(path_adjacency(6))
    r = markov_discrepancy(m, [0, 1, 2], [2], [2])
    assert abs(r.max_delta_sq) < 1e-14


def test_boundary_must_be_subset():
    m = build_discrete_gff(path_adjacency(6))
    with pytest.raises(ConfigurationError):
        markov_discrepancy(m, [0, 1], [2], [4])


@pytest.fixture(scope="module")
def circle_setup():
    g = Geometry.circle(64)
    p = region_partition(g)
    region = list(np.flatnonzero(p.plus_mask | p.interface_mask))
    boundary = node_boundary(grid_adjacency(g), region)
    targets = list(np.flatnonzero(p.minus_mask))
    return g, region, boundary, targets


@pytest.mark.parametrize("lam", [3, 5, 7])
def test_cutoff_field_not_markov(circle_setup, lam):
    g, region, boundary, targets = circle_setup
    assert sorted(boundary) == [0, 32]
    m = kernel_gaussian_model(gff_kernel(build_basis(g), CutoffSpec(lam)))
    r = markov_discrepancy(m, region, boundary, targets)
    assert r.markov_verdict == "fails"
    assert r.max_delta_sq > 1e-4
    assert np.all(r.per_target_delta_sq >= -1e-12)


def test_boundary_growth_monotone(circle_setup):
    g, region, boundary, targets = circle_setup
    m = kernel_gaussian_model(gff_kernel(build_basis(g), CutoffSpec(5)))
    interior = [s for s in region if s not in boundary]
    growing = [list(boundary)]
    for extra in (interior[:5], interior[:15], interior):
        growing.append(list(boundary) + list(extra))
    deltas = [markov_discrepancy(m, region, bd, targets).per_target_delta_sq for bd in growing]
    for a, b in zip(deltas, deltas[1:]):
        assert np.all(b <= a + 1e-10)
    assert np.all(np.abs(deltas[-1]) <= 1e-10)


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=0, max_value=9))
def test_nested_predictors_nonnegative(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 14))
    a = rng.standard_normal((n, n + 2))
    m = GaussianModel(tuple(range(n)), a @ a.T)
    region = sorted(rng.choice(n, size=n // 2, replace=False).tolist())
    boundary = region[: max(1, len(region) // 2)]
    targets = [s for s in range(n) if s not in region]
    r = markov_discrepancy(m, region, boundary, targets)
    assert np.all(r.per_target_delta_sq >= -1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=0, max_value=9))
def test_discrete_gff_separated_sets_markov(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 20))
    adj = cycle_adjacency(n) if seed % 2 else path_adjacency(n)
    m = build_discrete_gff(adj, float(rng.uniform(0.3, 2.0)))
    cut = int(rng.integers(2, n - 2))
    region = list(range(cut))
    boundary = node_boundary(adj, region)
    targets = [s for s in range(n) if s not in region]
    assert markov_discrepancy(m, region, boundary, targets).markov_verdict == "holds"
