import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutoff_gff.errors import ConfigurationError, SupportError
from cutoff_gff.rp import assemble_rp_gram, certify_rp, combine_tests, default_test_family, write_gram_csv
from cutoff_gff.spectral import (
    CutoffSpec,
    Field,
    Geometry,
    build_basis,
    bump_field,
    covariance_pairing,
    exact_gff_kernel,
    gff_kernel,
    reflect,
    region_partition,
    zero_kernel,
)
from cutoff_gff.witness import build_compact_witness


@pytest.fixture(scope="module")
def circle64():
    g = Geometry.circle(64)
    return g, build_basis(g)


def semicircle_bumps(basis, count=40, radius=0.5):
    centers = np.linspace(radius + 0.05, np.pi - radius - 0.05, count)
    return [bump_field(basis, c, radius) for c in centers]


def test_certify_identity():
    r = certify_rp(np.eye(3))
    assert r.verdict == "rp_holds"
    assert r.min_eigenvalue == 1.0
    assert r.gram_dim == 3


def test_certify_diagonal_negative():
    r = certify_rp(np.diag([1.0, -0.04]))
    assert r.verdict == "rp_fails"
    assert r.min_eigenvalue == pytest.approx(-0.04)
    assert np.allclose(np.abs(r.witness_coeffs), [0.0, 1.0])


def test_certify_rejects_asymmetric():
    with pytest.raises(ConfigurationError):
        certify_rp(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_certify_default_tolerance_scales_with_norm():
    r = certify_rp(np.diag([1e6, -1e-4]))
    assert r.tolerance == pytest.approx(1e-3)
    assert r.verdict == "rp_holds"


def test_single_compact_witness_gram(circle64):
    g, b = circle64
    f, _ = build_compact_witness(b, 5, region_partition(g))
    q = assemble_rp_gram(gff_kernel(b, CutoffSpec(5)), [f])
    assert q.shape == (1, 1)
    assert q[0, 0] == pytest.approx(-1 / 26, abs=1e-6)


def test_zero_kernel_gram(circle64):
    g, b = circle64
    q = assemble_rp_gram(zero_kernel(b), semicircle_bumps(b, 5))
    assert np.all(q == 0)


def test_gram_entries_match_pairings(circle64):
    g, b = circle64
    k = gff_kernel(b, CutoffSpec(5))
    tests = semicircle_bumps(b, 6)
    q = assemble_rp_gram(k, tests)
    for i in range(6):
        for j in range(6):
            assert q[i, j] == pytest.approx(covariance_pairing(reflect(tests[i]), tests[j], k), abs=1e-15)
    assert q.symmetry_defect < 1e-10


def test_support_violation_names_index(circle64):
    g, b = circle64
    tests = semicircle_bumps(b, 3) + [bump_field(b, -1.0, 0.5)]
    with pytest.raises(SupportError) as info:
        assemble_rp_gram(gff_kernel(b), tests)
    assert info.value.index == 3


def test_cutoff_gram_fails_with_witness_direction(circle64):
    g, b = circle64
    witness, _ = build_compact_witness(b, 5, region_partition(g))
    tests = default_test_family(b, extra=[witness])
    r = certify_rp(assemble_rp_gram(gff_kernel(b, CutoffSpec(5)), tests))
    assert r.verdict == "rp_fails"
    assert r.min_eigenvalue <= -1 / 26 + 1e-4


def test_uncut_gram_positive(circle64):
    g, b = circle64
    tests = default_test_family(b)
    r = certify_rp(assemble_rp_gram(exact_gff_kernel(b), tests))
    assert r.min_eigenvalue >= -1e-10
    assert r.verdict == "rp_holds"


def test_grid_kernel_on_fine_circle_positive():
    b = build_basis(Geometry.circle(256))
    q = assemble_rp_gram(gff_kernel(b), semicircle_bumps(b))
    assert certify_rp(q).min_eigenvalue >= -1e-10


def test_monotone_under_nested_families(circle64):
    g, b = circle64
    k = gff_kernel(b, CutoffSpec(3))
    tests = default_test_family(b)
    rng = np.random.default_rng(1)
    order = rng.permutation(len(tests))
    previous = np.inf
    for m in (5, 10, 20, 40, len(tests)):
        lo = certify_rp(assemble_rp_gram(k, [tests[i] for i in order[:m]])).min_eigenvalue
        assert lo <= previous + 1e-15
        previous = lo


def test_scaling(circle64):
    g, b = circle64
    k = gff_kernel(b, CutoffSpec(5))
    tests = semicircle_bumps(b, 10)
    r1 = certify_rp(assemble_rp_gram(k, tests))
    r2 = certify_rp(assemble_rp_gram(k, [t * 3.0 for t in tests]))
    assert r2.min_eigenvalue == pytest.approx(9 * r1.min_eigenvalue, rel=1e-10)
    assert r1.verdict == r2.verdict


def test_cross_check_witness_field(circle64):
    g, b = circle64
    k = gff_kernel(b, CutoffSpec(5))
    tests = default_test_family(b)
    r = certify_rp(assemble_rp_gram(k, tests))
    assert r.verdict == "rp_fails"
    f = combine_tests(tests, r.witness_coeffs)
    norm2 = float(np.sum(r.witness_coeffs**2))
    assert covariance_pairing(reflect(f), f, k) == pytest.approx(r.min_eigenvalue * norm2, abs=1e-8)


def test_csv_dump(tmp_path):
    q = np.array([[1.0, 0.5], [0.5, 2.0]])
    path = tmp_path / "q.csv"
    write_gram_csv(q, path)
    assert np.allclose(np.loadtxt(path, delimiter=","), q)


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=0, max_value=9))
def test_uncut_gram_psd_random_tests(seed):
    rng = np.random.default_rng(seed)
    g = Geometry.circle(int(rng.choice([32, 64])))
    b = build_basis(g)
    plus = region_partition(g).plus_mask
    tests = [Field.from_values(b, rng.standard_normal(g.shape) * plus) for _ in range(8)]
    r = certify_rp(assemble_rp_gram(exact_gff_kernel(b), tests))
    assert r.min_eigenvalue >= -1e-10 * max(1.0, float(np.abs(r.min_eigenvalue)))
