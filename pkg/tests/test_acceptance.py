"""Acceptance criteria 1 to 8, one pass/fail line each.

Each test records its verdict through the ``acceptance`` fixture; the lines
are repeated in a summary section at the end of the pytest run.
"""
import time

import numpy as np
import pytest
from scipy import integrate

import test_markov
import test_phi4
import test_rp
import test_spectral
from cutoff_gff.markov import (
    build_discrete_gff,
    grid_adjacency,
    kernel_gaussian_model,
    markov_discrepancy,
    node_boundary,
    path_adjacency,
)
from cutoff_gff.phi4 import (
    Phi4Config,
    coupling_sweep,
    default_counterterm,
    estimate_rp_pairing,
    pairing_samples,
)
from cutoff_gff.rp import assemble_rp_gram, certify_rp
from cutoff_gff.spectral import (
    CutoffSpec,
    Geometry,
    build_basis,
    bump_field,
    covariance_pairing,
    exact_gff_kernel,
    gff_kernel,
    plateau_field,
    reflect,
    region_partition,
)
from cutoff_gff.witness import (
    DEFAULT_KAPPAS,
    BumpSpec,
    build_compact_witness,
    build_cylinder_witness,
    build_halfline_witness,
    fit_fourier_restriction,
    halfspace_certificate,
    halfspace_pairing,
    halfspace_target,
    kappa_integral,
)
from test_witness import kappa_oracle


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def top_eigenvalue_by_scan(lam, n):
    """Largest k^2 <= lam^2 over the circle(n) wavenumbers 0..n/2."""
    return max(k * k for k in range(n // 2 + 1) if k * k <= lam * lam)


@pytest.mark.criterion(1)
def test_criterion_1_compact_exact_value(acceptance):
    g = Geometry.circle(64)
    part = region_partition(g)
    details, ok = [], True
    for lam in (5, 1, 3, 7):
        # the basis build is part of the timed construction
        (f_cert, dt) = timed(lambda: build_compact_witness(build_basis(g), lam, part))
        cert = f_cert[1]
        lam_star = top_eigenvalue_by_scan(lam, 64)
        expected = -1.0 / (lam_star + 1)
        err = abs(cert.value - expected)
        good = err <= 1e-6 and dt < 1.0 and cert.parameters["lambda_star"] == lam_star
        ok &= good
        details.append(f"lam={lam}: {cert.value:.9f} vs {expected:.9f} err={err:.1e} t={dt:.3f}s")
    acceptance(1, ok, "; ".join(details))


@pytest.mark.criterion(2)
def test_criterion_2_halfline_certificate(acceptance):
    spec = BumpSpec()
    (h, cert), dt = timed(build_halfline_witness, spec)
    n = cert.parameters["n"]
    values = np.array(cert.parameters["kappa_values"])
    # same construction at doubled resolution, checked against the quadrature oracle
    h2, _ = build_halfline_witness(spec, points_per_width=1024)
    fine = kappa_integral(h2, DEFAULT_KAPPAS)
    oracle = np.array([
        kappa_oracle(2 * n, k, spec.center, spec.width, cert.parameters["log_scale"]) for k in DEFAULT_KAPPAS
    ])
    rel_oracle = np.max(np.abs(values - oracle) / np.abs(oracle))
    rel_fine = np.max(np.abs(fine - oracle) / np.abs(oracle))
    ok = (
        2 * n <= 64 and len(values) == 21 and np.all(values < 0) and np.all(oracle < 0)
        and rel_oracle < 1e-4 and rel_fine < 1e-4 and dt < 5.0
    )
    acceptance(
        2, ok,
        f"n={n} max kappa value={values.max():.3e} oracle disagreement={rel_oracle:.1e} "
        f"(doubled grid {rel_fine:.1e}) t={dt:.2f}s",
    )


@pytest.mark.criterion(3)
def test_criterion_3_cylinder(acceptance):
    t0 = time.perf_counter()
    h, _ = build_halfline_witness()
    g = Geometry.cylinder(128, slice_points=32)
    f, cert = build_cylinder_witness(4.0, g, h)
    dt = time.perf_counter() - t0
    # the uncut covariance is the exact (Delta + 1)^-1 restricted to the nodes
    uncut = covariance_pairing(reflect(f), f, exact_gff_kernel(f.basis))
    ok = cert.value < 0 and uncut >= -1e-10 and dt < 5.0
    acceptance(3, ok, f"cut-off pairing={cert.value:.4e} uncut pairing={uncut:.3e} t={dt:.2f}s")


def limit_integral_by_quadrature(dim, lam):
    """-int_{|xi| <= lam} xi_1^2 / (|xi|^2 + 1) dxi in Cartesian coordinates."""
    if dim == 1:
        return -integrate.quad(lambda x: x * x / (x * x + 1), -lam, lam, epsabs=1e-13)[0]
    val = integrate.dblquad(
        lambda y, x: x * x / (x * x + y * y + 1), -lam, lam,
        lambda x: -np.sqrt(max(lam * lam - x * x, 0.0)), lambda x: np.sqrt(max(lam * lam - x * x, 0.0)),
        epsabs=1e-11,
    )[0]
    return -val


@pytest.mark.criterion(4)
def test_criterion_4_halfspace(acceptance):
    details, ok = [], True
    for dim, points, extent in ((1, 256, 32.0), (2, 64, 16.0)):
        t0 = time.perf_counter()
        g = Geometry.periodic_grid(dim, extent, points)
        b = build_basis(g)
        rho = plateau_field(b, 2.0, 3.0)
        r = np.sqrt(sum(c**2 for c in g.coordinates()))
        mask = region_partition(g).plus_mask & (r < 2.0)
        f, res = fit_fourier_restriction(b, mask, 3.0, rho)
        cert = halfspace_certificate(f, gff_kernel(b, CutoffSpec(3.0)), rho, res)
        dt = time.perf_counter() - t0
        ratio = res / np.linalg.norm(halfspace_target(b, 3.0))
        limit = limit_integral_by_quadrature(dim, 3.0)
        good = ratio <= 0.1 and cert.value < 0 and np.sign(cert.value) == np.sign(limit) and dt < 30.0
        ok &= good
        details.append(
            f"{dim}D {points}^{dim}: value={cert.value:.4e} limit={limit:.4f} residual ratio={ratio:.1e} t={dt:.2f}s"
        )
    acceptance(4, ok, "; ".join(details))


@pytest.mark.criterion(5)
def test_criterion_5_uncut_rp(acceptance):
    details, ok = [], True
    for n, kernel_of in ((64, exact_gff_kernel), (256, gff_kernel)):
        b = build_basis(Geometry.circle(n))
        centers = np.linspace(0.55, np.pi - 0.55, 40)
        tests = [bump_field(b, c, 0.5) for c in centers]
        report = certify_rp(assemble_rp_gram(kernel_of(b), tests))
        ok &= report.min_eigenvalue >= -1e-10
        details.append(f"circle({n}) {kernel_of.__name__}: min eig={report.min_eigenvalue:.3e}")
    acceptance(5, ok, "; ".join(details))


@pytest.mark.criterion(6)
def test_criterion_6_markov(acceptance):
    t0 = time.perf_counter()
    adj = path_adjacency(16)
    region = list(range(8))
    path_report = markov_discrepancy(
        build_discrete_gff(adj), region, node_boundary(adj, region), range(8, 16)
    )
    t_path = time.perf_counter() - t0

    t0 = time.perf_counter()
    g = Geometry.circle(64)
    part = region_partition(g)
    model = kernel_gaussian_model(gff_kernel(build_basis(g), CutoffSpec(5)))
    closed = list(np.flatnonzero(part.plus_mask | part.interface_mask))
    boundary = node_boundary(grid_adjacency(g), closed)
    circle_report = markov_discrepancy(model, closed, boundary, list(np.flatnonzero(part.minus_mask)))
    t_circle = time.perf_counter() - t0

    ok = (
        path_report.max_delta_sq <= 1e-10 and circle_report.max_delta_sq > 1e-4
        and t_path < 1.0 and t_circle < 1.0
    )
    acceptance(
        6, ok,
        f"path16 max={path_report.max_delta_sq:.2e} t={t_path:.3f}s; "
        f"circle(64) lam=5 max={circle_report.max_delta_sq:.3f} t={t_circle:.3f}s",
    )


def phi4_run(counterterm_of):
    g = Geometry.circle(64)
    b = build_basis(g)
    rho = plateau_field(b, 2.5, 3.0)
    kernel = gff_kernel(b, CutoffSpec(3))
    config = Phi4Config(1e-3, counterterm_of(kernel, rho), rho, CutoffSpec(3), 200_000, 0)
    part = region_partition(g)
    f, _ = build_compact_witness(b, 3, part, support_mask=part.plus_mask & config.core_mask)
    gaussian = halfspace_pairing(f, kernel, rho)
    small = estimate_rp_pairing(f, config, kernel)
    sweep = coupling_sweep(f, config, [0.0, 1e-1, 1e-2, 1e-3], kernel)
    x, _, _ = pairing_samples(f, config, kernel)
    return gaussian, small, sweep, x


@pytest.mark.criterion(7)
def test_criterion_7_phi4(acceptance):
    details, ok = [], True
    for label, counterterm_of in (("a=default", default_counterterm), ("a=0", lambda k, r: 0.0)):
        t0 = time.perf_counter()
        gaussian, small, sweep, x = phi4_run(counterterm_of)
        dt = time.perf_counter() - t0
        zero, *rest = sweep
        negative = small.value < 0 and abs(small.value) >= 3 * small.std_error
        # c = 0: constant weights, so the ratio estimator is exactly the Gaussian sample mean,
        # which in turn sits within sampling error of the exact Gaussian pairing
        exact_at_zero = zero.value == float(np.mean(x)) and abs(zero.value - gaussian) <= 5 * zero.std_error
        gaps = [abs(e.value - zero.value) for e in rest]
        combined = np.hypot(rest[-1].std_error, zero.std_error)
        converges = all(a >= b for a, b in zip(gaps, gaps[1:])) and gaps[-1] <= combined
        good = negative and exact_at_zero and converges and dt < 60.0
        ok &= good
        details.append(
            f"{label}: v(1e-3)={small.value:.5f}+-{small.std_error:.1e} v(0)={zero.value:.5f} "
            f"gaussian={gaussian:.5f} gaps={['%.1e' % d for d in gaps]} t={dt:.1f}s"
        )
    acceptance(7, ok, "; ".join(details))


PROPERTY_SUITES = [
    ("projector idempotence", test_spectral.test_projector_idempotent),
    ("theta commutation", test_spectral.test_reflection_commutes_with_multiplier),
    ("parseval", test_spectral.test_parseval_and_round_trip),
    ("reflection permutation", test_spectral.test_reflect_matches_node_permutation),
    ("sampler covariance", test_spectral.test_sampler_covariance_matches_multiplier),
    ("weight factorization", test_phi4.test_weight_factorization),
    ("nested predictors", test_markov.test_nested_predictors_nonnegative),
    ("uncut gram psd", test_rp.test_uncut_gram_psd_random_tests),
]


@pytest.mark.criterion(8)
def test_criterion_8_property_suites(acceptance):
    failures = []
    for name, prop in PROPERTY_SUITES:
        for seed in range(10):
            try:
                prop.hypothesis.inner_test(seed)
            except AssertionError as exc:
                failures.append(f"{name}[seed={seed}]: {exc}")
    acceptance(
        8, not failures,
        f"{len(PROPERTY_SUITES)} properties x seeds 0-9" + ("" if not failures else f"; failed: {failures}"),
    )
