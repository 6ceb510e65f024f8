"""Explicit test functions on which cut-off covariances pair negatively.

Four constructions:

* half-line: h = phi^(2n) for a bump phi near pi/2, found by doubling n
  until the kappa-weighted low-frequency energy of h turns negative;
* cylinder: a time profile carrying h's transform in the cut-off band,
  tensored with a slice function;
* compact manifold: the plus-supported solution of <f, e_lam> = delta at the
  top odd eigenvalue below the cutoff, with pairing -1/(lam* + 1);
* half-space: a least-squares fit of the restricted Fourier transform of
  rho f to i xi_1 on the frequency ball.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import fft as sp_fft
from scipy import integrate

from .errors import ConfigurationError, ConstructionFailed, FitFailed, RankDeficientError
from .spectral import (
    CutoffSpec,
    Field,
    Geometry,
    SpectralBasis,
    build_basis,
    bump_profile,
    covariance_pairing,
    gff_kernel,
    reflect,
    region_partition,
)

__all__ = [
    "BumpSpec",
    "HalfLineFunction",
    "WitnessCertificate",
    "DEFAULT_KAPPAS",
    "truncated_lstsq",
    "bump_function",
    "fourier_transform",
    "spectral_derivative",
    "kappa_integral",
    "kappa_noise_floor",
    "weighted_ratio",
    "build_halfline_witness",
    "build_cylinder_witness",
    "build_compact_witness",
    "halfspace_target",
    "restriction_matrix",
    "fit_fourier_restriction",
    "halfspace_limit_integral",
    "halfspace_pairing",
    "halfspace_certificate",
]

DEFAULT_KAPPAS = np.linspace(1.0, 2.0, 21)
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class BumpSpec:
    center: float = np.pi / 2
    width: float = 0.3
    derivative_order_cap: int = 64

    def __post_init__(self):
        if self.width <= 0:
            raise ConfigurationError("bump width must be positive", "width")
        if self.center - self.width <= 0:
            raise ConfigurationError("bump support must lie in (0, inf)", "center")
        cap = self.derivative_order_cap
        if cap <= 0 or cap % 2:
            raise ConfigurationError("derivative_order_cap must be a positive even integer", "derivative_order_cap")


@dataclass(frozen=True, eq=False)
class HalfLineFunction:
    """Samples ``values[j] = h(j * dx)`` of a function on [0, len * dx)."""

    dx: float
    values: np.ndarray
    sample_error: float = 0.0

    @property
    def x(self):
        return np.arange(len(self.values)) * self.dx

    def norm(self):
        return float(np.sqrt(np.sum(self.values**2) * self.dx))


@dataclass(frozen=True)
class WitnessCertificate:
    kind: str
    value: float
    predicted: float | None = None
    parameters: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("halfline", "cylinder", "compact", "halfspace"):
            raise ConfigurationError(f"unknown certificate kind {self.kind!r}")
        if not self.value < 0:
            raise ConstructionFailed(f"{self.kind} pairing {self.value!r} is not negative", value=self.value)

    def to_dict(self):
        p = self.parameters
        out = {
            "kind": self.kind,
            "value": self.value,
            "predicted": self.predicted,
            "n": p.get("n"),
            "lambda_star": p.get("lambda_star"),
            "residual": p.get("residual"),
            "smallest_singular_value": p.get("smallest_singular_value"),
        }
        out["parameters"] = {k: v for k, v in p.items() if k not in out}
        return out


def truncated_lstsq(a, b, rtol=1e-10):
    """Minimum-norm least squares with singular values below rtol*s_max dropped.

    Returns ``(x, singular_values, rank)``.
    """
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(a.shape[1]), s, 0
    rank = int(np.sum(s > rtol * s[0]))
    x = vt[:rank].T @ ((u[:, :rank].T @ b) / s[:rank])
    return x, s, rank


# ---------------------------------------------------------------- half line


def bump_function(spec: BumpSpec, points_per_width=512):
    """The bump of ``spec`` sampled on [0, center + 2 width) with a power-of-two grid."""
    length = spec.center + 2 * spec.width
    n = 1 << int(np.ceil(np.log2(length / spec.width * points_per_width)))
    dx = length / n
    x = np.arange(n) * dx
    return HalfLineFunction(dx, bump_profile((x - spec.center) / spec.width))


def fourier_transform(h: HalfLineFunction, xi, chunk=64):
    """Trapezoid approximation of int h(x) exp(-i xi x) dx at arbitrary ``xi``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    nz = np.flatnonzero(h.values)
    if nz.size == 0:
        return np.zeros(xi.shape, dtype=complex)
    lo, hi = nz[0], nz[-1] + 1
    x = np.arange(lo, hi) * h.dx
    v = h.values[lo:hi]
    out = np.empty(xi.shape, dtype=complex)
    for i in range(0, len(xi), chunk):
        phase = np.outer(xi[i : i + chunk], x)
        out[i : i + chunk] = (np.cos(phase) @ v - 1j * (np.sin(phase) @ v)) * h.dx
    return out


def spectral_derivative(phi: HalfLineFunction, order: int):
    """phi^(order) by FFT in extended precision, rescaled to unit L2 norm.

    The low-frequency part of a high derivative is many orders of magnitude
    below its peak, so the transform runs in long double and the multiplier
    is (i xi / xi_nyquist)^order to keep values in range.  Returns
    ``(h, log_scale)`` with ``h = exp(log_scale) * phi^(order)``; ``h``
    carries an estimate of its per-sample rounding error.
    """
    n = len(phi.values)
    ld = np.longdouble
    k = np.concatenate([np.arange(0, n // 2), np.arange(-(n // 2), 0)]).astype(ld)
    ratio = k / ld(n // 2)
    spectrum = sp_fft.fft(phi.values.astype(ld))
    with np.errstate(under="ignore"):
        mult = (1j * ratio) ** order
        h = sp_fft.ifft(spectrum * mult).real
        err = np.finfo(ld).eps * np.log2(n) * np.sum(np.abs(spectrum) * np.abs(ratio) ** order) / n
    # derivatives vanish wherever phi does; drop FFT rounding outside the support
    nz = np.flatnonzero(phi.values)
    if nz.size:
        h[: max(nz[0] - 1, 0)] = 0.0
        h[nz[-1] + 2 :] = 0.0
    norm = np.sqrt(np.sum(h**2) * ld(phi.dx))
    xi_max = np.pi / phi.dx
    if norm == 0:
        return HalfLineFunction(phi.dx, h.astype(float)), -np.inf
    # float64 storage adds its own half-ulp rounding per sample
    sample_error = float(err / norm) + _EPS * float(np.abs(h).max() / norm)
    out = HalfLineFunction(phi.dx, (h / norm).astype(float), sample_error)
    return out, float(-order * np.log(xi_max) - np.log(norm))


def _check_support(h: HalfLineFunction):
    v = np.abs(h.values)
    peak = v.max()
    if peak == 0:
        return
    nz = np.flatnonzero(v > 1e-12 * peak)
    if nz[0] == 0 or nz[-1] == len(v) - 1:
        raise ConfigurationError("h must be compactly supported inside (0, grid end)", "h")


def _gauss_legendre_unit(m):
    t, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (t + 1), 0.5 * w


def kappa_integral(h: HalfLineFunction, kappa, quad_points=192):
    """int_{-1}^{1} conj(h^(-xi)) h^(xi) / (xi^2 + kappa) dxi for real h.

    For real h the integrand equals Re(h^(xi)^2)/(xi^2+kappa) up to an odd
    imaginary part, so the integral is 2 int_0^1 of the real part.  Accepts a
    scalar or an array of kappa values.
    """
    _check_support(h)
    xi, w = _gauss_legendre_unit(quad_points)
    hat = fourier_transform(h, xi)
    energy = (hat * hat).real
    kappa = np.asarray(kappa, dtype=float)
    vals = 2 * np.sum(w * energy / (xi**2 + kappa[..., None]), axis=-1)
    return float(vals) if vals.ndim == 0 else vals


def kappa_noise_floor(h: HalfLineFunction, kappa, quad_points=192):
    """Error scale of :func:`kappa_integral` from sample and summation rounding."""
    nz = np.flatnonzero(h.values)
    support = (nz[-1] - nz[0] + 1) if nz.size else 0
    l1 = np.sum(np.abs(h.values)) * h.dx
    delta = support * h.dx * h.sample_error + 4 * _EPS * np.sqrt(max(support, 1)) * l1
    xi, _ = _gauss_legendre_unit(quad_points)
    peak = np.abs(fourier_transform(h, xi)).max()
    kappa = np.asarray(kappa, dtype=float)
    weight = 2 * np.arctan(1 / np.sqrt(kappa)) / np.sqrt(kappa)
    return 2 * (peak * delta + delta**2) * weight


def weighted_ratio(phi: HalfLineFunction, n, kappa=1.0, quad_points=400):
    """Ratio of int xi^4n (A^2 - B^2)/(xi^2+kappa) to int xi^4n/(xi^2+kappa) on [0, 1].

    A and B are the cosine and sine transforms of ``phi``.  As n grows this
    tends to A(1)^2 - B(1)^2.
    """
    xi, w = _gauss_legendre_unit(quad_points)
    hat = fourier_transform(phi, xi)
    weight = w * xi ** (4 * n) / (xi**2 + kappa)
    return float(np.sum(weight * (hat * hat).real) / np.sum(weight))


def build_halfline_witness(spec: BumpSpec = BumpSpec(), kappas=DEFAULT_KAPPAS, points_per_width=512, margin=100.0):
    """Find h = phi^(2n) with negative kappa-integral for every kappa in ``kappas``.

    n doubles from 2 while 2n <= ``spec.derivative_order_cap``.  A value only
    counts as negative when it is below ``-margin`` times the rounding floor.
    """
    kappas = np.asarray(kappas, dtype=float)
    phi = bump_function(spec, points_per_width)
    best = np.inf
    tried = []
    n = 2
    while 2 * n <= spec.derivative_order_cap:
        h, log_scale = spectral_derivative(phi, 2 * n)
        vals = kappa_integral(h, kappas)
        floor = kappa_noise_floor(h, kappas)
        worst = float(vals.max())
        tried.append(n)
        if np.all(vals < -margin * floor):
            cert = WitnessCertificate(
                "halfline",
                worst,
                None,
                {
                    "n": n,
                    "kappas": kappas.tolist(),
                    "kappa_values": vals.tolist(),
                    "log_scale": float(log_scale),
                    "noise_floor": float(floor.max()),
                    "dx": h.dx,
                    "grid_points": len(h.values),
                    "center": spec.center,
                    "width": spec.width,
                },
            )
            return h, cert
        # values swamped by rounding are not evidence of either sign
        credible = np.where(np.abs(vals) > margin * floor, vals, np.inf)
        if np.all(np.isfinite(credible)):
            best = min(best, float(credible.max()))
        n *= 2
    raise ConstructionFailed(
        "derivative cap reached without a negative kappa integral; grid too coarse or bump too wide",
        value=best,
        orders_tried=tried,
    )


# ----------------------------------------------------------------- cylinder


def _continuum_band_pairing(h, lam, mu2, weights, quad_points=256):
    """sum_mu w_mu (1/2pi) int_{tau^2 <= lam^2 - mu^2} Re g^(tau)^2/(tau^2+mu^2+1), g = lam h(lam .)."""
    total = 0.0
    t, w = np.polynomial.legendre.leggauss(quad_points)
    for m2, wt in zip(mu2, weights):
        if wt == 0 or m2 > lam**2:
            continue
        top = np.sqrt(lam**2 - m2)
        tau, wq = top * t, top * w
        hat = fourier_transform(h, tau / lam)
        total += wt * np.sum(wq * (hat * hat).real / (tau**2 + m2 + 1)) / (2 * np.pi)
    return total


def build_cylinder_witness(lam, cylinder: Geometry, h: HalfLineFunction, chi: Field | None = None, rtol=1e-10):
    """Cylinder test function f(t, .) = g(t) chi_lam(.) pairing negatively with C_lam.

    g is supported in 0 < t <= T/4 and its Fourier coefficients on the band
    |tau| <= lam equal those of lam h(lam t), which is all the cut-off
    covariance sees of the time profile; chi_lam is the slice projection of
    ``chi`` (default: the constant slice mode) onto eigenvalues <= lam^2.
    f is scaled so that its band coefficients have unit norm.

    ``predicted`` is the band sum a perfect fit attains; the parameter
    ``continuum_value`` is the matching frequency integral, which the band
    sum approaches as the time period grows.
    """
    if cylinder.kind != "cylinder":
        raise ConfigurationError("expected a cylinder geometry", "geometry.kind")
    basis = build_basis(cylinder)
    n_time, n_slice = cylinder.points
    period = cylinder.extents[0]
    slice_basis = build_basis(Geometry.circle(n_slice))
    if chi is None:
        chi = Field.mode(slice_basis, 0)
    if chi.geometry != slice_basis.geometry:
        raise ConfigurationError("chi must live on the slice circle", "chi")
    chi = chi * (1 / chi.norm())
    in_band = CutoffSpec(lam).multiplier(slice_basis.eigenvalues)
    chi_cut = Field.from_coeffs(slice_basis, chi.coeffs * in_band)
    slice_mass = float(np.sum(chi_cut.coeffs**2))
    if slice_mass < 1e-8:
        raise ConstructionFailed("slice function has no spectral mass below the cutoff", value=None, slice_mass=slice_mass)

    time_basis = build_basis(Geometry.periodic_grid(1, period, n_time))
    band = np.flatnonzero(CutoffSpec(lam).multiplier(time_basis.eigenvalues))
    tau = np.sqrt(time_basis.eigenvalues[band])
    ghat = fourier_transform(h, tau / lam)
    amp = np.where(time_basis.wavenumbers[band, 0] == 0, 1 / np.sqrt(period), np.sqrt(2 / period))
    target = amp * np.where(time_basis.sine[band, 0], -ghat.imag, ghat.real)
    scale = np.linalg.norm(target)
    if scale == 0:
        raise ConstructionFailed("h has no energy in the cut-off band", value=None)
    target = target / scale

    t = time_basis.geometry.axis_coordinates(0)
    support = (t > 0) & (t <= period / 4 + 1e-12 * period)
    a = time_basis.mode_values(band)[:, support] * time_basis.weight
    x, s, rank = truncated_lstsq(a, target, rtol)
    g = np.zeros(n_time)
    g[support] = x
    f = Field.from_values(basis, np.outer(g, chi_cut.values))

    kernel = gff_kernel(basis, CutoffSpec(lam))
    value = covariance_pairing(reflect(f), f, kernel)
    # exact band sum for a perfect fit: time parity is -1 on sine modes
    tau2 = time_basis.eigenvalues[band][:, None] + slice_basis.eigenvalues[None, :]
    sign = np.where(time_basis.sine[band, 0], -1.0, 1.0)[:, None]
    inside = CutoffSpec(lam).multiplier(tau2)
    predicted = np.sum(inside * sign * np.outer(target**2, chi_cut.coeffs**2) / (tau2 + 1))
    continuum = _continuum_band_pairing(h, lam, slice_basis.eigenvalues, chi_cut.coeffs**2) / scale**2
    params = {
        "lam": float(lam),
        "time_extent": period,
        "residual": float(np.linalg.norm(a @ x - target)),
        "smallest_singular_value": float(s[rank - 1]) if rank else 0.0,
        "rank": rank,
        "band_modes": int(len(band)),
        "slice_mass": slice_mass,
        "continuum_value": float(continuum),
    }
    if not value < 0:
        raise ConstructionFailed("cylinder pairing is not negative", value=value, **params)
    return f, WitnessCertificate("cylinder", value, float(predicted), params)


# ------------------------------------------------------------------ compact


def build_compact_witness(basis: SpectralBasis, lam, region, support_mask=None, rtol=1e-10):
    """Plus-supported f with <f, e> = 1 on the top odd mode below lam^2, 0 on the rest.

    Its reflected pairing with the sharp cut-off covariance is
    -1/(lambda* + 1).  ``support_mask`` optionally shrinks the support
    inside ``region.plus_mask``.
    """
    ev = basis.eigenvalues
    below = CutoffSpec(lam).multiplier(ev) > 0
    odd_below = np.flatnonzero(below & (basis.parity < 0))
    if odd_below.size == 0:
        raise ConstructionFailed("Lambda below L: no odd eigenfunction with eigenvalue <= Lambda^2", value=None)
    top = ev[odd_below].max()
    star = int(odd_below[ev[odd_below] == top].max())
    lambda_star = float(ev[star])

    mask = np.asarray(region.plus_mask, dtype=bool)
    if support_mask is not None:
        support_mask = np.asarray(support_mask, dtype=bool)
        if np.any(support_mask & ~mask):
            raise ConfigurationError("support mask must lie inside the plus region", "support_mask")
        mask = support_mask
    if not mask.any():
        raise ConfigurationError("plus region is empty", "region")

    rows = np.flatnonzero(below)
    t_mat = basis.mode_values(rows)[:, mask.ravel()] * basis.weight
    target = (rows == star).astype(float)
    x, s, rank = truncated_lstsq(t_mat, target, rtol)
    if rank < len(rows):
        # fewer support nodes than constraints leaves implicit zero singular values
        deficient = float(s[rank]) if rank < len(s) else 0.0
        raise RankDeficientError(
            f"constraint map is numerically rank deficient (singular value {deficient:.3e})",
            value=None,
            singular_value=deficient,
        )
    values = np.zeros(basis.geometry.n_nodes)
    values[mask.ravel()] = x
    f = Field.from_values(basis, values)
    value = covariance_pairing(reflect(f), f, gff_kernel(basis, CutoffSpec(lam)))
    params = {
        "lam": float(lam),
        "lambda_star": lambda_star,
        "mode_index": star,
        "smallest_odd_eigenvalue": float(ev[basis.parity < 0].min()),
        "residual": float(np.abs(t_mat @ x - target).max()),
        "smallest_singular_value": float(s[rank - 1]),
        "constraints": int(len(rows)),
    }
    return f, WitnessCertificate("compact", value, -1.0 / (lambda_star + 1.0), params)


# ---------------------------------------------------------------- half space


def halfspace_target(basis: SpectralBasis, lam):
    """Per-mode coefficients of -d/dx_1 of the band-limited delta at the origin.

    Its Fourier transform is i xi_1 on the ball |xi| <= lam: the real-field
    version of the target xi_1 chi_B.
    """
    ball = CutoffSpec(lam).multiplier(basis.eigenvalues)
    return -basis.gradient_at_origin(basis.geometry.reflection_axis) * ball


def restriction_matrix(basis: SpectralBasis, support_mask, lam, rho: Field):
    """Matrix of f|_mask -> (coefficients of rho f on modes with lambda <= lam^2)."""
    rows = np.flatnonzero(CutoffSpec(lam).multiplier(basis.eigenvalues))
    mask = np.asarray(support_mask, dtype=bool).ravel()
    weights = rho.values.ravel()[mask] * basis.weight
    return rows, basis.mode_values(rows)[:, mask] * weights


def fit_fourier_restriction(grid, support_mask, ball_radius, rho: Field, target=None, max_residual=None, rtol=1e-10):
    """Least-squares f on ``support_mask`` whose rho f matches ``target`` on the ball.

    ``target`` is a per-mode vector (entries outside the ball are ignored);
    the default is :func:`halfspace_target`.  Returns ``(f, residual)`` with
    the residual measured in L2 of the ball.
    """
    basis = grid if isinstance(grid, SpectralBasis) else build_basis(grid)
    mask = np.asarray(support_mask, dtype=bool).reshape(basis.geometry.shape)
    if not mask.any():
        raise ConfigurationError("support mask is empty", "support_mask")
    if np.any(mask & ~region_partition(basis.geometry).plus_mask):
        raise ConfigurationError("support mask must lie in the open half-space x_1 > 0", "support_mask")
    if target is None:
        target = halfspace_target(basis, ball_radius)
    rows, a = restriction_matrix(basis, mask, ball_radius, rho)
    t = np.asarray(target, dtype=float)[rows]
    x, _, _ = truncated_lstsq(a, t, rtol)
    residual = float(np.linalg.norm(a @ x - t))
    if max_residual is not None and residual > max_residual:
        raise FitFailed(f"restriction fit residual {residual:.3e} exceeds {max_residual:.3e}", residual)
    values = np.zeros(basis.geometry.n_nodes)
    values[mask.ravel()] = x
    return Field.from_values(basis, values), residual


_SPHERE_AREA = {1: 2.0, 2: 2 * np.pi, 3: 4 * np.pi}


def halfspace_limit_integral(dim, cutoff: CutoffSpec):
    """-int psi(|xi|/lam)^2 xi_1^2 / (|xi|^2 + 1) dxi over R^dim, by radial quadrature."""
    def radial(r):
        psi = cutoff.multiplier(r**2)
        if cutoff.kind == "smooth":
            psi = psi**2
        return psi * r**2 / (r**2 + 1) * r ** (dim - 1)

    top = cutoff.lam
    val, _ = integrate.quad(radial, 0, top, epsabs=1e-13, epsrel=1e-12, limit=200)
    return -_SPHERE_AREA[dim] / dim * val


def halfspace_pairing(f: Field, kernel, rho: Field):
    """<psi(rho Theta f), (Delta+1)^-1 psi(rho f)> for the multiplier of ``kernel``."""
    return covariance_pairing(rho * reflect(f), rho * f, kernel)


def halfspace_certificate(f: Field, kernel, rho: Field, residual=None):
    """Certify the half-space pairing together with its Lambda-ball limit.

    ``predicted`` is the limit integral scaled by (2 pi)^-dim, the value a
    perfectly fitted f approaches on a large box.  Raises
    :class:`ConstructionFailed` (carrying the value) when the pairing is not
    negative.
    """
    if kernel.cutoff is None:
        raise ConfigurationError("half-space certificate needs a cut-off kernel", "cutoff")
    value = halfspace_pairing(f, kernel, rho)
    dim = f.geometry.dim
    limit = halfspace_limit_integral(dim, kernel.cutoff)
    params = {"limit_integral": limit, "residual": residual, "lam": kernel.cutoff.lam}
    predicted = limit / (2 * np.pi) ** dim
    if not value < 0:
        raise ConstructionFailed("half-space pairing is not negative", value=value, predicted=predicted)
    return WitnessCertificate("halfspace", value, predicted, params)
