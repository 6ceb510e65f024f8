"""Importance-sampling estimates under the regularized quartic measure.

The measure is the cut-off Gaussian field reweighted by

    G(Phi) = exp(-c ||rho Phi||_4^4 - c a ||rho Phi||_2^2),

with rho a compactly supported cutoff function and a a (possibly negative)
counterterm.  Expectations are self-normalized ratios E[X G] / E[G] over
Gaussian samples, so no Markov chain is involved and every estimate is a
deterministic function of the seed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateWeightsError, SupportError
from .spectral import (
    CovarianceKernel,
    CutoffSpec,
    Field,
    gff_coefficient_samples,
    gff_kernel,
    reflect,
    region_partition,
    side_weights,
)

__all__ = [
    "Phi4Config",
    "MCEstimate",
    "MIN_EFFECTIVE_SAMPLES",
    "interaction_exponent",
    "interaction_weight",
    "weight_upper_bound",
    "weight_lower_bound",
    "young_constant",
    "default_counterterm",
    "pairing_samples",
    "estimate_rp_pairing",
    "coupling_sweep",
    "write_sweep_csv",
]

MIN_EFFECTIVE_SAMPLES = 10.0
_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class Phi4Config:
    coupling: float
    counterterm: float
    rho: Field
    cutoff: CutoffSpec
    num_samples: int = 10_000
    seed: int = 0
    core_mask: np.ndarray | None = None
    support_mask: np.ndarray | None = None
    counterterm_source: str = "explicit"

    def __post_init__(self):
        if self.coupling < 0:
            raise ConfigurationError("coupling must be nonnegative", "coupling")
        if int(self.num_samples) <= 0:
            raise ConfigurationError("num_samples must be positive", "num_samples")
        if int(self.seed) < 0:
            raise ConfigurationError("seed must be a nonnegative integer", "seed")
        v = self.rho.values
        if v.min() < -1e-12 or v.max() > 1 + 1e-12:
            raise ConfigurationError("rho must take values in [0, 1]", "rho")
        core = np.abs(v - 1) <= 1e-12 if self.core_mask is None else np.asarray(self.core_mask, dtype=bool)
        support = v > 0 if self.support_mask is None else np.asarray(self.support_mask, dtype=bool)
        if np.any(np.abs(v[core] - 1) > 1e-12):
            raise ConfigurationError("rho must equal 1 on the core mask", "rho.core")
        if np.any(v[~support] != 0):
            raise ConfigurationError("rho must vanish outside its support mask", "rho.support")
        object.__setattr__(self, "core_mask", core)
        object.__setattr__(self, "support_mask", support)
        object.__setattr__(self, "num_samples", int(self.num_samples))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def basis(self):
        return self.rho.basis

    def support_volume(self):
        return float(np.count_nonzero(self.support_mask) * self.basis.weight)

    def kernel(self):
        return gff_kernel(self.basis, self.cutoff)

    def with_coupling(self, coupling):
        return Phi4Config(
            coupling, self.counterterm, self.rho, self.cutoff, self.num_samples, self.seed,
            self.core_mask, self.support_mask, self.counterterm_source,
        )

    def to_dict(self):
        return {
            "coupling": self.coupling,
            "counterterm": self.counterterm,
            "counterterm_source": self.counterterm_source,
            "cutoff": self.cutoff.to_dict(),
            "num_samples": self.num_samples,
            "seed": self.seed,
            "support_volume": self.support_volume(),
        }


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    num_samples: int
    weight_mean: float
    effective_sample_size: float
    coupling: float = 0.0

    def to_dict(self):
        return {
            "value": self.value,
            "std_error": self.std_error,
            "num_samples": self.num_samples,
            "weight_mean": self.weight_mean,
            "effective_sample_size": self.effective_sample_size,
            "coupling": self.coupling,
        }


def _region_weights(config, region):
    shape = config.basis.geometry.shape
    if region is None or isinstance(region, str):
        side = region or "full"
        return side_weights(region_partition(config.basis.geometry), side)
    r = np.asarray(region)
    if r.shape != shape:
        raise ConfigurationError("region mask has the wrong shape", "region_mask")
    return r.astype(float)


def _norm_integrals(values, rho, weights, cell):
    """Quadrature of (rho Phi)^4 and (rho Phi)^2 against ``weights``; values may be batched."""
    u2 = (values * rho) ** 2
    return np.sum(u2 * u2 * weights, axis=-1) * cell, np.sum(u2 * weights, axis=-1) * cell


def interaction_exponent(field: Field, config: Phi4Config, region_mask=None):
    """c ||rho Phi_Lambda||_4^4 + c a ||rho Phi_Lambda||_2^2 over the region."""
    mult = config.cutoff.multiplier(field.basis.eigenvalues)
    if np.any(field.coeffs[mult == 0] != 0):
        field = Field.from_coeffs(field.basis, field.coeffs * mult)
    w = _region_weights(config, region_mask)
    i4, i2 = _norm_integrals(field.values.ravel(), config.rho.values.ravel(), w.ravel(), field.basis.weight)
    return config.coupling * (i4 + config.counterterm * i2)


def interaction_weight(field: Field, config: Phi4Config, region_mask=None):
    """G over ``region_mask``: a boolean/float node mask, 'plus', 'minus' or None (full grid).

    'plus' and 'minus' are the closed halves with the interface counted at
    weight one half, so G_full = G_plus * G_minus.
    """
    return float(np.exp(-interaction_exponent(field, config, region_mask)))


def weight_upper_bound(config: Phi4Config):
    """Pointwise max of G: exp(c a^2 Vol / 4) for a < 0, 1 otherwise."""
    a = config.counterterm
    return float(np.exp(config.coupling * a * a * config.support_volume() / 4)) if a < 0 else 1.0


def young_constant(counterterm, volume):
    """K with ||u||_4^4 + a ||u||_2^2 >= (2/3) ||u||_4^4 - K on a set of the given volume.

    Young's inequality |a| u^2 <= |a| (delta^2 u^4 / 2 + 1 / (2 delta^2))
    with |a| delta^2 / 2 = 1/3 gives K = 3 a^2 Vol / 4.  Returns
    ``(K, delta_sq)``; delta_sq is None when a >= 0.
    """
    a = float(counterterm)
    if a >= 0:
        return 0.0, None
    delta_sq = 2.0 / (3.0 * abs(a))
    return abs(a) / (2 * delta_sq) * volume, delta_sq


def weight_lower_bound(config: Phi4Config):
    """c K, so that the interaction exponent is >= (2c/3) ||rho Phi||_4^4 - c K."""
    k, _ = young_constant(config.counterterm, config.support_volume())
    return config.coupling * k


def default_counterterm(kernel: CovarianceKernel, rho: Field):
    """-3 times the pointwise field variance averaged over supp rho."""
    active = kernel.active
    if active.size == 0:
        return 0.0
    support = rho.values.ravel() > 0
    if not support.any():
        raise ConfigurationError("rho has empty support", "rho")
    e = kernel.basis.mode_values(active)[:, support]
    variance = kernel.multiplier[active] @ (e * e)
    return float(-3.0 * variance.mean())


def pairing_samples(f: Field, config: Phi4Config, kernel: CovarianceKernel | None = None):
    """Per-sample observable and norm integrals shared by every coupling.

    Returns ``(x, i4, i2)`` where x = (rho Phi)(Theta f) (rho Phi)(f) and
    i4, i2 are the full-grid quadratures of (rho Phi)^4 and (rho Phi)^2.
    """
    basis = config.basis
    if f.basis is not basis and f.geometry != basis.geometry:
        raise ConfigurationError("test function and rho live on different geometries", "f")
    part = region_partition(basis.geometry)
    outside = np.sqrt(np.sum(f.values[~part.plus_mask] ** 2) * basis.weight)
    if outside > 1e-12 * f.norm():
        raise SupportError("test function must be supported in the plus region")
    kernel = config.kernel() if kernel is None else kernel
    active, coeffs = gff_coefficient_samples(kernel, config.seed, config.num_samples)
    rho = config.rho
    p = (rho * reflect(f)).coeffs[active]
    q = (rho * f).coeffs[active]
    x = (coeffs @ p) * (coeffs @ q)
    modes = basis.mode_values(active)
    r = rho.values.ravel()
    w = side_weights(part, "full").ravel()
    i4 = np.empty(config.num_samples)
    i2 = np.empty(config.num_samples)
    for start in range(0, config.num_samples, _CHUNK):
        vals = coeffs[start : start + _CHUNK] @ modes
        i4[start : start + _CHUNK], i2[start : start + _CHUNK] = _norm_integrals(vals, r, w, basis.weight)
    return x, i4, i2


def _ratio_estimate(x, exponent, coupling):
    n = len(x)
    if coupling == 0:
        g = np.ones(n)
    else:
        # shift by the smallest exponent so ratios stay finite; the scale cancels
        shift = float(np.min(exponent))
        g = np.exp(-(exponent - shift))
    total = g.sum()
    ess = total**2 / np.sum(g * g)
    if not ess >= MIN_EFFECTIVE_SAMPLES:
        raise DegenerateWeightsError(f"effective sample size {ess:.3g} below {MIN_EFFECTIVE_SAMPLES}", float(ess))
    value = float(np.sum(g * x) / total) if coupling else float(np.mean(x))
    se = float(np.sqrt(np.sum(g * g * (x - value) ** 2)) / total)
    weight_mean = float(total / n) if coupling == 0 else float(np.exp(np.log(total / n) - shift))
    return MCEstimate(value, se, n, weight_mean, float(ess), float(coupling))


def estimate_rp_pairing(f: Field, config: Phi4Config, kernel=None):
    """Self-normalized estimate of E[(rho Phi)(Theta f) (rho Phi)(f)] under the quartic measure.

    At coupling 0 every weight is exactly 1 and the value is the plain
    sample mean of the Gaussian observable.
    """
    x, i4, i2 = pairing_samples(f, config, kernel)
    return _ratio_estimate(x, config.coupling * (i4 + config.counterterm * i2), config.coupling)


def coupling_sweep(f: Field, config: Phi4Config, couplings, kernel=None):
    """Estimates at several couplings from one shared set of Gaussian samples."""
    x, i4, i2 = pairing_samples(f, config, kernel)
    out = []
    for c in couplings:
        if c < 0:
            raise ConfigurationError("couplings must be nonnegative", "couplings")
        out.append(_ratio_estimate(x, c * (i4 + config.counterterm * i2), c))
    return out


def write_sweep_csv(estimates, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["coupling", "value", "std_error"])
        for e in estimates:
            w.writerow([repr(e.coupling), repr(e.value), repr(e.std_error)])
