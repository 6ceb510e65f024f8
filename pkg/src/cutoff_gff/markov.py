"""Nested Gaussian predictors as a probe of the spatial Markov property.

For a Gaussian vector X the best predictor of X_b from the coordinates in a
set S is linear, with explained variance Sigma_bS Sigma_SS^+ Sigma_Sb.  If
the boundary of A is a subset of A, the two conditional expectations are
nested projections and the squared L2 distance between them is the
difference of explained variances.  A Markov field has zero discrepancy for
every target beyond the boundary.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .spectral import CovarianceKernel, Geometry

__all__ = [
    "GaussianModel",
    "MarkovReport",
    "PINV_RCOND",
    "build_discrete_gff",
    "path_adjacency",
    "cycle_adjacency",
    "grid_adjacency",
    "kernel_gaussian_model",
    "conditional_predictor",
    "explained_variance",
    "markov_discrepancy",
    "node_boundary",
    "write_markov_csv",
]

PINV_RCOND = 1e-12


@dataclass(frozen=True, eq=False)
class GaussianModel:
    sites: tuple
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.array(self.covariance, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] != len(self.sites):
            raise ConfigurationError("covariance must be square with one row per site", "covariance")
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > 1e-12 * scale:
            raise ConfigurationError("covariance is not symmetric", "covariance")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov)[0] < -1e-10 * scale:
            raise ConfigurationError("covariance is not positive semidefinite", "covariance")
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.sites)})

    def indices(self, sites):
        try:
            return np.array([self._index[s] for s in sites], dtype=int)
        except KeyError as exc:
            raise ConfigurationError(f"unknown site {exc.args[0]!r}", "sites") from None


@dataclass(frozen=True)
class MarkovReport:
    targets: tuple
    per_target_delta_sq: np.ndarray
    max_delta_sq: float
    markov_verdict: str
    tolerance: float

    def to_dict(self):
        return {
            "targets": [t if isinstance(t, (int, str)) else list(t) for t in self.targets],
            "delta_sq": np.asarray(self.per_target_delta_sq).tolist(),
            "max_delta_sq": self.max_delta_sq,
            "verdict": self.markov_verdict,
            "tolerance": self.tolerance,
        }


def path_adjacency(n):
    a = np.zeros((n, n))
    i = np.arange(n - 1)
    a[i, i + 1] = a[i + 1, i] = 1
    return a


def cycle_adjacency(n):
    a = path_adjacency(n)
    if n > 2:
        a[0, n - 1] = a[n - 1, 0] = 1
    return a


def grid_adjacency(geometry: Geometry):
    """Nearest-neighbour adjacency of the periodic grid, nodes in C order."""
    n = geometry.n_nodes
    idx = np.arange(n).reshape(geometry.shape)
    a = np.zeros((n, n))
    for axis in range(geometry.dim):
        nb = np.roll(idx, -1, axis=axis)
        a[idx.ravel(), nb.ravel()] = 1
        a[nb.ravel(), idx.ravel()] = 1
    return a


def _is_connected(adj):
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = [0]
    while frontier:
        nxt = np.flatnonzero((adj[frontier].sum(axis=0) > 0) & ~seen)
        seen[nxt] = True
        frontier = list(nxt)
    return bool(seen.all())


def build_discrete_gff(adjacency, mass=1.0, sites=None):
    """Graph GFF with covariance (L + mass^2 I)^-1."""
    adj = np.asarray(adjacency, dtype=float)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] == 0:
        raise ConfigurationError("adjacency must be a nonempty square matrix", "adjacency")
    if not np.array_equal(adj, adj.T):
        raise ConfigurationError("adjacency must be symmetric", "adjacency")
    if mass <= 0:
        raise ConfigurationError("mass must be positive", "mass")
    if not _is_connected(adj):
        raise ConfigurationError("graph must be connected", "adjacency")
    lap = np.diag(adj.sum(axis=1)) - adj
    cov = np.linalg.inv(lap + mass**2 * np.eye(len(adj)))
    sites = tuple(range(len(adj))) if sites is None else tuple(sites)
    return GaussianModel(sites, 0.5 * (cov + cov.T))


def kernel_gaussian_model(kernel: CovarianceKernel):
    """Node-value covariance of the field with spectral covariance ``kernel``.

    Sites are multi-indices of grid nodes.
    """
    basis = kernel.basis
    active = kernel.active
    e = basis.mode_values(active)
    cov = (e.T * kernel.multiplier[active]) @ e
    sites = tuple(tuple(int(i) for i in ix) for ix in np.ndindex(*basis.geometry.shape))
    if basis.geometry.dim == 1:
        sites = tuple(s[0] for s in sites)
    return GaussianModel(sites, cov)


def conditional_predictor(model: GaussianModel, conditioning, target):
    """Weights w with E[X_target | X_S] = w . X_S."""
    s = model.indices(conditioning)
    if s.size == 0:
        raise ConfigurationError("conditioning set is empty", "conditioning")
    b = model.indices([target])[0]
    cov = model.covariance
    return cov[b, s] @ np.linalg.pinv(cov[np.ix_(s, s)], rcond=PINV_RCOND, hermitian=True)


def _factor(model: GaussianModel):
    """F with F F^T = Sigma, from the numerically positive part of the spectrum."""
    f = getattr(model, "_factor_cache", None)
    if f is None:
        evals, evecs = np.linalg.eigh(model.covariance)
        # eigenvalues at rounding level are numerical zeros of a PSD matrix
        keep = evals > 64 * np.finfo(float).eps * max(evals[-1], 0.0) * len(evals)
        f = evecs[:, keep] * np.sqrt(evals[keep])
        object.__setattr__(model, "_factor_cache", f)
    return f


def explained_variance(model: GaussianModel, conditioning, targets):
    """Var(E[X_b | X_S]) for each target b.

    Computed as the squared length of the projection of the target's factor
    row onto the row space of the conditioning rows; dropping singular
    values below sqrt(PINV_RCOND) of the largest matches a relative
    pseudoinverse cutoff of PINV_RCOND on Sigma_SS and keeps nested sets
    nested in floating point.
    """
    s = model.indices(conditioning)
    b = model.indices(targets)
    f = _factor(model)
    _, sv, vt = np.linalg.svd(f[s], full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.zeros(len(b))
    basis = vt[sv > np.sqrt(PINV_RCOND) * sv[0]]
    return np.sum((f[b] @ basis.T) ** 2, axis=1)


def markov_discrepancy(model: GaussianModel, region, boundary, targets, tolerance=1e-10):
    """Per-target squared distance between predictors from ``region`` and from ``boundary``."""
    region = list(region)
    boundary = list(boundary)
    targets = list(targets)
    if not set(boundary) <= set(region):
        raise ConfigurationError("boundary must be a subset of the region", "boundary")
    interior = set(region) - set(boundary)
    if interior & set(targets):
        raise ConfigurationError("targets must avoid the region interior", "targets")
    if not targets:
        raise ConfigurationError("no targets", "targets")
    delta = explained_variance(model, region, targets) - explained_variance(model, boundary, targets)
    worst = float(delta.max())
    return MarkovReport(tuple(targets), delta, worst, "holds" if worst <= tolerance else "fails", float(tolerance))


def node_boundary(adjacency, region, sites=None):
    """Nodes of ``region`` adjacent to at least one node outside it."""
    adj = np.asarray(adjacency)
    sites = list(range(len(adj))) if sites is None else list(sites)
    index = {s: i for i, s in enumerate(sites)}
    inside = np.zeros(len(sites), dtype=bool)
    inside[[index[s] for s in region]] = True
    touches = (adj[:, ~inside] > 0).any(axis=1)
    return [s for s in region if touches[index[s]]]


def write_markov_csv(report: MarkovReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "delta_sq"])
        for t, d in zip(report.targets, report.per_target_delta_sq):
            w.writerow([t, repr(float(d))])
