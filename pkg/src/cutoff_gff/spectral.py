"""Periodic model geometries, their Laplacian eigenbases and spectral cutoffs.

Every geometry here is a product of uniformly sampled periodic axes: the
circle, flat tori, periodic boxes standing in for R^d, and cylinders
(a periodic time axis times a circular slice).  The Laplacian eigenbasis of a
product is the tensor product of real 1D Fourier modes, so analysis and
synthesis are done one axis at a time and the dense mode matrix is only built
on request.

Reflection negates the coordinate along ``reflection_axis``; with an even
number of nodes per axis it permutes grid nodes and fixes the two hyperplanes
``x = 0`` and ``x = L/2`` (the seam).
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from .errors import (
    ConfigurationError,
    GeometryMismatchError,
    UnsupportedGeometryError,
)

__all__ = [
    "MASS",
    "Geometry",
    "SpectralBasis",
    "CutoffSpec",
    "CovarianceKernel",
    "Field",
    "RegionPartition",
    "build_basis",
    "gff_kernel",
    "exact_gff_kernel",
    "zero_kernel",
    "apply_cutoff",
    "reflect",
    "covariance_pairing",
    "sample_gff",
    "gff_coefficient_samples",
    "region_partition",
    "side_weights",
    "smooth_step",
    "bump_profile",
    "bump_field",
    "plateau_field",
    "periodic_offsets",
]

# Mass of the free field; the covariance is (Delta + MASS**2)^-1.
MASS = 1.0

_KINDS = ("circle", "torus", "periodic_grid", "cylinder")
_SHARP_RTOL = 1e-12


@dataclass(frozen=True)
class Geometry:
    """A product of periodic axes with a reflection through one coordinate.

    Use the named constructors (:meth:`circle`, :meth:`torus`,
    :meth:`periodic_grid`, :meth:`cylinder`) rather than the raw fields.
    """

    kind: str
    points: tuple
    extents: tuple
    reflection_axis: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown geometry kind {self.kind!r}", "geometry.kind")
        points = tuple(int(p) for p in self.points)
        extents = tuple(float(e) for e in self.extents)
        if len(points) != len(extents) or not points:
            raise ConfigurationError("points and extents must have the same nonzero length", "geometry.points")
        if len(points) > 3:
            raise UnsupportedGeometryError(f"dimension {len(points)} > 3 is not supported", "geometry.points")
        for i, p in enumerate(points):
            if p <= 0 or p % 2:
                raise ConfigurationError(f"point count {p} must be a positive even integer", f"geometry.points[{i}]")
        for i, e in enumerate(extents):
            if not np.isfinite(e) or e <= 0:
                raise ConfigurationError(f"extent {e} must be positive", f"geometry.extent[{i}]")
        if not 0 <= self.reflection_axis < len(points):
            raise ConfigurationError("reflection axis out of range", "geometry.reflection_axis")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "extents", extents)

    @classmethod
    def circle(cls, n_points):
        return cls("circle", (n_points,), (2 * np.pi,))

    @classmethod
    def torus(cls, dims, reflection_axis=0):
        dims = tuple(dims)
        return cls("torus", dims, (2 * np.pi,) * len(dims), reflection_axis)

    @classmethod
    def periodic_grid(cls, dim, extent, points, reflection_axis=0):
        extent = np.broadcast_to(np.asarray(extent, dtype=float), (dim,))
        points = np.broadcast_to(np.asarray(points, dtype=int), (dim,))
        return cls("periodic_grid", tuple(points), tuple(extent), reflection_axis)

    @classmethod
    def cylinder(cls, time_points, time_extent=4 * np.pi, slice_points=32):
        """Periodic time axis (axis 0, reflected) times a circular slice."""
        return cls("cylinder", (time_points, slice_points), (time_extent, 2 * np.pi), 0)

    @property
    def dim(self):
        return len(self.points)

    @property
    def shape(self):
        return self.points

    @property
    def n_nodes(self):
        return int(np.prod(self.points))

    @property
    def spacing(self):
        return tuple(e / p for e, p in zip(self.extents, self.points))

    @property
    def cell_volume(self):
        """Uniform quadrature weight of a node."""
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return float(np.prod(self.extents))

    def axis_coordinates(self, axis):
        """Signed node coordinates in [-L/2, L/2) along ``axis``."""
        n, length = self.points[axis], self.extents[axis]
        j = np.arange(n)
        return np.where(j < n // 2, j, j - n) * (length / n)

    def coordinates(self):
        """Grid-shaped coordinate arrays, one per axis (``indexing='ij'``)."""
        return np.meshgrid(*(self.axis_coordinates(a) for a in range(self.dim)), indexing="ij")

    def reflect_values(self, values):
        """Apply the node permutation j -> -j (mod n) along the reflection axis."""
        a = self.reflection_axis
        return np.roll(np.flip(values, axis=a), 1, axis=a)

    def reflection_permutation(self):
        """Flat node permutation ``p`` with ``reflected.ravel() == values.ravel()[p]``."""
        idx = np.arange(self.n_nodes).reshape(self.shape)
        return self.reflect_values(idx).ravel()

    def to_dict(self):
        return {
            "kind": self.kind,
            "points": list(self.points),
            "extent": list(self.extents),
            "reflection_axis": self.reflection_axis,
        }


def _axis_table(n, length):
    """Real orthonormal Fourier modes of one periodic axis.

    Returns (table, wavenumber, is_sine) with ``table[i, j]`` the value of
    mode i at node j.  Ordering: constant, then (cos k, sin k) for
    1 <= k < n/2, then the Nyquist cosine.
    """
    x = np.arange(n) * (length / n)
    omega = 2 * np.pi / length
    rows = [np.full(n, 1 / np.sqrt(length))]
    k = [0]
    sine = [False]
    for kk in range(1, n // 2):
        rows.append(np.cos(kk * omega * x) * np.sqrt(2 / length))
        rows.append(np.sin(kk * omega * x) * np.sqrt(2 / length))
        k += [kk, kk]
        sine += [False, True]
    # cos(pi j) is exactly +-1 on nodes; avoid rounding in cos(n/2 * omega * x)
    rows.append(np.where(np.arange(n) % 2 == 0, 1.0, -1.0) / np.sqrt(length))
    k.append(n // 2)
    sine.append(False)
    return np.array(rows), np.array(k), np.array(sine)


class SpectralBasis:
    """Parity-resolved Laplacian eigenbasis of a :class:`Geometry`.

    Modes are sorted by eigenvalue; ties list reflection-even modes before
    odd ones and then follow construction (row-major multi-index) order.

    Attributes
    ----------
    eigenvalues : ndarray (n_modes,)
    parity : ndarray of {+1, -1}
    wavenumbers : ndarray (n_modes, dim)
        Integer wavenumber of each mode along every axis.
    sine : ndarray of bool (n_modes, dim)
        Whether the axis factor is a sine.
    """

    def __init__(self, geometry: Geometry):
        self.geometry = geometry
        tables, ks, sines, evs = [], [], [], []
        for n, length in zip(geometry.points, geometry.extents):
            table, k, s = _axis_table(n, length)
            tables.append(table)
            ks.append(k)
            sines.append(s)
            evs.append((k * (2 * np.pi / length)) ** 2)
        self._tables = tables
        self._weights = geometry.spacing

        grids = np.meshgrid(*[np.arange(n) for n in geometry.points], indexing="ij")
        multi = [g.ravel() for g in grids]
        eig = sum(evs[a][multi[a]] for a in range(geometry.dim))
        odd = sines[geometry.reflection_axis][multi[geometry.reflection_axis]]
        flat = np.arange(geometry.n_nodes)
        order = np.lexsort((flat, odd, np.round(eig, 9)))

        self.order = order
        self._multi = np.stack([m[order] for m in multi], axis=1)
        self.eigenvalues = eig[order]
        self.parity = np.where(odd[order], -1, 1)
        self.wavenumbers = np.stack([ks[a][self._multi[:, a]] for a in range(geometry.dim)], axis=1)
        self.sine = np.stack([sines[a][self._multi[:, a]] for a in range(geometry.dim)], axis=1)
        for arr in (self.order, self._multi, self.eigenvalues, self.parity, self.wavenumbers, self.sine):
            arr.setflags(write=False)

    def __repr__(self):
        return f"SpectralBasis({self.geometry!r})"

    @property
    def n_modes(self):
        return len(self.eigenvalues)

    @property
    def weight(self):
        return self.geometry.cell_volume

    def analyze(self, values):
        """Grid values -> spectral coefficients (quadrature inner products)."""
        c = np.asarray(values, dtype=float).reshape(self.geometry.shape)
        for a, (table, w) in enumerate(zip(self._tables, self._weights)):
            c = np.moveaxis(np.tensordot(table * w, c, axes=([1], [a])), 0, a)
        return c.ravel()[self.order]

    def synthesize(self, coeffs):
        """Spectral coefficients -> grid values."""
        flat = np.empty(self.geometry.n_nodes)
        flat[self.order] = coeffs
        c = flat.reshape(self.geometry.shape)
        for a, table in enumerate(self._tables):
            c = np.moveaxis(np.tensordot(table.T, c, axes=([1], [a])), 0, a)
        return c

    def mode_values(self, indices):
        """Values of the selected (sorted) modes at all nodes, shape (m, n_nodes)."""
        indices = np.atleast_1d(np.asarray(indices, dtype=int))
        shape = self.geometry.shape
        out = np.ones((len(indices),) + shape)
        for a, table in enumerate(self._tables):
            factor_shape = [len(indices)] + [1] * len(shape)
            factor_shape[a + 1] = shape[a]
            out = out * table[self._multi[indices, a]].reshape(factor_shape)
        return out.reshape(len(indices), -1)

    @cached_property
    def modes(self):
        """Dense (n_modes, n_nodes) mode matrix; only sensible for small grids."""
        m = self.mode_values(np.arange(self.n_modes))
        m.setflags(write=False)
        return m

    def axis_frequency(self, axis):
        """Angular frequency k * 2 pi / L of every mode along ``axis``."""
        return self.wavenumbers[:, axis] * (2 * np.pi / self.geometry.extents[axis])

    def gradient_at_origin(self, axis):
        """d/dx_axis of every mode evaluated at the origin node."""
        out = np.ones(self.n_modes)
        for a, table in enumerate(self._tables):
            if a == axis:
                length = self.geometry.extents[a]
                amp = np.where(self.wavenumbers[:, a] == 0, 1 / np.sqrt(length), np.sqrt(2 / length))
                out *= np.where(self.sine[:, a], self.axis_frequency(a) * amp, 0.0)
            else:
                out *= table[self._multi[:, a], 0]
        return out


def build_basis(geometry: Geometry) -> SpectralBasis:
    return SpectralBasis(geometry)


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1 / np.where(t > 0, t, 1)), 0.0)
        b = np.where(t < 1, np.exp(-1 / np.where(t < 1, 1 - t, 1)), 0.0)
    return a / (a + b)


def bump_profile(t):
    """exp(-1/(1-t^2)) on |t| < 1, zero elsewhere."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1
    safe = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(-1 / (1 - safe**2)), 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    """Spectral cutoff at frequency ``lam`` (eigenvalue ``lam**2``).

    ``sharp`` is the indicator of lambda <= lam^2.  ``smooth`` evaluates the
    plateau profile psi(sqrt(lambda)/lam), equal to 1 on |x| <= 1 - width and
    0 on |x| >= 1.
    """

    lam: float
    kind: str = "sharp"
    width: float = 0.25
    profile_id: str = "bump"

    def __post_init__(self):
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ConfigurationError(f"cutoff lambda must be positive, got {self.lam}", "cutoff.lambda")
        if self.kind not in ("sharp", "smooth"):
            raise ConfigurationError(f"unknown cutoff kind {self.kind!r}", "cutoff.kind")
        if not 0 < self.width <= 1:
            raise ConfigurationError("smooth width must lie in (0, 1]", "cutoff.width")
        if self.profile_id != "bump":
            raise ConfigurationError(f"unknown profile {self.profile_id!r}", "cutoff.profile_id")

    def profile(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        return smooth_step((1 - x) / self.width)

    def multiplier(self, eigenvalues):
        ev = np.asarray(eigenvalues, dtype=float)
        if self.kind == "sharp":
            limit = self.lam**2 * (1 + _SHARP_RTOL)
            return (ev <= limit).astype(float)
        return self.profile(np.sqrt(np.maximum(ev, 0.0)) / self.lam)

    def to_dict(self):
        return {"lambda": self.lam, "kind": self.kind, "width": self.width}


@dataclass(frozen=True, eq=False)
class CovarianceKernel:
    """Diagonal spectral multiplier representing a covariance operator."""

    basis: SpectralBasis
    multiplier: np.ndarray
    cutoff: CutoffSpec | None = None
    mass: float = MASS
    kind: str = "galerkin"

    def __post_init__(self):
        m = np.asarray(self.multiplier, dtype=float)
        if m.shape != (self.basis.n_modes,):
            raise ConfigurationError("multiplier must have one entry per mode")
        if np.any(m < 0):
            raise ConfigurationError("multipliers must be nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "multiplier", m)

    @property
    def geometry(self):
        return self.basis.geometry

    @cached_property
    def active(self):
        """Indices of modes with a nonzero multiplier."""
        return np.flatnonzero(self.multiplier > 0)


def gff_kernel(basis, cutoff=None):
    """Spectral covariance 1/(lambda+1), optionally cut off.

    Sharp cutoff gives chi(lambda <= Lambda^2)/(lambda+1), smooth gives
    psi(sqrt(lambda)/Lambda)^2/(lambda+1).  With ``cutoff=None`` every grid
    mode up to the Nyquist frequency keeps weight 1/(lambda+1); note that this
    is itself a sharp cutoff at the grid resolution.
    """
    base = 1.0 / (basis.eigenvalues + MASS**2)
    if cutoff is None:
        return CovarianceKernel(basis, base)
    m = cutoff.multiplier(basis.eigenvalues)
    if cutoff.kind == "smooth":
        m = m**2
    return CovarianceKernel(basis, m * base, cutoff)


def zero_kernel(basis):
    return CovarianceKernel(basis, np.zeros(basis.n_modes), kind="zero")


def _periodized_inverse(k, n, omega, b2):
    """sum over m of 1/((k + m n)^2 omega^2 + b2), closed form."""
    beta = np.sqrt(b2) / omega
    a = 2 * np.pi * beta / n
    e = np.exp(-a)
    return (np.pi / (n * beta)) * (1 - e * e) / (1 + e * e - 2 * e * np.cos(2 * np.pi * k / n)) / omega**2


def exact_gff_kernel(basis):
    """Uncut GFF covariance seen by grid functions.

    Along the reflection axis a grid function is read as the sum of point
    masses ``w f_j delta(x - x_j)``; transverse axes keep their modal
    (Galerkin) description.  The continuum covariance of such test functions
    is diagonal in the grid basis with the aliased multiplier

        sum_m 1 / ((tau + m * 2 pi / dx)^2 + lambda_perp + 1),

    so the reflected form is exactly positive on plus-supported grid
    functions.  The leading term of each sum is the spectral 1/(lambda+1).
    """
    g = basis.geometry
    a = g.reflection_axis
    omega = 2 * np.pi / g.extents[a]
    k = basis.wavenumbers[:, a]
    tau2 = (k * omega) ** 2
    b2 = basis.eigenvalues - tau2 + MASS**2
    m = _periodized_inverse(k, g.points[a], omega, b2)
    return CovarianceKernel(basis, m, kind="exact")


@dataclass(frozen=True, eq=False)
class Field:
    """Real field stored as grid values together with its spectral coefficients."""

    basis: SpectralBasis
    values: np.ndarray
    coeffs: np.ndarray

    @classmethod
    def from_values(cls, basis, values):
        values = np.array(values, dtype=float).reshape(basis.geometry.shape)
        coeffs = basis.analyze(values)
        values.setflags(write=False)
        coeffs.setflags(write=False)
        return cls(basis, values, coeffs)

    @classmethod
    def from_coeffs(cls, basis, coeffs):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.shape != (basis.n_modes,):
            raise ConfigurationError("need one coefficient per mode")
        values = basis.synthesize(coeffs)
        values.setflags(write=False)
        coeffs.setflags(write=False)
        return cls(basis, values, coeffs)

    @classmethod
    def from_function(cls, basis, func):
        """Sample ``func(*coords)`` on the signed node coordinates."""
        return cls.from_values(basis, func(*basis.geometry.coordinates()))

    @classmethod
    def mode(cls, basis, index):
        c = np.zeros(basis.n_modes)
        c[index] = 1.0
        return cls.from_coeffs(basis, c)

    @classmethod
    def zeros(cls, basis):
        return cls.from_coeffs(basis, np.zeros(basis.n_modes))

    @property
    def geometry(self):
        return self.basis.geometry

    def norm(self):
        """Quadrature L2 norm."""
        return float(np.sqrt(np.sum(self.values**2) * self.basis.weight))

    def _check(self, other):
        if other.geometry != self.geometry:
            raise GeometryMismatchError("fields live on different geometries")

    def __add__(self, other):
        self._check(other)
        return Field(self.basis, self.values + other.values, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Field(self.basis, -self.values, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field.from_values(self.basis, self.values * other.values)
        s = float(other)
        return Field(self.basis, s * self.values, s * self.coeffs)

    __rmul__ = __mul__


def apply_cutoff(field: Field, cutoff: CutoffSpec) -> Field:
    """Pi_Lambda(field), or psi(sqrt(Delta)/Lambda) field for a smooth cutoff."""
    return Field.from_coeffs(field.basis, field.coeffs * cutoff.multiplier(field.basis.eigenvalues))


def reflect(field: Field) -> Field:
    """Pull back by the reflection; coefficient k picks up parity[k]."""
    values = field.geometry.reflect_values(field.values)
    coeffs = field.coeffs * field.basis.parity
    return Field(field.basis, values, coeffs)


def covariance_pairing(f: Field, h: Field, kernel: CovarianceKernel) -> float:
    """<f, C h> = sum_k m_k f_k h_k."""
    if f.geometry != kernel.geometry or h.geometry != kernel.geometry:
        raise GeometryMismatchError("field and kernel geometries differ")
    return float(np.sum(kernel.multiplier * f.coeffs * h.coeffs))


def _mode_stream(seed, mode_index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, int(mode_index)])))


def gff_coefficient_samples(kernel: CovarianceKernel, seed: int, num_samples: int):
    """Draw ``num_samples`` coefficient vectors of the Gaussian field.

    Each active mode k has its own counter-based stream keyed by
    ``(seed, k)``; sample i is the i-th normal of every stream.

    Returns
    -------
    active : ndarray of int
        Indices of the modes with nonzero variance.
    samples : ndarray (num_samples, len(active))
        Coefficient values c * sqrt(m_k).
    """
    seed = int(seed)
    if seed < 0:
        raise ConfigurationError("seed must be a nonnegative integer", "seed")
    active = kernel.active
    out = np.empty((int(num_samples), len(active)))
    for j, k in enumerate(active):
        out[:, j] = _mode_stream(seed, k).standard_normal(int(num_samples))
    out *= np.sqrt(kernel.multiplier[active])
    return active, out


def sample_gff(kernel: CovarianceKernel, seed: int) -> Field:
    active, samples = gff_coefficient_samples(kernel, seed, 1)
    coeffs = np.zeros(kernel.basis.n_modes)
    coeffs[active] = samples[0]
    return Field.from_coeffs(kernel.basis, coeffs)


@dataclass(frozen=True, eq=False)
class RegionPartition:
    """Disjoint node masks M+, M- and the fixed set Sigma."""

    plus_mask: np.ndarray
    minus_mask: np.ndarray
    interface_mask: np.ndarray
    geometry: Geometry = dc_field(repr=False, default=None)

    def __post_init__(self):
        masks = [np.asarray(m, dtype=bool) for m in (self.plus_mask, self.minus_mask, self.interface_mask)]
        total = masks[0].astype(int) + masks[1] + masks[2]
        if np.any(total != 1):
            raise ConfigurationError("region masks must be disjoint and cover every node")
        if self.geometry is not None:
            refl = self.geometry.reflect_values
            if not (np.array_equal(refl(masks[0]), masks[1]) and np.array_equal(refl(masks[2]), masks[2])):
                raise ConfigurationError("reflection must swap plus/minus and fix the interface")
        for name, m in zip(("plus_mask", "minus_mask", "interface_mask"), masks):
            m.setflags(write=False)
            object.__setattr__(self, name, m)


def region_partition(geometry: Geometry) -> RegionPartition:
    """Split nodes by the sign of the reflected coordinate."""
    a = geometry.reflection_axis
    s = geometry.coordinates()[a]
    half = geometry.extents[a] / 2
    seam = np.isclose(s, -half)
    plus = s > 0
    minus = (s < 0) & ~seam
    interface = (s == 0) | seam
    return RegionPartition(plus, minus, interface, geometry)


def side_weights(partition: RegionPartition, side: str):
    """Quadrature weights of a closed half: 1 on the side, 1/2 on the interface."""
    if side == "full":
        return np.ones(partition.plus_mask.shape)
    if side not in ("plus", "minus"):
        raise ConfigurationError(f"unknown side {side!r}")
    mask = partition.plus_mask if side == "plus" else partition.minus_mask
    return mask.astype(float) + 0.5 * partition.interface_mask


def periodic_offsets(geometry, center):
    """Per-axis signed periodic displacement of every node from ``center``."""
    center = np.broadcast_to(np.asarray(center, dtype=float), (geometry.dim,))
    out = []
    for x, c, length in zip(geometry.coordinates(), center, geometry.extents):
        out.append((x - c + length / 2) % length - length / 2)
    return out


def bump_field(basis, center, radius, axis_scale=None):
    """C-infinity bump exp(-1/(1-r^2)) of the given radius around ``center``.

    ``axis_scale`` optionally stretches the radius per axis.
    """
    g = basis.geometry
    scale = np.ones(g.dim) if axis_scale is None else np.broadcast_to(axis_scale, (g.dim,))
    r2 = sum((d / (radius * s)) ** 2 for d, s in zip(periodic_offsets(g, center), scale))
    return Field.from_values(basis, bump_profile(np.sqrt(r2)))


def plateau_field(basis, core_radius, support_radius, center=0.0):
    """Smooth cutoff function: 1 within ``core_radius``, 0 beyond ``support_radius``."""
    if not 0 <= core_radius < support_radius:
        raise ConfigurationError("need 0 <= core_radius < support_radius", "rho")
    g = basis.geometry
    r = np.sqrt(sum(d**2 for d in periodic_offsets(g, center)))
    return Field.from_values(basis, smooth_step((support_radius - r) / (support_radius - core_radius)))
