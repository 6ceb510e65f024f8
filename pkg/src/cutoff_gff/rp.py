"""Reflected Gram matrices and their minimal-eigenvalue certificates.

For a Gaussian field, reflection positivity reduces to the covariance: the
form Q[i, j] = <Theta f_i, C f_j> must be positive semidefinite for every
family of plus-supported test functions.  A negative eigenvalue of Q for one
finite family refutes RP; a nonnegative spectrum is only evidence for it.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GeometryMismatchError, SupportError
from .spectral import CovarianceKernel, Field, SpectralBasis, bump_field, region_partition

__all__ = [
    "RPReport",
    "GramMatrix",
    "assemble_rp_gram",
    "certify_rp",
    "default_test_family",
    "combine_tests",
    "write_gram_csv",
]

SUPPORT_TOL = 1e-12
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class RPReport:
    min_eigenvalue: float
    witness_coeffs: np.ndarray
    verdict: str
    gram_dim: int
    symmetry_defect: float
    tolerance: float

    def to_dict(self):
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "witness_coeffs": np.asarray(self.witness_coeffs).tolist(),
            "verdict": self.verdict,
            "gram_dim": self.gram_dim,
            "symmetry_defect": self.symmetry_defect,
            "tolerance": self.tolerance,
        }


class GramMatrix(np.ndarray):
    """Symmetrized reflected Gram matrix; ``symmetry_defect`` is the max |Q - Q^T| before averaging."""

    symmetry_defect: float = 0.0

    def __array_finalize__(self, obj):
        self.symmetry_defect = getattr(obj, "symmetry_defect", 0.0)


def _check_support(tests, plus_mask, weight):
    for i, f in enumerate(tests):
        outside = np.sqrt(np.sum(f.values[~plus_mask] ** 2) * weight)
        if outside > SUPPORT_TOL * f.norm():
            raise SupportError(f"quadrature mass {outside:.3e} outside the plus region", index=i)


def assemble_rp_gram(kernel: CovarianceKernel, tests):
    """Q[i, j] = <Theta tests[i], C tests[j]>, symmetrized.

    Diagonal in the eigenbasis, Q = A diag(parity * multiplier) A^T with A
    the matrix of test coefficients.
    """
    tests = list(tests)
    if not tests:
        raise ConfigurationError("need at least one test function", "tests")
    basis = kernel.basis
    for i, f in enumerate(tests):
        if f.geometry != basis.geometry:
            raise GeometryMismatchError(f"test {i} lives on a different geometry")
    plus = region_partition(basis.geometry).plus_mask
    _check_support(tests, plus, basis.weight)
    a = np.array([f.coeffs for f in tests])
    q = (a * (basis.parity * kernel.multiplier)) @ a.T
    defect = float(np.abs(q - q.T).max())
    out = (0.5 * (q + q.T)).view(GramMatrix)
    out.symmetry_defect = defect
    return out


def certify_rp(q, tolerance=None):
    """Minimal-eigenvalue verdict for a symmetric reflected Gram matrix.

    The default tolerance is 1e-9 times the spectral norm of Q.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ConfigurationError("Gram matrix must be square", "Q")
    defect = float(np.abs(q - q.T).max()) if q.size else 0.0
    if defect > SYMMETRY_TOL * max(1.0, float(np.abs(q).max())):
        raise ConfigurationError(f"Gram matrix is not symmetric (defect {defect:.3e})", "Q")
    evals, evecs = np.linalg.eigh(0.5 * (q + q.T))
    if tolerance is None:
        tolerance = 1e-9 * float(np.abs(evals).max())
    lo = float(evals[0])
    return RPReport(
        min_eigenvalue=lo,
        witness_coeffs=evecs[:, 0],
        verdict="rp_fails" if lo < -tolerance else "rp_holds",
        gram_dim=q.shape[0],
        symmetry_defect=defect,
        tolerance=float(tolerance),
    )


def default_test_family(basis: SpectralBasis, widths=(2.0, 4.0), extra=()):
    """Bumps at every plus-side node, cut to the plus region, at each width.

    Widths are in grid spacings along each axis.  ``extra`` fields (for
    instance witness outputs) are appended unchanged.
    """
    g = basis.geometry
    plus = region_partition(g).plus_mask
    coords = g.coordinates()
    tests = []
    for width in widths:
        for idx in zip(*np.nonzero(plus)):
            center = [c[idx] for c in coords]
            bump = bump_field(basis, center, width, axis_scale=g.spacing)
            tests.append(Field.from_values(basis, bump.values * plus))
    return tests + list(extra)


def combine_tests(tests, coeffs):
    """The field sum_i coeffs[i] tests[i]."""
    out = Field.zeros(tests[0].basis)
    for c, f in zip(coeffs, tests):
        out = out + f * float(c)
    return out


def write_gram_csv(q, path):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(np.asarray(q).tolist())
