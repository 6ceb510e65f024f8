"""
Breaking reflection positivity with a sharp spectral cutoff
===========================================================

On the circle, keep only Laplacian modes with eigenvalue <= lam^2 and
build a test function living on the upper semicircle whose reflected
covariance pairing is negative.
"""
import numpy as np

from cutoff_gff import (
    CutoffSpec, Geometry, build_basis, build_compact_witness, covariance_pairing,
    exact_gff_kernel, gff_kernel, reflect, region_partition,
)

g = Geometry.circle(64)
basis = build_basis(g)
part = region_partition(g)

# The witness matches the top odd mode below the cutoff and nothing else,
# so its pairing is exactly -1/(lambda* + 1).
for lam in (1, 3, 5, 7):
    f, cert = build_compact_witness(basis, lam, part)
    print(f"lam={lam}: lambda*={cert.parameters['lambda_star']:.0f} value={cert.value:+.6f}")

# Support check: f vanishes on the lower semicircle.
f, cert = build_compact_witness(basis, 5, part)
print("max |f| on the minus side:", np.abs(f.values[part.minus_mask]).max())

# Same f, full covariance: the pairing turns positive again.
cut = covariance_pairing(reflect(f), f, gff_kernel(basis, CutoffSpec(5)))
full = covariance_pairing(reflect(f), f, exact_gff_kernel(basis))
print(f"cut-off pairing {cut:+.6f}, uncut pairing {full:+.6f}")
