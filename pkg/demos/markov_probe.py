"""
Does conditioning on the boundary suffice?
==========================================

Compare the best predictor of the lower semicircle given the closed upper
half with the predictor given only its two boundary nodes.
"""
import numpy as np

from cutoff_gff import CutoffSpec, Geometry, build_basis, gff_kernel, region_partition
from cutoff_gff.markov import (
    build_discrete_gff, grid_adjacency, kernel_gaussian_model, markov_discrepancy,
    node_boundary, path_adjacency,
)

# Nearest-neighbour graph GFF: a Markov field, so the gap is zero.
adj = path_adjacency(16)
region = list(range(8))
r = markov_discrepancy(build_discrete_gff(adj), region, node_boundary(adj, region), range(8, 16))
print(f"path graph: max delta^2 = {r.max_delta_sq:.2e} ({r.markov_verdict})")

g = Geometry.circle(64)
part = region_partition(g)
closed = list(np.flatnonzero(part.plus_mask | part.interface_mask))
boundary = node_boundary(grid_adjacency(g), closed)
targets = list(np.flatnonzero(part.minus_mask))

# A band-limited field is analytic, so the whole upper half carries
# information the boundary values alone do not.
for lam in (3, 5, 7):
    model = kernel_gaussian_model(gff_kernel(build_basis(g), CutoffSpec(lam)))
    r = markov_discrepancy(model, closed, boundary, targets)
    print(f"circle(64), lam={lam}: max delta^2 = {r.max_delta_sq:.3f} ({r.markov_verdict})")
