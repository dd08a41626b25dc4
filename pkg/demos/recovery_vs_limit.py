"""Upper-bound oracle: recovery energy versus the sharp limit.

Builds the explicit near-optimal pair for a unit segment at several eps
and prints the shrinking excess over f(1) * length, plus the divergence
residual of the assembled flux against the mollified sources.
"""

import numpy as np

from branchflow import (CostParams, GridSpec, PolyhedralMeasure, Segment,
                        SourceSpec, build_polyhedral_recovery, limit_energy)
from branchflow.fields import divergence_residual, energy

params = CostParams(d=1, p=2.0, a=1.0)
segment = Segment(start=np.array([0.5, 0.5]), end=np.array([1.5, 0.5]),
                  multiplicity=1.0)
plan = PolyhedralMeasure(segments=[segment])
limit = limit_energy(plan, params)

print(f"sharp limit f(1) * L = {limit:.6f}\n")
print("eps      energy     gap      div residual")
for eps, cells in ((0.1, (256, 128)), (0.05, (512, 256)),
                   (0.025, (1024, 512))):
    # refine the grid with eps so the tube stays resolved
    grid = GridSpec(extent=(2.0, 1.0), cells=cells)
    sources = SourceSpec(points=np.array([segment.start, segment.end]),
                         weights=np.array([1.0, -1.0]), eps=eps)
    rec = build_polyhedral_recovery(plan, sources, eps, 1e-2, params, grid)
    eb = energy(rec.sigma, rec.u, eps, params.a, params.p)
    res = divergence_residual(rec.sigma, sources)
    print(f"{eps:<8.3f} {eb.total:<10.4f} {eb.total - limit:<8.4f} {res:.4f}")

print("\nthe gap is the finite-eps overhead of the construction; it")
print("decreases toward zero as eps -> 0 on grids that resolve the tube.")
