r"""
Curvature of the range of a column
==================================

The column ``F(z) = (z, 1/2)`` spans a line that turns as ``z`` moves.
This script samples the orthogonal projection onto that line, measures
how fast it turns (``||dPi||``), and builds a bounded subharmonic function
whose Laplacian dominates ``||dPi||^2``.
"""

import numpy as np

from opcorona import (
    AnalyticMatrixField,
    DiskGrid,
    green_potential,
    opnorm,
    pdp_identity_report,
    range_projection,
    subharmonic_witness,
)

grid = DiskGrid(64, 256)
F = AnalyticMatrixField([[[0.0], [0.5]], [[1.0], [0.0]]])
P = range_projection(F, grid)

speed = opnorm(P.dPi)
print(f"max ||dPi|| over the grid: {speed.max():.6f}  (2 at the origin)")
print(f"||dPi|| on the outermost ring: {speed[-1].mean():.6f}")

# The range moves holomorphically, so Pi dPi = 0 and friends hold to roundoff.
for name, value in pdp_identity_report(P).items():
    print(f"  {name:32s} {value:.2e}")

# log det F*F = log(|z|^2 + 1/4) is subharmonic with Laplacian ||dPi||^2.
W = subharmonic_witness(F, P, "logdet")
print(f"witness sup norm K = {W.K:.6f}  (ln 5 = {np.log(5):.6f})")
print(f"smallest defect Lap(phi) - ||dPi||^2 = {W.min_defect:.2e}")

# The same bound appears as a Green potential of the density ||dPi||^2.
G0 = green_potential(speed**2, 0.0, grid)
print(f"Green potential at the origin: {G0:.6f}")
