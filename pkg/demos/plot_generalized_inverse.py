r"""
Generalized inverse of a rank-one field
=======================================

``F(z) = [[1, z], [0, 0]]`` has a one-dimensional kernel that moves with
``z``.  Starting from one generalized inverse ``G`` (``F G F = F``) we read
off analytic projections onto the range and the kernel, then rebuild ``G``
from those projections alone.
"""

import numpy as np

from opcorona import (
    AnalyticMatrixField,
    DiskGrid,
    generalized_inverse_from_projections,
    projections_from_generalized_inverse,
)

grid = DiskGrid(64, 256)
F = AnalyticMatrixField([[[1, 0], [0, 0]], [[0, 1], [0, 0]]])
G = AnalyticMatrixField.constant([[1.0, 0.0], [0.0, 0.0]])

pair = projections_from_generalized_inverse(F, G, grid)
print("range projection P_R coefficients:", np.round(pair.P_R.coefficients.real, 12).tolist())
print("kernel projection P_K coefficients:", np.round(pair.P_K.coefficients.real, 12).tolist())
print("ranks (range, kernel):", pair.ranks)

rep = generalized_inverse_from_projections(F, pair.P_R, pair.P_K, grid)
print(f"rebuilt G at z = 0: {np.round(rep.G.values[0, 0].real, 12).tolist()}")
print(f"||FGF - F|| = {rep.details['FGF_minus_F']:.1e}, ||GFG - G|| = {rep.details['GFG_minus_G']:.1e}")
print(f"||G|| = {rep.norm_G:.4f} <= bound {rep.bound:.4f}")
