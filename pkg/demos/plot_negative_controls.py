r"""
What failure looks like
=======================

Two inputs that the checks must reject.

``F(z) = diag(1, z)`` loses rank at the origin only, so the smallest
nonzero singular value keeps shrinking as the grid gets finer.  A family of
projectors rotating with ``|z|^2`` is not the range of any analytic field,
and the holomorphic-bundle identities fail by a wide margin.
"""

import numpy as np

from opcorona import (
    AnalyticMatrixField,
    DiskGrid,
    ProjectionField,
    c1_refinement,
    pdp_identity_report,
)

F = AnalyticMatrixField([[[1, 0], [0, 0]], [[0, 0], [0, 1]]])
grids = [DiskGrid(64, 256), DiskGrid(96, 384), DiskGrid(144, 576)]
ref = c1_refinement(F, grids)
print("smallest nonzero singular value per grid:", [f"{v:.2e}" for v in ref["values"]])
print("accepted:", ref["passed"], "-", ref["note"])


def rotating(z):
    t = np.abs(z) ** 2
    c, s = np.cos(t), np.sin(t)
    out = np.empty(np.shape(z) + (2, 2), dtype=complex)
    out[..., 0, 0], out[..., 0, 1] = c * c, c * s
    out[..., 1, 0], out[..., 1, 1] = c * s, s * s
    return out


grid = grids[0]
P = ProjectionField.from_samples(grid, rotating(grid.points), rotating(grid.boundary_nodes))
rep = pdp_identity_report(P)
print(f"||Pi dPi|| for the rotating family: {rep['Pi_dPi']:.3f}")
