"""Orthogonal projection fields onto Ran F(z) and ker F(z).

Closed forms used throughout (``P`` is the orthogonal projection onto
``ker F``, obtained from a pointwise SVD)::

    Pi   = F (F*F + P)^{-1} F*
    dPi  = (I - Pi) F' (F*F + P)^{-1} F*
    Pi_K = I - F* (F F* + I - Pi)^{-1} F

``dbar Pi = (d Pi)^*`` since ``Pi`` is Hermitian.  The kernel bundle is the
conjugate of the range bundle of ``F^T``, so ``d Pi_K = -(d Pi_{F^T})^T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .disk import (
    DiskGrid,
    SampledField,
    carleson_constant,
    green_potential_sup,
    wirtinger,
)
from .field import (
    AnalyticMatrixField,
    FieldError,
    RANK_RTOL,
    adjoint,
    numerical_rank,
    opnorm,
)

EPS_ALG = 1e-10
DBAR_CROSSCHECK_TOL = 1e-5
PDP_TOL = 1e-6


class RankVariationError(FieldError):
    """Numerical rank of F(z) is not constant over the grid."""


def _kernel_projector(Fv, rank):
    _, _, Vh = np.linalg.svd(Fv)
    V = adjoint(Vh)[..., rank:]
    return V @ adjoint(V)


def _constant_rank(F, grid, rtol=RANK_RTOL):
    ranks = np.concatenate([
        numerical_rank(F.eval(grid.points), rtol).ravel(),
        numerical_rank(F.eval(grid.boundary_nodes), rtol).ravel(),
    ])
    r = int(ranks.min())
    if not np.all(ranks == r):
        raise RankVariationError(
            f"rank of F(z) varies between {r} and {int(ranks.max())} on the grid; "
            "the range family is not a bundle at this resolution"
        )
    return r


def _range_parts(Fv, dFv, rank):
    """Pi and dPi at a batch of points, regularised by the kernel projector when F has a kernel."""
    k = Fv.shape[-1]
    Fs = adjoint(Fv)
    M = Fs @ Fv
    if rank < k:
        M = M + _kernel_projector(Fv, rank)
    Minv = np.linalg.inv(M)
    Pi = Fv @ Minv @ Fs
    Pi = 0.5 * (Pi + adjoint(Pi))
    eye = np.eye(Fv.shape[-2])
    dPi = (eye - Pi) @ dFv @ Minv @ Fs
    return Pi, dPi


@dataclass(frozen=True)
class ProjectionField:
    """Samples of an orthogonal projection field and its ``d``-derivative."""

    grid: DiskGrid
    Pi: np.ndarray
    Pi_boundary: np.ndarray
    dPi: np.ndarray
    source: str = "range"
    field: AnalyticMatrixField | None = None
    dPi_boundary: np.ndarray | None = None

    @property
    def dbarPi(self):
        return adjoint(self.dPi)

    @property
    def size(self):
        return self.Pi.shape[-1]

    @property
    def rank(self):
        return int(np.rint(np.real(np.trace(self.Pi_boundary[0]))))

    def complement(self):
        eye = np.eye(self.size)
        return ProjectionField(
            self.grid, eye - self.Pi, eye - self.Pi_boundary, -self.dPi,
            source="complementary", field=self.field,
            dPi_boundary=None if self.dPi_boundary is None else -self.dPi_boundary,
        )

    def dPi_norm(self):
        return opnorm(self.dPi)

    @classmethod
    def from_samples(cls, grid, Pi, Pi_boundary, source="sampled"):
        """Wrap raw projection samples; ``d Pi`` is taken numerically."""
        d, _ = wirtinger(np.asarray(Pi, dtype=complex), grid)
        return cls(grid, np.asarray(Pi), np.asarray(Pi_boundary), d.values, source=source)


def range_projection(F: AnalyticMatrixField, grid: DiskGrid, rtol=RANK_RTOL):
    """Orthogonal projection onto ``Ran F(z)`` with its closed-form ``d``."""
    rank = _constant_rank(F, grid, rtol)
    if rank == 0:
        raise FieldError("F vanishes identically; its range bundle is trivial")
    dF = F.derivative()
    Pi, dPi = _range_parts(F.eval(grid.points), dF.eval(grid.points), rank)
    Pib, dPib = _range_parts(F.eval(grid.boundary_nodes), dF.eval(grid.boundary_nodes), rank)
    return ProjectionField(grid, Pi, Pib, dPi, "range", F, dPib)


def kernel_projection(F: AnalyticMatrixField, grid: DiskGrid, rtol=RANK_RTOL, range_field=None):
    """Orthogonal projection onto ``ker F(z)``.

    Built as ``I - F*(FF* + I - Pi_R)^{-1} F``; the derivative comes from
    the range bundle of ``F^T``.
    """
    rank = _constant_rank(F, grid, rtol)
    k = F.cols
    if range_field is None:
        range_field = range_projection(F, grid, rtol)
    FT = F.transpose()
    dFT = FT.derivative()

    def build(points, PiR):
        Fv = F.eval(points)
        Fs = adjoint(Fv)
        M = Fv @ Fs + (np.eye(F.rows) - PiR)
        PiK = np.eye(k) - Fs @ np.linalg.solve(M, Fv)
        PiK = 0.5 * (PiK + adjoint(PiK))
        if rank == k:
            dPiK = np.zeros(points.shape + (k, k), dtype=complex)
        else:
            _, dT = _range_parts(FT.eval(points), dFT.eval(points), rank)
            dPiK = -np.swapaxes(dT, -1, -2)
        return PiK, dPiK

    PiK, dPiK = build(grid.points, range_field.Pi)
    PiKb, dPiKb = build(grid.boundary_nodes, range_field.Pi_boundary)
    return ProjectionField(grid, PiK, PiKb, dPiK, "kernel", F, dPiKb)


@dataclass
class ProjectionCheck:
    idempotency: float
    hermitian: float
    range_residual: float
    rank: int
    rank_matches: bool

    def passed(self, tol=EPS_ALG):
        return (self.idempotency <= tol and self.hermitian <= tol
                and self.range_residual <= tol and self.rank_matches)


def verify_projection(P: ProjectionField, F: AnalyticMatrixField | None = None):
    """Residuals of ``Pi^2 = Pi``, ``Pi = Pi^*`` and the range/kernel relation."""
    F = F if F is not None else P.field
    both = np.concatenate([P.Pi.reshape(-1, P.size, P.size), P.Pi_boundary], axis=0)
    idem = float(opnorm(both @ both - both).max())
    herm = float(opnorm(both - adjoint(both)).max())
    ranks = numerical_rank(both, 1e-8)
    rank = int(ranks.min())
    rng = 0.0
    matches = bool(np.all(ranks == rank))
    if F is not None:
        pts = np.concatenate([P.grid.points.ravel(), P.grid.boundary_nodes])
        Fv = F.eval(pts)
        fr = numerical_rank(Fv)
        if P.source == "kernel":
            rng = float(opnorm(Fv @ both).max())
            matches = matches and bool(np.all(ranks == F.cols - fr))
        else:
            rng = float(opnorm(both @ Fv - Fv).max())
            matches = matches and bool(np.all(ranks == fr))
    return ProjectionCheck(idem, herm, rng, rank, matches)


@dataclass
class DbarResult:
    dPi: np.ndarray
    dbarPi: np.ndarray
    crosscheck: float
    flagged: bool


def dbar_formula(F: AnalyticMatrixField, P: ProjectionField, tol=DBAR_CROSSCHECK_TOL):
    """Closed-form ``d Pi`` cross-checked against numeric differentiation."""
    grid = P.grid
    if P.source == "kernel":
        dPi = kernel_projection(F, grid).dPi
    else:
        rank = _constant_rank(F, grid)
        _, dPi = _range_parts(F.eval(grid.points), F.derivative().eval(grid.points), rank)
    numeric, _ = wirtinger(P.Pi.astype(complex), grid)
    scale = max(1.0, float(opnorm(dPi).max()))
    err = float(opnorm(numeric.values - dPi).max()) / scale
    return DbarResult(dPi, adjoint(dPi), err, err > tol)


def pdp_identity_report(P: ProjectionField):
    """Max-over-grid residuals of the holomorphic-bundle identities."""
    Pi, d = P.Pi, P.dPi
    db = adjoint(d)
    eye = np.eye(P.size)
    Q = eye - Pi
    lap_numeric = wirtinger(d, P.grid)[1].values
    commutator = d @ db - db @ d

    def worst(X):
        return float(opnorm(X).max())

    return {
        "Pi_dPi": worst(Pi @ d),
        "dPi_times_complement": worst(d @ Q),
        "dPi_minus_dPi_Pi": worst(d - d @ Pi),
        "dPi_minus_complement_dPi": worst(d - Q @ d),
        "dbarPi_Pi": worst(db @ Pi),
        "complement_dbarPi": worst(Q @ db),
        "dbarPi_minus_Pi_dbarPi": worst(db - Pi @ db),
        "dbarPi_minus_dbarPi_complement": worst(db - db @ Q),
        "laplacian_commutator": worst(lap_numeric - commutator),
    }


def complementary_duality_check(P: ProjectionField):
    """Residuals for ``Pi_c = I - Pi``: ``d Pi + d Pi_c = 0``, ``Pi_c dbar Pi_c = 0``."""
    Pc = np.eye(P.size) - P.Pi
    dPc_numeric, dbarPc_numeric = wirtinger(Pc.astype(complex), P.grid)
    dPc, dbarPc = -P.dPi, -P.dbarPi
    norms = np.stack([opnorm(P.dPi), opnorm(P.dbarPi), opnorm(dPc), opnorm(dbarPc)])
    scale = max(1.0, float(norms.max()))
    return {
        "dPi_plus_dPic": float(opnorm(P.dPi + dPc_numeric.values).max()) / scale,
        "Pic_dbarPic": float(opnorm(Pc @ dbarPc).max()),
        "Pic_dbarPic_numeric": float(opnorm(Pc @ dbarPc_numeric.values).max()) / scale,
        "norm_spread": float((norms.max(axis=0) - norms.min(axis=0)).max()),
    }


@dataclass
class SubharmonicWitness:
    """Sampled witness ``phi >= 0`` with ``K = sup phi`` and its defect field."""

    kind: str
    C: float
    phi: np.ndarray
    phi_boundary: np.ndarray
    laplacian: np.ndarray
    defect: np.ndarray
    K: float
    shift: float
    grid: DiskGrid = field(repr=False)

    @property
    def min_defect(self):
        return float(self.defect.min())

    def passes(self, tol=EPS_ALG):
        return self.min_defect >= -tol

    @property
    def embedding_constant(self):
        """``e K e^K`` bounding ``int Lap(phi) |xi|^2 dmu / ||xi||^2``."""
        return float(np.e * self.K * np.exp(self.K))


def _trace_parts(F, points):
    Fv = F.eval(points)
    dFv = F.derivative().eval(points)
    tr = np.real(np.einsum("...ij,...ij->...", np.conj(Fv), Fv))
    lap = np.real(np.einsum("...ij,...ij->...", np.conj(dFv), dFv))
    return tr, lap


def _logdet_parts(F, points):
    Fv = F.eval(points)
    dFv = F.derivative().eval(points)
    M = adjoint(Fv) @ Fv
    sign, logdet = np.linalg.slogdet(M)
    Minv = np.linalg.inv(M)
    a = Minv @ adjoint(dFv) @ dFv
    b = Minv @ adjoint(Fv) @ dFv @ Minv @ adjoint(dFv) @ Fv
    lap = np.real(np.trace(a, axis1=-2, axis2=-1) - np.trace(b, axis1=-2, axis2=-1))
    return logdet, lap


def logdet_admissible(F: AnalyticMatrixField, grid: DiskGrid, rtol=RANK_RTOL):
    """True when ``F*F`` is invertible at the origin, interior and boundary nodes."""
    pts = np.concatenate([[0.0], grid.points.ravel(), grid.boundary_nodes])
    return F.rows >= F.cols and bool(np.all(numerical_rank(F.eval(pts), rtol) == F.cols))


def subharmonic_witness(F: AnalyticMatrixField, P: ProjectionField, kind="logdet", C=None,
                        tol=EPS_ALG):
    """Witness ``phi`` for ``Lap(phi) >= |d Pi|^2`` built from ``F``.

    ``kind="trace"`` uses ``phi = C tr(F*F)`` (``Lap phi = C ||F'||_HS^2``);
    with ``C=None`` the smallest power of two that makes the defect
    nonnegative on the grid is chosen.  ``kind="logdet"`` uses
    ``phi = log det(F*F)``.  ``phi`` is shifted so that its minimum over the
    origin, interior and boundary nodes is zero.
    """
    grid = P.grid
    dnorm2 = opnorm(P.dPi) ** 2
    pts = [np.zeros(1, dtype=complex), grid.points, grid.boundary_nodes]
    if kind == "trace":
        parts = [_trace_parts(F, p) for p in pts]
        lap_in = parts[1][1]
        if C is None:
            C = None
            for j in range(-30, 61):
                c = 2.0**j
                if np.min(c * lap_in - dnorm2) >= -tol:
                    C = c
                    break
            if C is None:
                raise FieldError("no power-of-two scale makes the trace witness dominate |dPi|^2")
    elif kind == "logdet":
        if not logdet_admissible(F, grid):
            raise FieldError("log det witness needs F*F invertible on the grid")
        parts = [_logdet_parts(F, p) for p in pts]
        C = 1.0 if C is None else C
    else:
        raise ValueError(f"unknown witness kind {kind!r}")
    raw = [C * v for v, _ in parts]
    lap = C * parts[1][1]
    shift = float(min(r.min() for r in raw))
    phi0, phi, phib = (r - shift for r in raw)
    K = float(max(phi0.max(), phi.max(), phib.max()))
    return SubharmonicWitness(kind, float(C), phi, phib, lap, lap - dnorm2, K, shift, grid)


def witness_soundness(P: ProjectionField, W: SubharmonicWitness, lambdas=None):
    """Empirical check ``sup |G(lambda)| <= 2K + 1`` for the potential of ``|d Pi|^2``."""
    sup, lam, vals = green_potential_sup(opnorm(P.dPi) ** 2, P.grid, lambdas)
    return {"green_sup": sup, "bound": 2.0 * W.K + 1.0, "holds": sup <= 2.0 * W.K + 1.0}


def necessity_checks(F: AnalyticMatrixField, P: ProjectionField, box_levels=6):
    """Quantities behind the necessity of the growth and Carleson conditions."""
    grid = P.grid
    one_minus = (1.0 - grid.radial_nodes)[:, None]
    dF = opnorm(F.derivative().eval(grid.points))
    dP = opnorm(P.dPi)
    mask = dF > 1e-12
    ratio = float(np.max(dP[mask] / dF[mask])) if mask.any() else 0.0
    return {
        "sup_growth_dF": float(np.max(one_minus * dF)),
        "sup_growth_dPi": float(np.max(one_minus * dP)),
        "carleson_dF": carleson_constant(dF**2, grid, box_levels),
        "carleson_dPi": carleson_constant(dP**2, grid, box_levels),
        "dPi_over_dF": ratio,
    }


def dilate(obj, r):
    """``F(rz)`` for fields, ``Pi(rz)`` for projection fields."""
    if isinstance(obj, AnalyticMatrixField):
        return obj.dilate(r)
    if not 0.0 < r <= 1.0:
        raise FieldError("dilation radius must lie in (0, 1]")
    if r == 1.0:
        return obj
    if obj.field is not None:
        Fr = obj.field.dilate(r)
        if obj.source == "kernel":
            return kernel_projection(Fr, obj.grid)
        P = range_projection(Fr, obj.grid)
        if obj.source == "complementary":
            return P.complement()
        return P
    grid = obj.grid
    M = grid.radial_interpolation_matrix(r * grid.radial_nodes)
    Mb = grid.radial_interpolation_matrix([r])[0]
    Pi = np.einsum("ij,j...->i...", M, obj.Pi)
    Pib = np.einsum("j,j...->...", Mb, obj.Pi)
    dPi = r * np.einsum("ij,j...->i...", M, obj.dPi)
    return ProjectionField(grid, Pi, Pib, dPi, obj.source)
