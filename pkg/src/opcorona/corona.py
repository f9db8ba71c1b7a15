"""Left inverses and generalized inverses of analytic matrix fields.

All constructions are pointwise on the grid nodes (interior and boundary);
analyticity of a computed inverse is judged from the negative Fourier modes
of its boundary samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .disk import DiskGrid, SampledField
from .field import (
    RANK_RTOL,
    AnalyticMatrixField,
    FieldError,
    adjoint,
    analyticity_defect,
    boundary_trace,
    corona_delta,
    numerical_rank,
    opnorm,
    samples_of,
)

EPS_ALG = 1e-10
BEZOUT_TOL = 1e-8
ANALYTIC_TOL = 1e-6


@dataclass
class InverseReport:
    """Outcome of an inverse construction.

    ``G`` holds interior and boundary samples; ``coefficients`` is the
    analytic part of the boundary trace when it is a finite polynomial.
    """

    G: SampledField
    bezout_residual: float
    norm_G: float
    bound: float
    passed: bool
    analyticity_defect: float = 0.0
    coefficients: AnalyticMatrixField | None = None
    details: dict = field(default_factory=dict)

    def as_dict(self):
        out = {
            "bezout_residual": self.bezout_residual,
            "norm_G": self.norm_G,
            "bound": self.bound,
            "passed": self.passed,
            "analyticity_defect": self.analyticity_defect,
        }
        if self.coefficients is not None:
            out["coefficients"] = [
                [[[float(v.real), float(v.imag)] for v in row] for row in A]
                for A in self.coefficients.coefficients
            ]
        out.update(self.details)
        return out


def _stack(interior, boundary):
    return np.concatenate([interior.reshape((-1,) + interior.shape[-2:]), boundary], axis=0)


def _polynomial_part(G_boundary, grid, drop=1e-12):
    """Nonnegative Fourier modes of boundary samples, trailing noise trimmed."""
    trace = boundary_trace(G_boundary, grid)
    top = grid.angular_count // 2 - 1
    coeffs = np.stack([trace.fourier_modes[n] for n in range(top + 1)])
    scale = max(1.0, float(np.abs(coeffs).max()))
    coeffs = np.where(np.abs(coeffs) < drop * scale, 0.0, coeffs)
    nz = np.nonzero(np.abs(coeffs).reshape(top + 1, -1).max(axis=1))[0]
    deg = int(nz.max()) if nz.size else 0
    return AnalyticMatrixField(coeffs[: deg + 1])


def _pinv_left(Fv, rtol=RANK_RTOL):
    """(F*F)^{-1}F* per node; raises if F*F is numerically singular."""
    s = np.linalg.svd(Fv, compute_uv=False)
    if Fv.shape[-2] < Fv.shape[-1] or np.any(s[..., -1] <= rtol * s[..., 0].clip(min=1e-300)):
        raise FieldError("F*F is numerically singular at some node; no pointwise left inverse")
    Fs = adjoint(Fv)
    return np.linalg.solve(Fs @ Fv, Fs)


def pointwise_left_inverse(F: AnalyticMatrixField, grid: DiskGrid):
    """``F^dagger = (F*F)^{-1} F*`` sampled on the grid."""
    return SampledField(grid, _pinv_left(F.eval(grid.points)), _pinv_left(F.eval(grid.boundary_nodes)))


def nikolski_left_inverse(F: AnalyticMatrixField, P, grid: DiskGrid, tol=ANALYTIC_TOL,
                          alg_tol=EPS_ALG, boundary_only=False):
    """Left inverse ``G = F^dagger P`` from an analytic projection ``P`` onto Ran F.

    Parameters
    ----------
    P : AnalyticMatrixField or SampledField
        Bounded analytic idempotent field with ``Ran P(z) = Ran F(z)``.
        Sampled input is validated on the boundary only, where it is
        specified; its interior values are used for the Bezout check.
    boundary_only : bool
        Skip every interior check and use boundary data only.
    """
    P_in, P_bd = samples_of(P, grid)
    Fin, Fbd = F.eval(grid.points), F.eval(grid.boundary_nodes)
    check = (P_in, Fin) if isinstance(P, AnalyticMatrixField) and not boundary_only else (None, None)
    for Pv, Fv in ((P_bd, Fbd), check):
        if Pv is None:
            continue
        scale = max(1.0, float(opnorm(Pv).max()))
        idem = float(opnorm(Pv @ Pv - Pv).max())
        if idem > alg_tol * scale:
            raise FieldError(f"P is not idempotent (residual {idem:.2e})")
        mismatch = float(opnorm(Pv @ Fv - Fv).max())
        if mismatch > alg_tol * scale * max(1.0, float(opnorm(Fv).max())):
            raise FieldError(f"range mismatch: ||PF - F|| = {mismatch:.2e}")
    p_defect = analyticity_defect(boundary_trace(P_bd, grid))
    if p_defect > tol:
        raise FieldError(f"P is not analytic: analyticity defect {p_defect:.3g} exceeds {tol:g}")

    G_bd = _pinv_left(Fbd) @ P_bd
    eye = np.eye(F.cols)
    residual = float(opnorm(G_bd @ Fbd - eye).max())
    norm_G = float(opnorm(G_bd).max())
    if boundary_only:
        G_in = np.full(grid.shape + G_bd.shape[1:], np.nan, dtype=complex)
    else:
        G_in = _pinv_left(Fin) @ P_in
        residual = max(residual, float(opnorm(G_in @ Fin - eye).max()))
        norm_G = max(norm_G, float(opnorm(G_in).max()))
    G = SampledField(grid, G_in, G_bd)
    deltas = corona_delta(F, grid)
    norm_P = float(opnorm(P_bd).max())
    bound = norm_P / deltas.delta_tilde if deltas.delta_tilde > 0 else np.inf
    g_defect = analyticity_defect(boundary_trace(G_bd, grid))
    passed = residual <= BEZOUT_TOL and g_defect <= tol and norm_G <= bound * (1 + 1e-6)
    return InverseReport(
        G, residual, norm_G, bound, bool(passed), g_defect, _polynomial_part(G_bd, grid),
        details={"norm_P": norm_P, "delta": deltas.delta, "delta_tilde": deltas.delta_tilde,
                 "boundary_only": boundary_only},
    )


@dataclass
class LocalInverse:
    """Truncated Neumann inverse ``sum_{k<M} [G0 (F(z0) - F)]^k G0`` on a sub-disk."""

    center: complex
    radius: float
    terms: int
    field: AnalyticMatrixField
    q: float
    q_sharp: float
    certified_residual: float
    observed_residual: float


def _circle(center, radius, n=512):
    return center + radius * np.exp(2j * np.pi * np.arange(n) / n)


def local_left_inverse(F: AnalyticMatrixField, z0, radius, terms=40, samples=512):
    """Neumann-series left inverse of ``F`` near ``z0``.

    The contraction factor ``q = ||G0|| max_{|z-z0|=radius} ||F(z0) - F(z)||``
    certifies ``||A G0 F - I|| <= q^M / (1 - q)`` on the closed sub-disk.
    The sharper ``max ||G0 (F(z0) - F(z))||`` is reported alongside.
    """
    z0 = complex(z0)
    if radius <= 0 or abs(z0) + radius > 1.0 + 1e-12:
        raise FieldError("sub-disk must be a nondegenerate disk inside the closed unit disk")
    if terms < 1:
        raise FieldError("need at least one Neumann term")
    G0 = _pinv_left(F.eval(np.array([z0])))[0]
    circle = _circle(z0, radius, samples)
    diff = F.eval(np.array([z0]))[0] - F.eval(circle)
    q = float(opnorm(G0) * opnorm(diff).max())
    q_sharp = float(opnorm(G0 @ diff).max())
    if q >= 1.0:
        raise FieldError(f"contraction bound q = {q:.3f} >= 1 on the requested sub-disk")
    k = F.cols
    step = AnalyticMatrixField.constant(G0) @ (AnalyticMatrixField.constant(F.eval(np.array([z0]))[0]) - F)
    power = AnalyticMatrixField.constant(np.eye(k))
    total = power
    for _ in range(terms - 1):
        power = power @ step
        total = total + power
    inverse = total @ AnalyticMatrixField.constant(G0)
    rings = radius * np.sqrt(np.linspace(0, 1, 9)[:-1, None]) * np.exp(2j * np.pi * np.arange(32) / 32)
    pts = np.concatenate([circle, z0 + rings.ravel()])
    observed = float(opnorm(inverse.eval(pts, check=False) @ F.eval(pts, check=False) - np.eye(k)).max())
    return LocalInverse(z0, float(radius), terms, inverse, q, q_sharp,
                        q**terms / (1.0 - q), observed)


@dataclass
class ProjectionPair:
    """``P_R = FG`` and ``P_K = I - GF`` with their validation residuals."""

    P_R: object
    P_K: object
    residuals: dict
    ranks: tuple


def _as_samples(obj, grid):
    i, b = samples_of(obj, grid)
    return _stack(i, b)


def projections_from_generalized_inverse(F: AnalyticMatrixField, G, grid: DiskGrid, tol=BEZOUT_TOL):
    """Analytic projections onto ``Ran F`` and ``ker F`` from ``FGF = F``."""
    Fv = _as_samples(F, grid)
    Gv = _as_samples(G, grid)
    fgf = float(opnorm(Fv @ Gv @ Fv - Fv).max())
    if fgf > tol * max(1.0, float(opnorm(Fv).max())):
        raise FieldError(f"FGF != F (residual {fgf:.2e})")
    if isinstance(G, AnalyticMatrixField):
        P_R = F @ G
        P_K = AnalyticMatrixField.constant(np.eye(F.cols)) - G @ F
    else:
        gi, gb = samples_of(G, grid)
        fi, fb = F.eval(grid.points), F.eval(grid.boundary_nodes)
        P_R = SampledField(grid, fi @ gi, fb @ gb)
        P_K = SampledField(grid, np.eye(F.cols) - gi @ fi, np.eye(F.cols) - gb @ fb)
    R, K = _as_samples(P_R, grid), _as_samples(P_K, grid)
    rank_F = numerical_rank(Fv)
    rank_R, rank_K = _projector_rank(R), _projector_rank(K)
    residuals = {
        "FGF_minus_F": fgf,
        "P_R_idempotency": float(opnorm(R @ R - R).max()),
        "P_K_idempotency": float(opnorm(K @ K - K).max()),
        "P_R_F_minus_F": float(opnorm(R @ Fv - Fv).max()),
        "F_P_K": float(opnorm(Fv @ K).max()),
        "rank_R_matches": bool(np.all(rank_R == rank_F)),
        "rank_K_matches": bool(np.all(rank_K == F.cols - rank_F)),
    }
    return ProjectionPair(P_R, P_K, residuals, (int(rank_R.min()), int(rank_K.min())))


def _projector_rank(P, tol=1e-8):
    """Rank of idempotents; singular values are compared to ``tol * max(1, ||P||)``."""
    s = np.linalg.svd(P, compute_uv=False)
    return np.sum(s > tol * np.maximum(1.0, s[..., :1]), axis=-1)


def _pinned_inverse(Fv, Rv, Kv, rtol=RANK_RTOL):
    """Pointwise ``G y``: the unique x in Ran(I - P_K) with Fx = P_R y."""
    k = Fv.shape[-1]
    U, s, _ = np.linalg.svd(np.eye(k) - Kv)
    r = int(np.sum(s[0] > rtol * max(s[0, 0], 1e-300)))
    if r == 0:
        return np.zeros(Fv.shape[:-2] + (k, Fv.shape[-2]), dtype=complex), np.inf
    B = U[..., :r]
    FB = Fv @ B
    sv = np.linalg.svd(FB, compute_uv=False)
    worst = float((sv[..., -1] / sv[..., 0].clip(min=1e-300)).min())
    if worst <= rtol:
        raise FieldError("F restricted to Ran(I - P_K) is numerically singular; "
                         "no uniform lower bound on (ker F)^perp")
    return B @ np.linalg.pinv(FB) @ Rv, worst


def generalized_inverse_from_projections(F: AnalyticMatrixField, P_R, P_K, grid: DiskGrid,
                                         tol=ANALYTIC_TOL):
    """Generalized inverse pinned by a pair of analytic projections.

    Checks ``FGF = F`` and ``GFG = G`` nodewise and the analyticity of the
    boundary trace of ``G``.  The reported bound is
    ``sup||I - P_K|| sup||P_R|| / c1_delta``.
    """
    fi, fb = F.eval(grid.points), F.eval(grid.boundary_nodes)
    ri, rb = samples_of(P_R, grid)
    ki, kb = samples_of(P_K, grid)
    Gi, _ = _pinned_inverse(fi.reshape((-1,) + F.shape), ri.reshape((-1,) + ri.shape[-2:]),
                            ki.reshape((-1,) + ki.shape[-2:]))
    Gi = Gi.reshape(grid.shape + Gi.shape[-2:])
    Gb, _ = _pinned_inverse(fb, rb, kb)
    Gs, Fs = _stack(Gi, Gb), _stack(fi, fb)
    fgf = float(opnorm(Fs @ Gs @ Fs - Fs).max())
    gfg = float(opnorm(Gs @ Fs @ Gs - Gs).max())
    defect = analyticity_defect(boundary_trace(Gb, grid))
    if defect > tol:
        raise FieldError(f"computed G is not analytic (defect {defect:.3g}); projections are not analytic")
    norm_G = float(opnorm(Gs).max())
    # smallest nonzero singular value over the closed disk, boundary included
    s = np.linalg.svd(Fs, compute_uv=False)
    c1 = float(np.min(np.where(s > RANK_RTOL * s[..., :1], s, np.inf)))
    bound = float(opnorm(np.eye(F.cols) - _stack(ki, kb)).max() * opnorm(_stack(ri, rb)).max() / c1)
    residual = max(fgf, gfg)
    passed = residual <= BEZOUT_TOL and norm_G <= bound * (1 + 1e-6)
    return InverseReport(
        SampledField(grid, Gi, Gb), residual, norm_G, bound, bool(passed), defect,
        _polynomial_part(Gb, grid), details={"FGF_minus_F": fgf, "GFG_minus_G": gfg, "c1_delta": c1},
    )


def truncated_toeplitz(F: AnalyticMatrixField, modes):
    """Matrix of ``T_{G*}`` with ``G = F^T`` on the first ``modes`` Taylor modes.

    Block ``(i, j)`` is ``conj(A_{j-i})`` for ``0 <= j - i <= deg F``.
    """
    m, k = F.shape
    T = np.zeros((modes * m, modes * k), dtype=complex)
    for n, A in enumerate(F.coefficients):
        for i in range(modes - n):
            j = i + n
            T[i * m:(i + 1) * m, j * k:(j + 1) * k] = np.conj(A)
    return T


def co_outer_necessary_check(F: AnalyticMatrixField, grid: DiskGrid, lam=0.4, modes=64, seed=0):
    """Necessary signals for co-outerness of ``F^T``.

    (a) smallest singular value of ``F(z)`` over the origin and the interior
    nodes; (b) residual of the reproducing-kernel identity
    ``T k_lam e = k_lam conj(F(lam)) e`` for the truncated operator;
    (c) smallest singular value of the truncated operator.  Truncation can
    only produce evidence against co-outerness, never a certificate.
    """
    m, k = F.shape
    pts = np.concatenate([[0.0], grid.points.ravel()])
    smin = np.linalg.svd(F.eval(pts), compute_uv=False)[..., -1] if m >= k else np.zeros(len(pts))
    a_value = float(smin.min())
    top = float(opnorm(F.eval(pts)).max())

    rng = np.random.default_rng(seed)
    e = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    e /= np.linalg.norm(e)
    T = truncated_toeplitz(F, modes)
    powers = np.conj(lam) ** np.arange(modes)
    kvec = np.kron(powers, e)
    lhs = T @ kvec
    rhs = np.kron(powers, np.conj(F.eval(np.array([lam]))[0]) @ e)
    tail = sum(float(opnorm(A)) * abs(lam) ** max(modes - n, 0) for n, A in enumerate(F.coefficients))
    b_residual = float(np.linalg.norm(lhs - rhs))
    smallest = float(np.linalg.svd(T, compute_uv=False)[-1]) if T.size else 0.0
    return {
        "min_singular_value": a_value,
        "trivial_kernel": bool(a_value > RANK_RTOL * max(top, 1e-300)),
        "reproducing_kernel_residual": b_residual,
        "truncation_tail_bound": float(tail / max(1e-300, 1 - abs(lam))),
        "toeplitz_min_singular_value": smallest,
        "caveat": "finite truncation gives only a necessary signal, not a co-outer certificate",
    }
