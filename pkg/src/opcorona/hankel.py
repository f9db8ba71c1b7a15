"""Truncated Hankel form of a projection field and its analytic projection.

Test vectors are ``xi1 = (I - Pi) z^k e_j`` (``0 <= k <= N``) and
``xi2 = Pi conj(z)^l e_i`` (``1 <= l <= N``).  The form

    L(xi1, xi2) = int_D d < (dbar Pi) xi1, xi2 > dmu

is evaluated three ways: the product-rule split into terms I, II, III; a
direct numerical derivative of the integrand; and Green's formula, which
reduces it to ``int_T < Pi h1, h2 > dm``.  A trigonometric symbol ``V``
matching the form yields the projection ``Pi - Pi V (I - Pi)``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .corona import InverseReport, nikolski_left_inverse
from .disk import DiskGrid, wirtinger
from .field import (
    AnalyticMatrixField,
    FieldError,
    adjoint,
    analyticity_defect,
    boundary_trace,
    corona_delta,
    opnorm,
)
from .projection import (
    ProjectionField,
    SubharmonicWitness,
    range_projection,
    subharmonic_witness,
)

EPS_TRUNC = 1e-6
DEFAULT_MODES = 16
CONSISTENCY_TOL = 1e-6
RATIO_SLACK = 1e-9


def embedding_constant(K):
    """``e K e^K``."""
    return float(np.e * K * np.exp(K))


def main_estimate_constant(K):
    """``2 (eKe^K + (eKe^K)^2)^{1/2}``."""
    c = embedding_constant(K)
    return float(2.0 * np.sqrt(c + c * c))


def projection_norm_cap(K):
    """``1 + 2 ((K e^{K+1} + 1) K e^{K+1})^{1/2}``."""
    c = K * np.exp(K + 1.0)
    return float(1.0 + 2.0 * np.sqrt((c + 1.0) * c))


@dataclass
class HankelDiscretization:
    """Sampled test vectors and (after assembly) the truncated form.

    Vector arrays have shape ``(R, A, count, n)`` in the interior and
    ``(A, count, n)`` on the boundary.  ``index1[q] = (k, j)`` and
    ``index2[p] = (l, i)``.
    """

    grid: DiskGrid
    modes: int
    index1: list
    index2: list
    xi1: np.ndarray
    xi2: np.ndarray
    xi1_boundary: np.ndarray
    xi2_boundary: np.ndarray
    d_xi1: np.ndarray
    dbar_xi2: np.ndarray
    h1_boundary: np.ndarray
    h2_boundary: np.ndarray
    norms1: np.ndarray
    norms2: np.ndarray
    gram1: np.ndarray
    gram2: np.ndarray
    L_matrix: np.ndarray | None = None
    Gamma: np.ndarray | None = None
    norm_Gamma: float | None = None

    def set_form(self, L):
        """Store ``L[p, q] = L(xi1_q, xi2_p)`` and the induced operator."""
        self.L_matrix = L
        self.Gamma = _inv_sqrt(self.gram2) @ L @ _inv_sqrt(self.gram1)
        self.norm_Gamma = float(np.linalg.norm(self.Gamma, 2)) if self.Gamma.size else 0.0

    def hankel_residual(self):
        """Max ``|L(z xi1, xi2) - L(xi1, conj(z) xi2)|`` over available basis pairs."""
        if self.L_matrix is None:
            raise FieldError("form not assembled")
        n = self.xi1.shape[-1]
        N = self.modes
        L = self.L_matrix.reshape(N, n, N + 1, n)  # (l-1, i, k, j)
        left = L[:-1, :, 1:, :]  # L(xi1_{k+1}, xi2_l)
        right = L[1:, :, :-1, :]  # L(xi1_k, xi2_{l+1})
        return float(np.abs(left - right).max()) if left.size else 0.0


def _inv_sqrt(G, rtol=1e-10):
    w, U = np.linalg.eigh(0.5 * (G + adjoint(G)))
    top = max(float(w.max()), 0.0) if w.size else 0.0
    keep = w > rtol * max(top, 1e-300)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (U * inv) @ adjoint(U)


def build_test_vectors(P: ProjectionField, modes=DEFAULT_MODES):
    """Sample ``xi1``, ``xi2`` and their exact derivatives on ``P.grid``."""
    grid = P.grid
    if modes < 1 or modes > grid.angular_count // 4:
        raise FieldError(f"mode cutoff {modes} must lie in [1, angular_count/4 = {grid.angular_count // 4}]")
    n = P.size
    eye = np.eye(n)
    z, zb = grid.points, grid.boundary_nodes
    Q, Qb = eye - P.Pi, eye - P.Pi_boundary
    d, db = P.dPi, P.dbarPi

    ks = np.arange(modes + 1)
    ls = np.arange(1, modes + 1)
    index1 = [(int(k), j) for k in ks for j in range(n)]
    index2 = [(int(l), i) for l in ls for i in range(n)]

    def unit_columns(powers):
        # powers: (..., count_k) -> (..., count_k * n, n) with e_j pattern
        out = powers[..., :, None, None] * eye[None, :, :]
        return out.reshape(powers.shape[:-1] + (-1, n))

    zk = z[..., None] ** ks
    dzk = np.where(ks > 0, ks * z[..., None] ** np.maximum(ks - 1, 0), 0.0)
    zl = np.conj(z[..., None]) ** ls
    dzl = ls * np.conj(z[..., None]) ** (ls - 1)
    h1 = unit_columns(zk)
    dh1 = unit_columns(dzk)
    h2 = unit_columns(zl)
    dbh2 = unit_columns(dzl)
    h1b = unit_columns(zb[:, None] ** ks)
    h2b = unit_columns(np.conj(zb[:, None]) ** ls)

    apply = lambda M, v: np.einsum("...ab,...qb->...qa", M, v)
    xi1 = apply(Q, h1)
    xi2 = apply(P.Pi, h2)
    d_xi1 = -apply(d, h1) + apply(Q, dh1)
    dbar_xi2 = apply(db, h2) + apply(P.Pi, dbh2)
    xi1b = apply(Qb, h1b)
    xi2b = apply(P.Pi_boundary, h2b)

    w = grid.boundary_weights[:, None, None]
    gram1 = np.einsum("tqa,tpa->qp", np.conj(xi1b) * w, xi1b)
    gram2 = np.einsum("tqa,tpa->qp", np.conj(xi2b) * w, xi2b)
    norms1 = np.sqrt(np.maximum(np.real(np.diag(gram1)), 0.0))
    norms2 = np.sqrt(np.maximum(np.real(np.diag(gram2)), 0.0))
    return HankelDiscretization(
        grid, modes, index1, index2, xi1, xi2, xi1b, xi2b, d_xi1, dbar_xi2,
        h1b, h2b, norms1, norms2, gram1, gram2,
    )


@dataclass
class FormAssembly:
    """Form values ``[p, q]`` (``p`` indexes xi2, ``q`` indexes xi1)."""

    L: np.ndarray
    term_I: np.ndarray
    term_II: np.ndarray
    term_III: np.ndarray
    L_direct: np.ndarray
    L_green: np.ndarray
    term_I_relative: float
    direct_gap: float
    green_gap: float
    cauchy_schwarz_II: float
    cauchy_schwarz_III: float
    hankel_residual: float
    flagged: bool

    def summary(self):
        return {
            "term_I_relative": self.term_I_relative,
            "max_abs_L": float(np.abs(self.L).max()) if self.L.size else 0.0,
            "direct_gap": self.direct_gap,
            "green_gap": self.green_gap,
            "cauchy_schwarz_II": self.cauchy_schwarz_II,
            "cauchy_schwarz_III": self.cauchy_schwarz_III,
            "hankel_residual": self.hankel_residual,
            "flagged": self.flagged,
        }


def _pairing(weights, a, b):
    """``sum_nodes w <a_q, b_p>`` as a ``(p, q)`` matrix."""
    return np.einsum("xy,xyqa,xypa->pq", weights, a, np.conj(b))


def assemble_form(P: ProjectionField, disc: HankelDiscretization, tol=CONSISTENCY_TOL):
    """Evaluate the form on all basis pairs and store it in ``disc``."""
    grid = P.grid
    w = grid.mu_weights
    d, db = P.dPi, P.dbarPi
    lap = wirtinger(d, grid)[1].values  # dbar(d Pi)

    apply = lambda M, v: np.einsum("...ab,...qb->...qa", M, v)
    u = apply(db, disc.xi1)
    term_I = _pairing(w, apply(lap, disc.xi1), disc.xi2)
    term_II = _pairing(w, apply(db, disc.d_xi1), disc.xi2)
    term_III = _pairing(w, u, disc.dbar_xi2)
    L = term_I + term_II + term_III

    du = wirtinger(u, grid)[0].values
    dbar_xi2_num = wirtinger(disc.xi2, grid)[1].values
    L_direct = _pairing(w, du, disc.xi2) + _pairing(w, u, dbar_xi2_num)

    L_green = np.einsum("t,tqa,tpa->pq", grid.boundary_weights,
                        apply(P.Pi_boundary, disc.h1_boundary), np.conj(disc.h2_boundary))

    scale = np.outer(disc.norms2, disc.norms1)
    safe = np.where(scale > 1e-14, scale, np.inf)
    term_I_rel = float(np.max(np.abs(term_I) / safe)) if L.size else 0.0

    # Cauchy-Schwarz bounds for II and III
    dbn = opnorm(db)
    e_dxi1 = np.einsum("xy,xyqa->q", w, np.abs(disc.d_xi1) ** 2)
    e_dxi2 = np.einsum("xy,xyqa->q", w, np.abs(disc.dbar_xi2) ** 2)
    e_xi1 = np.einsum("xy,xyqa->q", w * dbn**2, np.abs(disc.xi1) ** 2)
    e_xi2 = np.einsum("xy,xyqa->q", w * dbn**2, np.abs(disc.xi2) ** 2)
    b2 = np.sqrt(np.outer(e_xi2, e_dxi1))
    b3 = np.sqrt(np.outer(e_dxi2, e_xi1))
    cs2 = float(np.max(np.abs(term_II) / np.where(b2 > 1e-14, b2, np.inf))) if L.size else 0.0
    cs3 = float(np.max(np.abs(term_III) / np.where(b3 > 1e-14, b3, np.inf))) if L.size else 0.0

    direct_gap = float(np.abs(L - L_direct).max()) if L.size else 0.0
    green_gap = float(np.abs(L - L_green).max()) if L.size else 0.0
    disc.set_form(L)
    return FormAssembly(
        L, term_I, term_II, term_III, L_direct, L_green, term_I_rel, direct_gap, green_gap,
        cs2, cs3, disc.hankel_residual(), bool(direct_gap > tol or green_gap > tol),
    )


def embedding_check(witness: SubharmonicWitness, disc: HankelDiscretization, which="xi1"):
    """Ratios of both embedding estimates for every basis vector.

    ``int Lap(phi) |xi|^2 dmu <= eKe^K ||xi||^2`` and
    ``int |d xi1|^2 dmu <= (1 + eKe^K) ||xi1||^2`` (``dbar`` for ``xi2``).
    """
    if which == "xi1":
        v, dv, norms = disc.xi1, disc.d_xi1, disc.norms1
    elif which == "xi2":
        v, dv, norms = disc.xi2, disc.dbar_xi2, disc.norms2
    else:
        raise ValueError("which must be 'xi1' or 'xi2'")
    w = disc.grid.mu_weights
    c = embedding_constant(witness.K)
    lap_mass = np.einsum("xy,xyqa->q", w * witness.laplacian, np.abs(v) ** 2)
    energy = np.einsum("xy,xyqa->q", w, np.abs(dv) ** 2)
    sq = norms**2
    live = sq > 1e-28

    def ratio(left, const):
        out = np.zeros_like(left)
        denom = const * sq
        ok = live & (denom > 0)
        out[ok] = left[ok] / denom[ok]
        bad = live & (denom <= 0) & (left > 1e-14)
        out[bad] = np.inf
        return out

    r1 = ratio(lap_mass, c)
    r2 = ratio(energy, 1.0 + c)
    return {
        "constant": c,
        "energy_constant": 1.0 + c,
        "laplacian_ratios": r1,
        "energy_ratios": r2,
        "max_laplacian_ratio": float(r1.max()) if r1.size else 0.0,
        "max_energy_ratio": float(r2.max()) if r2.size else 0.0,
        # the energy bound is attained by monomials when K = 0; allow roundoff
        "passed": bool(max(r1.max(initial=0.0), r2.max(initial=0.0)) <= 1.0 + RATIO_SLACK),
    }


def main_estimate_check(form: FormAssembly, disc: HankelDiscretization, K):
    """Max ``|L| / (||xi1|| ||xi2||)`` and ``||Gamma||`` against the main constant."""
    scale = np.outer(disc.norms2, disc.norms1)
    safe = np.where(scale > 1e-14, scale, np.inf)
    ratios = np.abs(form.L) / safe
    const = main_estimate_constant(K)
    top = float(ratios.max()) if ratios.size else 0.0
    return {
        "constant": const,
        "max_ratio": top,
        "norm_Gamma": disc.norm_Gamma,
        "passed": bool(top <= const and disc.norm_Gamma <= const * (1 + 1e-9) + 1e-12),
    }


@dataclass
class SymbolFit:
    """Trigonometric symbol ``V`` with ``V = Pi V (I - Pi)`` on the circle."""

    modes: int
    coefficients: dict
    V: np.ndarray
    structural_residual: float
    matching_residual: float
    norm_V: float
    norm_Gamma: float
    rank: int
    unknowns: int

    def as_dict(self):
        return {
            "symbol_modes": self.modes,
            "structural_residual": self.structural_residual,
            "matching_residual": self.matching_residual,
            "norm_V": self.norm_V,
            "norm_Gamma": self.norm_Gamma,
            "rank": self.rank,
            "unknowns": self.unknowns,
        }


def fit_symbol(disc: HankelDiscretization, P: ProjectionField, symbol_modes=None, tol=EPS_TRUNC):
    """Minimum-norm least-squares fit of ``V`` to the assembled form.

    The unknowns are the matrix coefficients of ``sum_{|n| <= N'} C_n zeta^n``.
    The fitted ``V`` is then compressed to ``Pi V (I - Pi)``, which leaves
    every ``<V xi1, xi2>`` unchanged.  Raises when the system is inconsistent
    at this ``N'`` (the residual of the minimum-norm solution exceeds ``tol``).
    """
    if disc.L_matrix is None:
        raise FieldError("assemble the form before fitting a symbol")
    grid = P.grid
    A = grid.angular_count
    Np = 2 * disc.modes if symbol_modes is None else int(symbol_modes)
    if Np < 0 or Np >= A // 2:
        raise FieldError(f"symbol modes {Np} must lie in [0, angular_count/2)")
    n = P.size
    zeta = grid.boundary_nodes
    w = grid.boundary_weights
    ns = np.arange(-Np, Np + 1)
    # column (n, a, b): sum_t w zeta^n conj(xi2[t, p, a]) xi1[t, q, b]
    phases = (zeta[None, :] ** ns[:, None]) * w[None, :]
    M = np.einsum("nt,tpa,tqb->pqnab", phases, np.conj(disc.xi2_boundary), disc.xi1_boundary)
    M = M.reshape(disc.L_matrix.size, -1)
    rhs = disc.L_matrix.ravel()
    coef, _, rank, _ = np.linalg.lstsq(M, rhs, rcond=None)
    resid = float(np.abs(M @ coef - rhs).max()) if rhs.size else 0.0
    if resid > tol:
        raise FieldError(
            f"symbol system inconsistent at N'={Np} (residual {resid:.2e}); raise N' or N"
        )
    C = coef.reshape(len(ns), n, n)
    V_raw = np.einsum("nab,nt->tab", C, zeta[None, :] ** ns[:, None])
    Pib = P.Pi_boundary
    Q = np.eye(n) - Pib
    V = Pib @ V_raw @ Q
    structural = float(opnorm(V - Pib @ V @ Q).max())
    return SymbolFit(
        Np, {int(k): C[i] for i, k in enumerate(ns)}, V, structural, resid,
        float(opnorm(V).max()), float(disc.norm_Gamma), int(rank), M.shape[1],
    )


@dataclass
class ProjectionCertificate:
    """Analytic projection ``Pi - Pi V (I - Pi)`` and its validation."""

    boundary: np.ndarray
    extension: AnalyticMatrixField
    analyticity_defect: float
    idempotency_boundary: float
    idempotency_interior: float
    range_boundary: float
    complement_boundary: float
    range_interior: float
    complement_interior: float
    norm: float
    cap: float
    certified: bool
    reason: str = ""

    def as_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k not in ("boundary", "extension")}
        d["extension_degree"] = self.extension.degree
        return d


def analytic_projection(P: ProjectionField, fit: SymbolFit | None, K, tol=EPS_TRUNC):
    """Boundary projection from the symbol, its analytic extension and checks."""
    grid = P.grid
    n = P.size
    Pib = P.Pi_boundary
    W = np.zeros_like(Pib) if fit is None else fit.V
    Pb = Pib - W
    trace = boundary_trace(Pb, grid)
    defect = analyticity_defect(trace)
    top = grid.angular_count // 2 - 1
    coeffs = np.stack([trace.fourier_modes[k] for k in range(top + 1)])
    mags = np.abs(coeffs).reshape(top + 1, -1).max(axis=1)
    live = np.nonzero(mags > 1e-13 * max(1.0, mags.max()))[0]
    ext = AnalyticMatrixField(coeffs[: (int(live.max()) if live.size else 0) + 1])
    Pin = ext.eval(grid.points)
    eye = np.eye(n)
    worst = lambda X: float(opnorm(X).max())
    idem_b = worst(Pb @ Pb - Pb)
    idem_i = worst(Pin @ Pin - Pin)
    rng_b = worst(Pb @ Pib - Pib)
    cmp_b = worst((eye - Pib) @ Pb)
    rng_i = worst(Pin @ P.Pi - P.Pi)
    cmp_i = worst((eye - P.Pi) @ Pin)
    norm = worst(Pb)
    cap = projection_norm_cap(K)
    checks = {
        "analyticity defect": defect, "boundary idempotency": idem_b,
        "interior idempotency": idem_i, "boundary range": rng_b,
        "boundary complement": cmp_b, "interior range": rng_i, "interior complement": cmp_i,
    }
    failed = [k for k, v in checks.items() if not v <= tol]
    if norm > cap:
        failed.append("norm above cap")
    reason = "" if not failed else "projection not certified: " + ", ".join(failed)
    return ProjectionCertificate(Pb, ext, defect, idem_b, idem_i, rng_b, cmp_b, rng_i, cmp_i,
                                 norm, cap, not failed, reason)


@dataclass
class PipelineResult:
    """Everything produced by one run of the projection pipeline."""

    field: AnalyticMatrixField
    dilation: float
    projection: ProjectionField
    witness: SubharmonicWitness
    discretization: HankelDiscretization
    form: FormAssembly
    embedding: dict
    main_estimate: dict
    fit: SymbolFit | None
    certificate: ProjectionCertificate
    inverse: InverseReport | None
    timings: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    needs_inverse: bool = True

    @property
    def passed(self):
        inverse_ok = (not self.needs_inverse) or (
            self.inverse is not None and self.inverse.bezout_residual <= EPS_TRUNC)
        return bool(
            self.certificate.certified and inverse_ok
            and self.form.term_I_relative <= 1e-8
            and self.embedding["xi1"]["passed"] and self.embedding["xi2"]["passed"]
            and self.main_estimate["passed"]
        )

    def summary(self):
        out = {
            "dilation": self.dilation,
            "K": self.witness.K,
            "witness_kind": self.witness.kind,
            "witness_C": self.witness.C,
            "witness_min_defect": self.witness.min_defect,
            "form": self.form.summary(),
            "embedding": {k: {kk: vv for kk, vv in v.items() if not isinstance(vv, np.ndarray)}
                          for k, v in self.embedding.items()},
            "main_estimate": self.main_estimate,
            "symbol": None if self.fit is None else self.fit.as_dict(),
            "projection": self.certificate.as_dict(),
            "left_inverse": None if self.inverse is None else self.inverse.as_dict(),
            "passed": self.passed,
            "notes": list(self.notes),
        }
        return out


def _run_once(F, grid, modes, symbol_modes, witness_kind, witness_C, tol):
    clock = {}
    t = time.perf_counter()
    P = range_projection(F, grid)
    W = subharmonic_witness(F, P, witness_kind, witness_C)
    clock["projection"] = time.perf_counter() - t
    t = time.perf_counter()
    disc = build_test_vectors(P, modes)
    form = assemble_form(P, disc)
    clock["assembly"] = time.perf_counter() - t
    emb = {"xi1": embedding_check(W, disc, "xi1"), "xi2": embedding_check(W, disc, "xi2")}
    main = main_estimate_check(form, disc, W.K)
    notes = []
    t = time.perf_counter()
    try:
        fit = fit_symbol(disc, P, symbol_modes, tol)
    except FieldError as exc:
        fit = None
        notes.append(str(exc))
    if fit is None:
        cert = ProjectionCertificate(P.Pi_boundary, AnalyticMatrixField(np.zeros((1, P.size, P.size))),
                                     np.inf, np.inf, np.inf, np.inf, np.inf, np.inf, np.inf,
                                     np.inf, projection_norm_cap(W.K), False,
                                     "projection not certified: no symbol fit")
    else:
        cert = analytic_projection(P, fit, W.K, tol)
    clock["symbol"] = time.perf_counter() - t
    inverse = None
    if cert.certified and corona_delta(F, grid).kernel_trivial:
        try:
            inverse = nikolski_left_inverse(F, cert.extension, grid, tol=tol, alg_tol=tol)
        except FieldError as exc:
            notes.append(f"left inverse failed: {exc}")
    elif cert.certified:
        notes.append("F has nontrivial kernel; no left inverse attempted")
    return P, W, disc, form, emb, main, fit, cert, inverse, clock, notes


def run_pipeline(F: AnalyticMatrixField, grid: DiskGrid, modes=DEFAULT_MODES, symbol_modes=None,
                 witness_kind="logdet", witness_C=None, dilation=None, fallback_dilation=0.95,
                 tol=EPS_TRUNC):
    """Projection pipeline with a dilation fallback.

    If certification fails for ``F`` (or ``F(r z)`` when ``dilation`` is
    given), the pipeline reruns on ``F(fallback_dilation * z)``.
    """
    r = 1.0 if dilation is None else float(dilation)
    Fr = F.dilate(r)
    parts = _run_once(Fr, grid, modes, symbol_modes, witness_kind, witness_C, tol)
    result = PipelineResult(Fr, r, *parts[:9], timings=parts[9], notes=parts[10],
                            needs_inverse=corona_delta(Fr, grid).kernel_trivial)
    if not result.passed and fallback_dilation is not None and fallback_dilation < r:
        first = result.certificate.reason or "checks failed"
        Fr = F.dilate(fallback_dilation)
        parts = _run_once(Fr, grid, modes, symbol_modes, witness_kind, witness_C, tol)
        result = PipelineResult(Fr, fallback_dilation, *parts[:9], timings=parts[9],
                                notes=[f"r={r}: {first}; retried with dilation"] + parts[10],
                                needs_inverse=corona_delta(Fr, grid).kernel_trivial)
    return result
