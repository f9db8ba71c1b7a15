"""Matrix polynomials on the disk: evaluation, calculus, boundary traces.

An :class:`AnalyticMatrixField` holds Taylor coefficients ``A_0..A_N`` of
``F(z) = sum A_n z^n`` with ``m x k`` complex matrices.  All fields in this
package (symbols, left inverses, analytic projections) use this class when
they are polynomial, and :class:`~opcorona.disk.SampledField` otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .disk import DiskGrid, EPS_GRID, GridError, SampledField

RANK_RTOL = 1e-9


class FieldError(ValueError):
    """Raised for malformed fields or degenerate corona data."""


def opnorm(M):
    """Spectral norm over the trailing two axes."""
    M = np.asarray(M)
    if M.shape[-1] == 0 or M.shape[-2] == 0:
        return np.zeros(M.shape[:-2])
    return np.linalg.norm(M, ord=2, axis=(-2, -1))


def adjoint(M):
    return np.conj(np.swapaxes(M, -1, -2))


def numerical_rank(M, rtol=RANK_RTOL):
    """Rank per matrix: singular values above ``rtol * largest`` count."""
    s = np.linalg.svd(M, compute_uv=False)
    if s.shape[-1] == 0:
        return np.zeros(s.shape[:-1], dtype=int)
    top = s[..., :1]
    return np.sum(s > rtol * np.maximum(top, np.finfo(float).tiny), axis=-1)


class AnalyticMatrixField:
    """Matrix-valued polynomial ``F(z) = sum_n A_n z^n``.

    Parameters
    ----------
    coefficients : array_like, shape (N+1, m, k)
        Taylor coefficients, lowest degree first.  A 2-D array is treated
        as a constant field.
    """

    def __init__(self, coefficients):
        c = np.array(coefficients, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[0] == 0:
            raise FieldError("coefficients must have shape (degree+1, rows, cols)")
        c.setflags(write=False)
        self._coef = c

    @classmethod
    def constant(cls, A):
        return cls(np.asarray(A, dtype=complex)[None])

    @classmethod
    def from_polys(cls, entries):
        """Build from a nested list of per-entry coefficient lists."""
        rows, cols = len(entries), len(entries[0])
        deg = max(len(e) for row in entries for e in row)
        c = np.zeros((deg, rows, cols), dtype=complex)
        for i, row in enumerate(entries):
            for j, e in enumerate(row):
                c[: len(e), i, j] = e
        return cls(c)

    @property
    def coefficients(self):
        return self._coef

    @property
    def degree(self):
        return self._coef.shape[0] - 1

    @property
    def shape(self):
        return self._coef.shape[1:]

    @property
    def rows(self):
        return self._coef.shape[1]

    @property
    def cols(self):
        return self._coef.shape[2]

    def __repr__(self):
        return f"AnalyticMatrixField(shape={self.shape}, degree={self.degree})"

    def __eq__(self, other):
        if not isinstance(other, AnalyticMatrixField):
            return NotImplemented
        return self._coef.shape == other._coef.shape and np.array_equal(self._coef, other._coef)

    def __call__(self, z):
        return self.eval(z)

    def eval(self, z, check=True):
        """Horner evaluation; ``z`` may be an array of points."""
        z = np.asarray(z, dtype=complex)
        if check and np.any(np.abs(z) > 1.0 + 1e-12):
            raise FieldError("evaluation point outside the closed unit disk")
        out = np.broadcast_to(self._coef[-1], z.shape + self.shape).copy()
        for A in self._coef[-2::-1]:
            out = out * z[..., None, None] + A
        return out

    def sample(self, grid: DiskGrid):
        return SampledField(grid, self.eval(grid.points), self.eval(grid.boundary_nodes))

    def derivative(self):
        if self.degree == 0:
            return AnalyticMatrixField(np.zeros((1,) + self.shape))
        n = np.arange(1, self.degree + 1)[:, None, None]
        return AnalyticMatrixField(n * self._coef[1:])

    def transpose(self):
        return AnalyticMatrixField(np.swapaxes(self._coef, -1, -2))

    def conjugate(self):
        """Coefficientwise conjugate: ``z -> conj(F(conj(z)))``."""
        return AnalyticMatrixField(np.conj(self._coef))

    def sharp(self):
        """``F#(z) = F(conj z)^*``, coefficients ``A_n^*``."""
        return AnalyticMatrixField(adjoint(self._coef))

    def dilate(self, r):
        """``z -> F(r z)`` for ``0 < r <= 1``."""
        if not 0.0 < r <= 1.0:
            raise FieldError("dilation radius must lie in (0, 1]")
        if r == 1.0:
            return self
        scale = r ** np.arange(self.degree + 1)
        return AnalyticMatrixField(self._coef * scale[:, None, None])

    def scale(self, c):
        return AnalyticMatrixField(self._coef * c)

    def __matmul__(self, other):
        if not isinstance(other, AnalyticMatrixField):
            return NotImplemented
        if self.cols != other.rows:
            raise FieldError("inner dimensions do not agree")
        deg = self.degree + other.degree
        out = np.zeros((deg + 1, self.rows, other.cols), dtype=complex)
        for i, A in enumerate(self._coef):
            out[i : i + other.degree + 1] += A @ other._coef
        return AnalyticMatrixField(out)

    def __add__(self, other):
        if not isinstance(other, AnalyticMatrixField):
            return NotImplemented
        deg = max(self.degree, other.degree)
        out = np.zeros((deg + 1,) + self.shape, dtype=complex)
        out[: self.degree + 1] += self._coef
        out[: other.degree + 1] += other._coef
        return AnalyticMatrixField(out)

    def __neg__(self):
        return AnalyticMatrixField(-self._coef)

    def __sub__(self, other):
        return self + (-other)

    def truncate(self, degree):
        return AnalyticMatrixField(self._coef[: degree + 1])

    def sup_norm(self, grid: DiskGrid):
        """``||F||_inf`` estimated as the max over boundary nodes."""
        return float(opnorm(self.eval(grid.boundary_nodes)).max())


def involutions(F: AnalyticMatrixField):
    """Return ``{"transpose", "conjugate", "sharp"}`` fields of ``F``."""
    return {"transpose": F.transpose(), "conjugate": F.conjugate(), "sharp": F.sharp()}


def derivative(F: AnalyticMatrixField):
    return F.derivative()


def samples_of(obj, grid: DiskGrid):
    """Interior and boundary matrix samples of a field or a SampledField."""
    if isinstance(obj, AnalyticMatrixField):
        return obj.eval(grid.points), obj.eval(grid.boundary_nodes)
    if isinstance(obj, SampledField):
        if obj.grid.shape != grid.shape:
            raise GridError("sampled field lives on a different grid")
        return obj.values, obj.boundary
    raise TypeError(f"cannot sample {type(obj).__name__}")


@dataclass
class CoronaDeltas:
    delta: float
    delta_tilde: float
    c1_delta: float
    rank: int
    rank_constant: bool
    kernel_trivial: bool

    def as_dict(self):
        return dict(self.__dict__)


def corona_delta(F: AnalyticMatrixField, grid: DiskGrid, rtol=RANK_RTOL):
    """Corona constants of ``F`` on the grid.

    ``delta``: min over interior nodes of the smallest singular value.
    ``c1_delta``: min over interior nodes of the smallest singular value
    above the rank tolerance (restriction to the orthogonal complement of
    the kernel).  ``delta_tilde``: min over the boundary of the smallest
    singular value.
    """
    s_in = np.linalg.svd(F.eval(grid.points), compute_uv=False)
    s_bd = np.linalg.svd(F.eval(grid.boundary_nodes), compute_uv=False)
    top = max(s_in.max(), s_bd.max())
    if top <= 0.0 or rtol >= 1.0:
        raise FieldError("F vanishes identically on the grid (degenerate corona data)")
    k = F.cols
    tol_in = rtol * s_in[..., :1]
    nonzero = s_in > tol_in
    ranks = nonzero.sum(axis=-1)
    if np.any(ranks == 0):
        raise FieldError("F(z) = 0 at some node; no restriction to (ker F)^perp exists")
    c1 = float(np.min(np.where(nonzero, s_in, np.inf)))
    delta = float(s_in[..., -1].min()) if s_in.shape[-1] == k else 0.0
    if F.rows < k:
        delta = 0.0
    delta_tilde = float(s_bd[..., -1].min()) if F.rows >= k else 0.0
    bd_ranks = (s_bd > rtol * s_bd[..., :1]).sum(axis=-1)
    all_ranks = np.concatenate([ranks.ravel(), bd_ranks.ravel()])
    rank = int(all_ranks.min())
    return CoronaDeltas(
        delta=delta,
        delta_tilde=delta_tilde,
        c1_delta=c1,
        rank=rank,
        rank_constant=bool(np.all(all_ranks == rank)),
        kernel_trivial=bool(rank == k and np.all(all_ranks == k)),
    )


@dataclass
class BoundaryTrace:
    """Boundary samples of a matrix field with their discrete Fourier modes."""

    grid: DiskGrid
    samples: np.ndarray
    fourier_modes: dict

    def synthesize(self):
        A = self.grid.angular_count
        zeta = self.grid.boundary_nodes
        out = np.zeros_like(self.samples, dtype=complex)
        for n, C in self.fourier_modes.items():
            out = out + (zeta**n)[(...,) + (None,) * (C.ndim)] * C
        return out

    def mode_norms(self):
        return {n: float(opnorm(C)) if C.ndim >= 2 else float(np.abs(C).max())
                for n, C in self.fourier_modes.items()}

    def analytic_part(self, degree=None):
        """Nonnegative modes as an :class:`AnalyticMatrixField`."""
        top = max(n for n in self.fourier_modes) if degree is None else degree
        return AnalyticMatrixField(np.stack([self.fourier_modes[n] for n in range(top + 1)]))


def boundary_trace(samples, grid: DiskGrid):
    """Discrete Fourier analysis of boundary samples (leading axis = angle)."""
    if isinstance(samples, AnalyticMatrixField):
        samples = samples.eval(grid.boundary_nodes)
    elif isinstance(samples, SampledField):
        samples = samples.boundary
    samples = np.asarray(samples)
    A = grid.angular_count
    if samples.shape[0] != A:
        raise GridError("angular node count does not match the grid")
    coeffs = np.fft.fft(samples, axis=0) / A
    freqs = np.fft.fftfreq(A, d=1.0 / A).astype(int)
    modes = {}
    for idx, n in enumerate(freqs):
        if A % 2 == 0 and idx == A // 2:
            # Nyquist mode is shared by +-A/2; keep it on the negative side
            n = -A // 2
        modes[int(n)] = coeffs[idx]
    return BoundaryTrace(grid, samples, modes)


def analyticity_defect(trace: BoundaryTrace):
    """Largest operator norm among the negative Fourier modes."""
    worst = 0.0
    for n, C in trace.fourier_modes.items():
        if n < 0:
            val = float(opnorm(C)) if np.ndim(C) >= 2 else float(np.max(np.abs(C)))
            worst = max(worst, val)
    return worst


def field_defect(samples, grid: DiskGrid):
    """Shortcut: analyticity defect of boundary samples."""
    return analyticity_defect(boundary_trace(samples, grid))


def c1_refinement(F: AnalyticMatrixField, grids, drift_tol=0.10, floor=1e-6):
    """Track ``c1_delta`` across grids; flags a collapsing lower bound on nonzero singular values."""
    values = [corona_delta(F, g).c1_delta for g in grids]
    drops = [(a - b) / max(a, 1e-300) for a, b in zip(values, values[1:])]
    decreasing = any(d > drift_tol for d in drops)
    passed = (not decreasing) and min(values) >= floor
    note = ""
    if not passed:
        note = ("c1_delta decreases under grid refinement: smallest nonzero singular "
                "value tends to 0, no uniform lower bound on (ker F)^perp")
    return {"values": values, "relative_drop": drops, "passed": passed, "note": note}
