"""Quadrature, Wirtinger calculus and measure tests on the unit disk.

The interior rule is a tensor product of Gauss-Legendre nodes in radius and
the trapezoid rule in angle.  Area weights are the Gauss weights times ``r``.
The ``dmu = (2/pi) log(1/|z|) dx dy`` weights live on the same nodes and are
interpolatory for the weight ``r log(1/r)``: they integrate every polynomial
of degree below ``radial_count`` in ``r`` exactly, log singularity included.

Arrays sampled on the interior have leading shape ``(R, A)`` (radius,
angle); boundary samples have leading shape ``(A,)``.  Trailing axes carry
the value shape (scalar, vector or matrix).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

EPS_GRID = 1e-8
DEFAULT_RADIAL = 64
DEFAULT_ANGULAR = 256
DEFAULT_BOX_LEVELS = 6
COINCIDENCE_TOL = 1e-12


class GridError(ValueError):
    """Raised when a sampled field does not fit its grid."""


def _barycentric_diff_matrix(x):
    """First-derivative matrix for polynomial interpolation through ``x``."""
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # barycentric weights via log-magnitudes to stay clear of under/overflow
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    w = sign * np.exp(logw - logw.max())
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D, w


def _barycentric_eval_matrix(x, w, targets):
    """Interpolation matrix from values at ``x`` to values at ``targets``."""
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    diff = targets[:, None] - x[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15, rtol=0.0)
    diff[exact] = 1.0
    M = w[None, :] / diff
    M /= M.sum(axis=1, keepdims=True)
    rows = np.nonzero(exact.any(axis=1))[0]
    for i in rows:
        M[i] = exact[i].astype(float)
    return M


def _log_weighted_radial_weights(x):
    """Weights on Legendre nodes ``x`` for ``int_0^1 f(r) r log(1/r) dr``.

    Moments of the shifted Legendre polynomials are taken with an
    oversampled Gauss rule after ``r = s^2``, where the integrand becomes
    ``4 s^3 log(1/s) P(s^2)`` and converges spectrally.
    """
    n = len(x)
    leg = np.polynomial.legendre
    y, wy = leg.leggauss(4 * n + 16)
    s = 0.5 * (y + 1.0)
    ws = 0.5 * wy * 4.0 * s**3 * np.log(1.0 / s)
    moments = leg.legvander(2.0 * s * s - 1.0, n - 1).T @ ws
    return np.linalg.solve(leg.legvander(x, n - 1).T, moments)


@dataclass(frozen=True)
class DiskGrid:
    """Polar quadrature grid on the closed unit disk.

    Parameters
    ----------
    radial_count : int
        Number of radial Gauss-Legendre nodes.
    angular_count : int
        Number of equispaced angles, shared by interior rings and the
        boundary circle.
    """

    radial_count: int = DEFAULT_RADIAL
    angular_count: int = DEFAULT_ANGULAR
    radial_nodes: np.ndarray = field(init=False, repr=False)
    angles: np.ndarray = field(init=False, repr=False)
    points: np.ndarray = field(init=False, repr=False)
    area_weights: np.ndarray = field(init=False, repr=False)
    mu_weights: np.ndarray = field(init=False, repr=False)
    boundary_nodes: np.ndarray = field(init=False, repr=False)
    boundary_weights: np.ndarray = field(init=False, repr=False)
    _dr: np.ndarray = field(init=False, repr=False)
    _bary_w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        R, A = int(self.radial_count), int(self.angular_count)
        if R < 2 or A < 4:
            raise GridError("grid needs at least 2 radial and 4 angular nodes")
        x, wx = np.polynomial.legendre.leggauss(R)
        r = 0.5 * (x + 1.0)
        theta = 2.0 * np.pi * np.arange(A) / A
        dtheta = 2.0 * np.pi / A
        radial_area = 0.5 * wx * r
        radial_mu = (2.0 / np.pi) * _log_weighted_radial_weights(x)
        D, bw = _barycentric_diff_matrix(r)
        put = object.__setattr__
        put(self, "radial_nodes", r)
        put(self, "angles", theta)
        put(self, "points", r[:, None] * np.exp(1j * theta)[None, :])
        put(self, "area_weights", np.repeat(radial_area[:, None] * dtheta, A, axis=1))
        put(self, "mu_weights", np.repeat(radial_mu[:, None] * dtheta, A, axis=1))
        put(self, "boundary_nodes", np.exp(1j * theta))
        put(self, "boundary_weights", np.full(A, 1.0 / A))
        put(self, "_dr", D)
        put(self, "_bary_w", bw)

    @property
    def shape(self):
        return (self.radial_count, self.angular_count)

    def refined(self, factor=1.5):
        """Grid with both resolutions scaled by ``factor`` (angles kept even)."""
        R = int(round(self.radial_count * factor))
        A = int(round(self.angular_count * factor / 2.0)) * 2
        return DiskGrid(R, A)

    def sample(self, fn: Callable[[np.ndarray], np.ndarray], boundary=True):
        """Evaluate a vectorised ``fn(z)`` on the interior (and boundary) nodes."""
        inner = np.asarray(fn(self.points))
        outer = np.asarray(fn(self.boundary_nodes)) if boundary else None
        return SampledField(self, inner, outer)

    def metadata(self):
        return {
            "radial_nodes": self.radial_count,
            "angular_count": self.angular_count,
            "radial_rule": "Gauss-Legendre in r; interpolatory r log(1/r) weights for mu",
            "angular_rule": "trapezoid",
            "min_radius": float(self.radial_nodes[0]),
            "max_radius": float(self.radial_nodes[-1]),
        }

    def radial_interpolation_matrix(self, radii):
        """Matrix mapping ring values to values at the given radii."""
        return _barycentric_eval_matrix(self.radial_nodes, self._bary_w, radii)


@dataclass(frozen=True)
class SampledField:
    """Values of a scalar/vector/matrix field on a :class:`DiskGrid`.

    ``values`` has leading shape ``grid.shape``; ``boundary`` (optional) has
    leading shape ``(angular_count,)`` and the same trailing shape.
    """

    grid: DiskGrid
    values: np.ndarray
    boundary: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape[:2] != self.grid.shape:
            raise GridError(
                f"interior samples have shape {vals.shape[:2]}, grid is {self.grid.shape}"
            )
        object.__setattr__(self, "values", vals)
        if self.boundary is not None:
            bnd = np.asarray(self.boundary)
            if bnd.shape[0] != self.grid.angular_count:
                raise GridError("boundary samples do not match the angular node count")
            if bnd.shape[1:] != vals.shape[2:]:
                raise GridError("boundary and interior value shapes differ")
            object.__setattr__(self, "boundary", bnd)

    @property
    def value_shape(self):
        return self.values.shape[2:]


def _interior(field, grid=None):
    if isinstance(field, SampledField):
        return field.grid, field.values
    if grid is None:
        raise GridError("raw arrays need an explicit grid")
    vals = np.asarray(field)
    if vals.shape[:2] != grid.shape:
        raise GridError(f"samples of shape {vals.shape[:2]} do not match grid {grid.shape}")
    return grid, vals


def quad_mu(field, grid=None):
    """Integrate interior samples against ``dmu``."""
    grid, vals = _interior(field, grid)
    return np.tensordot(grid.mu_weights, vals, axes=([0, 1], [0, 1]))


def quad_area(field, grid=None):
    """Integrate interior samples against area measure ``dx dy``."""
    grid, vals = _interior(field, grid)
    return np.tensordot(grid.area_weights, vals, axes=([0, 1], [0, 1]))


def quad_boundary(field, grid=None):
    """Integrate boundary samples against normalised arc length ``dm``."""
    if isinstance(field, SampledField):
        grid, vals = field.grid, field.boundary
        if vals is None:
            raise GridError("field carries no boundary samples")
    else:
        vals = np.asarray(field)
    if vals.shape[0] == 0:
        raise GridError("empty boundary grid")
    if grid is not None and vals.shape[0] != grid.angular_count:
        raise GridError("boundary samples do not match the angular node count")
    return np.tensordot(np.full(vals.shape[0], 1.0 / vals.shape[0]), vals, axes=(0, 0))


def _polar_derivatives(grid, vals):
    """Return (d/dr, (1/r) d/dtheta) of interior samples."""
    R, A = grid.shape
    tail = vals.shape[2:]
    flat = vals.reshape(R, A, -1)
    d_dr = np.einsum("ij,jak->iak", grid._dr, flat)
    modes = np.fft.fft(flat, axis=1)
    m = np.fft.fftfreq(A, d=1.0 / A)
    if A % 2 == 0:
        m[A // 2] = 0.0
    d_dth = np.fft.ifft(1j * m[None, :, None] * modes, axis=1)
    over_r = d_dth / grid.radial_nodes[:, None, None]
    return d_dr.reshape(vals.shape), over_r.reshape(vals.shape)


def wirtinger(field, grid=None):
    """Numerical Wirtinger derivatives ``(d f, dbar f)`` of interior samples.

    Spectral in angle, barycentric-polynomial in radius.  Uses
    ``d = e^{-i theta}/2 (d_r - i/r d_theta)`` and its conjugate.
    """
    grid, vals = _interior(field, grid)
    vals = vals.astype(complex)
    d_dr, over_r = _polar_derivatives(grid, vals)
    phase = np.exp(-1j * grid.angles)[None, :]
    extra = (None,) * (vals.ndim - 2)
    ph = phase[(...,) + extra]
    d = 0.5 * ph * (d_dr - 1j * over_r)
    dbar = 0.5 * np.conj(ph) * (d_dr + 1j * over_r)
    return SampledField(grid, d), SampledField(grid, dbar)


def laplacian(field, grid=None, order="dbar_d"):
    """Normalised Laplacian ``d dbar`` by composing numeric Wirtinger operators."""
    grid, vals = _interior(field, grid)
    d, dbar = wirtinger(vals, grid)
    if order == "dbar_d":
        return wirtinger(d, grid)[1]
    return wirtinger(dbar, grid)[0]


def greens_formula_residual(u, u0, lap_u=None):
    """Residual of ``int_T u dm - u(0) = int_D (Laplacian u) dmu``.

    ``u`` must carry boundary samples.  When ``lap_u`` is omitted the
    Laplacian is taken numerically.
    """
    if not isinstance(u, SampledField) or u.boundary is None:
        raise GridError("Green's formula needs interior and boundary samples")
    if lap_u is None:
        lap = laplacian(u).values
    else:
        lap = lap_u.values if isinstance(lap_u, SampledField) else np.asarray(lap_u)
    lhs = quad_boundary(u) - u0
    rhs = quad_mu(lap, u.grid)
    return float(np.max(np.abs(np.asarray(lhs - rhs))))


@dataclass
class GreenPotential:
    value: float
    skipped_nodes: int
    omitted_bound: float
    near: float = 0.0
    far: float = 0.0
    split_radius: float | None = None


def green_potential(density, lam, grid=None, detail=False, split_radius=None):
    """Green potential ``(2/pi) iint log|(z-lam)/(1-conj(lam) z)| density dxdy``.

    Nodes within ``1e-12`` of ``lam`` are dropped; the returned bound on the
    dropped contribution is ``(2/pi) * weight * |log dist| * density``.
    With ``split_radius`` the detailed result also splits the value into the
    part from the pseudo-hyperbolic disk ``|(z-lam)/(1-conj(lam) z)| < split_radius``
    and the rest.
    """
    grid, vals = _interior(density, grid)
    lam = complex(lam)
    if abs(lam) >= 1.0:
        raise ValueError("lambda must lie in the open unit disk")
    z = grid.points
    vals = np.real(vals)
    dist = np.abs(z - lam)
    skip = dist < COINCIDENCE_TOL
    safe = np.where(skip, 1.0, dist)
    # log|z| goes through the mu weights, which carry that singularity exactly
    kernel = np.log(safe / (np.abs(z) * np.abs(1.0 - np.conj(lam) * z)))
    kernel[skip] = 0.0
    contrib = (2.0 / np.pi) * grid.area_weights * kernel * vals - grid.mu_weights * np.where(skip, 0.0, vals)
    value = float(np.sum(contrib))
    if not detail:
        return value
    bound = 0.0
    if skip.any():
        bound = (2.0 / np.pi) * float(
            np.sum(grid.area_weights[skip] * np.abs(np.log(COINCIDENCE_TOL)) * np.abs(vals[skip]))
        )
    near = 0.0
    if split_radius is not None:
        pseudo = dist / np.abs(1.0 - np.conj(lam) * z)
        near = float(np.sum(contrib[pseudo < split_radius]))
    return GreenPotential(value, int(skip.sum()), bound, near, value - near, split_radius)


def green_potential_sup(density, grid=None, lambdas=None):
    """``sup |G(lambda)|`` over a polar lambda-grid (default: 8 rings x 16 angles)."""
    grid, vals = _interior(density, grid)
    if lambdas is None:
        radii = np.linspace(0.0, 0.95, 8)
        angles = 2.0 * np.pi * np.arange(16) / 16
        lambdas = np.unique(np.round((radii[:, None] * np.exp(1j * angles)[None, :]).ravel(), 14))
    lambdas = np.asarray(lambdas)
    values = np.array([green_potential(vals, lam, grid) for lam in lambdas])
    return float(np.max(np.abs(values))), lambdas, values


def green_potential_grid(density, grid=None):
    """Green potential evaluated at every interior node.

    The kernel depends only on the angle difference between two rings, so
    each ring pair is a circular correlation done by FFT.  The self node is
    dropped exactly as in :func:`green_potential`.
    """
    grid, vals = _interior(density, grid)
    vals = np.real(vals)
    r = grid.radial_nodes
    A = grid.angular_count
    phase = np.exp(1j * grid.angles)
    area = grid.area_weights[:, 0]
    mu = grid.mu_weights[:, 0]
    rho_hat = np.fft.fft(vals, axis=1)
    out = np.zeros(grid.shape)
    for i, ri in enumerate(r):
        z = r[:, None] * phase[None, :]
        dist = np.abs(z - ri)
        kernel = np.log(np.where(dist > COINCIDENCE_TOL, dist, 1.0)
                        / (r[:, None] * np.abs(1.0 - ri * z)))
        kernel[i, 0] = 0.0
        corr = np.fft.ifft(np.conj(np.fft.fft(kernel, axis=1)) * rho_hat, axis=1).real
        out[i] = (2.0 / np.pi) * np.sum(area[:, None] * corr, axis=0)
    out -= float(np.sum(mu[:, None] * vals))
    out += mu[:, None] * vals
    return out


@dataclass
class CarlesonReport:
    constant: float
    level: int
    arc_index: int
    box_levels: int
    normalisation: str = "sup over dyadic arcs |I| = 2 pi 2^-k of nu(Q(I)) / |I|, |I| in radians"

    def as_dict(self):
        return {
            "constant": self.constant,
            "argmax_level": self.level,
            "argmax_arc": self.arc_index,
            "box_levels": self.box_levels,
            "normalisation": self.normalisation,
        }


def carleson_constant(density, grid=None, box_levels=DEFAULT_BOX_LEVELS, weight=True, detail=False):
    """Carleson constant of ``nu = density (1-|z|) dx dy`` over dyadic boxes.

    The box over the arc ``I`` is ``{r e^{it}: 1 - |I| <= r < 1, e^{it} in I}``.
    Pass ``weight=False`` when ``density`` already includes ``(1-|z|)``.
    """
    grid, vals = _interior(density, grid)
    vals = np.real(np.asarray(vals, dtype=complex))
    R, A = grid.shape
    nu = vals * grid.area_weights
    if weight:
        nu = nu * (1.0 - grid.radial_nodes)[:, None]
    best = (0.0, 0, 0)
    for k in range(1, box_levels + 1):
        arcs = 2**k
        length = 2.0 * np.pi / arcs
        inside = grid.radial_nodes >= 1.0 - length
        per_angle = nu[inside].sum(axis=0)
        # angle nodes binned into arcs; exact split when arcs divides A
        owner = (np.arange(A) * arcs) // A
        sums = np.bincount(owner, weights=per_angle, minlength=arcs) / length
        j = int(np.argmax(sums))
        if sums[j] > best[0]:
            best = (float(sums[j]), k, j)
    report = CarlesonReport(best[0], best[1], best[2], box_levels)
    return report if detail else report.constant


def carleson_refinement(density_fn, grids, box_levels=DEFAULT_BOX_LEVELS, growth_tol=0.10):
    """Carleson constants of ``density_fn(z)`` on successive grids.

    Flags the density as not Carleson when the constant grows by more than
    ``growth_tol`` (relative) between consecutive resolutions.
    """
    constants = [carleson_constant(g.sample(density_fn, boundary=False), box_levels=box_levels)
                 for g in grids]
    growth = [(b - a) / max(abs(a), 1e-300) for a, b in zip(constants, constants[1:])]
    stable = all(abs(g) <= growth_tol for g in growth)
    return {"constants": constants, "relative_growth": growth, "carleson": stable}
