import numpy as np
import pytest

from opcorona.disk import (
    DiskGrid,
    GridError,
    SampledField,
    carleson_constant,
    carleson_refinement,
    green_potential,
    green_potential_grid,
    green_potential_sup,
    greens_formula_residual,
    laplacian,
    quad_area,
    quad_boundary,
    quad_mu,
    wirtinger,
)
from oracles import monte_carlo_mu, zhalf_dpi_norm_sq

EPS_GRID = 1e-8


def test_grid_invariants(grid):
    assert abs(grid.mu_weights.sum() - 1.0) <= EPS_GRID
    assert grid.boundary_weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(grid.mu_weights > 0)
    assert np.all(np.abs(grid.points) < 1.0)
    assert np.allclose(np.abs(grid.boundary_nodes), 1.0)
    assert grid.shape == (64, 256)


def test_grid_rejects_tiny_sizes():
    with pytest.raises(GridError):
        DiskGrid(1, 8)


def test_sampled_field_shape_checks(grid):
    with pytest.raises(GridError):
        SampledField(grid, np.zeros((3, 3)))


@pytest.mark.parametrize("m", range(7))
def test_quad_mu_radial_moments(grid, m):
    # int |z|^{2m} dmu = 4 int r^{2m+1} log(1/r) dr = 1/(m+1)^2
    assert quad_mu(np.abs(grid.points) ** (2 * m), grid) == pytest.approx(1.0 / (m + 1) ** 2, abs=1e-12)


def test_quad_mu_examples(grid):
    assert quad_mu(np.zeros(grid.shape), grid) == 0.0
    assert abs(quad_mu(np.ones(grid.shape), grid) - 1.0) <= EPS_GRID
    assert quad_mu(np.abs(grid.points) ** 2, grid) == pytest.approx(0.25, abs=1e-12)


def test_quad_mu_shape_mismatch(grid):
    with pytest.raises(GridError):
        quad_mu(np.ones((3, 4)), grid)


def test_quad_mu_against_monte_carlo(grid):
    f = lambda z: np.exp(z.real) * np.cos(3 * z.imag) / (1.5 - z.real)
    mean, _ = monte_carlo_mu(f, n=2**18, seed=3)
    assert quad_mu(f(grid.points), grid) == pytest.approx(mean, abs=1e-5)


def test_quad_area_and_boundary(grid):
    assert quad_area(np.ones(grid.shape), grid) == pytest.approx(np.pi, abs=1e-12)
    zb = grid.boundary_nodes
    assert quad_boundary(np.ones_like(zb), grid) == pytest.approx(1.0)
    assert abs(quad_boundary(zb.real, grid)) < 1e-15
    assert quad_boundary(np.abs(zb) ** 2, grid) == pytest.approx(1.0)
    for n in range(1, 10):
        assert abs(quad_boundary(zb**n, grid)) < 1e-14


def test_quad_boundary_empty(grid):
    with pytest.raises(GridError):
        quad_boundary(SampledField(grid, np.zeros(grid.shape)))


def test_wirtinger_examples(grid):
    z = grid.points
    d, db = wirtinger(z, grid)
    assert np.abs(d.values - 1).max() < 1e-9 and np.abs(db.values).max() < 1e-9
    d, db = wirtinger(np.abs(z) ** 2, grid)
    assert np.abs(d.values - np.conj(z)).max() < 1e-9
    assert np.abs(db.values - z).max() < 1e-9
    assert np.abs(laplacian(np.abs(z) ** 2, grid).values - 1).max() < 1e-7


def test_laplacian_of_r4(grid):
    z = grid.points
    lap = laplacian(np.abs(z) ** 4, grid).values
    err = np.abs(lap - 4 * np.abs(z) ** 2)
    # the innermost rings carry the barycentric differentiation floor
    assert err[2:].max() <= EPS_GRID
    assert err.max() <= 1e-6


def test_laplacian_order_consistency(grid):
    z = grid.points
    u = z**3 * np.conj(z) ** 2 + np.exp(z.real) * np.sin(z.imag)
    a = laplacian(u, grid, order="dbar_d").values
    b = laplacian(u, grid, order="d_dbar").values
    assert np.abs(a - b)[2:].max() <= EPS_GRID
    assert np.abs(a - b).max() <= 1e-6


def test_wirtinger_matrix_valued(grid):
    z = grid.points
    M = np.stack([np.stack([z, np.conj(z)], -1), np.stack([z**2, np.ones_like(z)], -1)], -2)
    d, db = wirtinger(M, grid)
    assert d.values.shape == M.shape
    assert np.abs(d.values[..., 1, 0] - 2 * z).max() < 1e-8
    assert np.abs(db.values[..., 0, 1] - 1).max() < 1e-8


def test_greens_formula_all_low_monomials(grid):
    z, zb = grid.points, grid.boundary_nodes
    worst = 0.0
    for a in range(7):
        for b in range(7 - a):
            u = SampledField(grid, z**a * np.conj(z) ** b, zb**a * np.conj(zb) ** b)
            lap = a * b * z ** max(a - 1, 0) * np.conj(z) ** max(b - 1, 0)
            u0 = 1.0 if a == b == 0 else 0.0
            worst = max(worst, greens_formula_residual(u, u0, SampledField(grid, lap)))
            worst = max(worst, greens_formula_residual(u, u0))
    assert worst <= EPS_GRID


def test_greens_formula_examples(grid):
    z, zb = grid.points, grid.boundary_nodes
    assert greens_formula_residual(SampledField(grid, z.real, zb.real), 0.0) <= EPS_GRID
    assert greens_formula_residual(SampledField(grid, np.abs(z) ** 4, np.abs(zb) ** 4), 0.0) <= EPS_GRID


def test_green_potential_examples(grid):
    assert green_potential(np.zeros(grid.shape), 0.4j, grid) == 0.0
    assert green_potential(np.ones(grid.shape), 0.0, grid) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ValueError):
        green_potential(np.ones(grid.shape), 1.0, grid)


def test_green_potential_density_one_off_center(grid):
    lam = 0.3 + 0.2j
    # exact value -(1 - |lam|^2); the off-node log singularity limits accuracy
    assert green_potential(np.ones(grid.shape), lam, grid) == pytest.approx(-(1 - abs(lam) ** 2), abs=1e-4)


def test_green_potential_zhalf_oracle(grid):
    rho = zhalf_dpi_norm_sq(grid.points)
    mean, _ = monte_carlo_mu(zhalf_dpi_norm_sq, n=10**6, seed=7)
    # at lambda = 0 the kernel is log|z|, so G(0) = -int rho dmu
    assert green_potential(rho, 0.0, grid) == pytest.approx(-mean, abs=1e-3)
    assert green_potential(rho, 0.0, grid) == pytest.approx(-np.log(5.0), abs=1e-8)


def test_plain_monte_carlo_agrees_within_standard_error(grid):
    rho = zhalf_dpi_norm_sq(grid.points)
    mean, se = monte_carlo_mu(zhalf_dpi_norm_sq, n=10**6, seed=11, method="plain")
    assert abs(green_potential(rho, 0.0, grid) + mean) <= 5 * se


def test_green_potential_skips_coincident_node(grid):
    lam = grid.points[5, 3]
    res = green_potential(np.ones(grid.shape), lam, grid, detail=True)
    assert res.skipped_nodes == 1 and res.omitted_bound > 0
    assert np.isfinite(res.value)


def test_green_potential_split(grid):
    res = green_potential(np.ones(grid.shape), 0.3, grid, detail=True, split_radius=0.5)
    assert res.near + res.far == pytest.approx(res.value)
    assert res.near < 0 and res.far < 0


def test_green_potential_grid_matches_pointwise(grid, rng):
    rho = zhalf_dpi_norm_sq(grid.points) + np.abs(grid.points.real)
    G = green_potential_grid(rho, grid)
    assert G.shape == grid.shape
    for _ in range(5):
        i, a = rng.integers(0, grid.radial_count), rng.integers(0, grid.angular_count)
        assert G[i, a] == pytest.approx(green_potential(rho, grid.points[i, a], grid), abs=1e-12)
    assert np.all(G <= 0)


def test_green_potential_sup(grid):
    sup, lams, vals = green_potential_sup(np.ones(grid.shape), grid)
    assert sup == pytest.approx(1.0, abs=1e-6)
    assert len(lams) == len(vals)


def test_carleson_examples():
    coarse, fine = DiskGrid(48, 192), DiskGrid(72, 288)
    assert carleson_constant(np.zeros(coarse.shape), coarse) == 0.0
    c1 = carleson_constant(np.ones(coarse.shape), coarse)
    c2 = carleson_constant(np.ones(fine.shape), fine)
    assert abs(c1 - c2) / c2 <= 0.10
    assert c1 == pytest.approx(1 / 6, rel=1e-2)
    rep = carleson_constant(np.ones(coarse.shape), coarse, detail=True)
    assert "dyadic" in str(rep.as_dict()).lower()


def test_carleson_detects_non_carleson_density():
    grids = [DiskGrid(32, 128), DiskGrid(64, 256), DiskGrid(128, 512)]
    res = carleson_refinement(lambda z: (1 - np.abs(z)) ** -2.0, grids)
    assert res["carleson"] is False
    assert res["constants"][-1] > res["constants"][0]
    ok = carleson_refinement(lambda z: np.ones(z.shape), grids)
    assert ok["carleson"] is True


def test_carleson_monotone(small_grid, rng):
    a = rng.random(small_grid.shape)
    b = a + rng.random(small_grid.shape)
    assert carleson_constant(b, small_grid) >= carleson_constant(a, small_grid)


def test_refined_grid():
    g = DiskGrid(64, 256).refined()
    assert g.shape == (96, 384)
