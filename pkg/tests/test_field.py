import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opcorona.disk import DiskGrid, GridError
from opcorona.field import (
    AnalyticMatrixField,
    FieldError,
    analyticity_defect,
    boundary_trace,
    c1_refinement,
    corona_delta,
    derivative,
    field_defect,
    involutions,
    samples_of,
)
from oracles import fd_wirtinger, random_polynomial_coefficients, zhalf_projection


def naive_eval(coef, z):
    return sum(A * z**n for n, A in enumerate(coef))


def test_eval_examples():
    F = AnalyticMatrixField([[[1], [0]], [[0], [1]]])
    assert np.allclose(F(0.5j), [[1], [0.5j]])
    A0 = np.array([[1 + 2j, 3], [0, -1]])
    C = AnalyticMatrixField.constant(A0)
    assert np.array_equal(C(0.3 - 0.4j), A0)
    assert np.array_equal(F(0.0), F.coefficients[0])


def test_eval_matches_power_sum(rng):
    coef = random_polynomial_coefficients(rng, 3, 2, 3)
    F = AnalyticMatrixField(coef)
    z = 0.7 * np.exp(1j * np.pi / 3)
    assert np.abs(F(z) - naive_eval(coef, z)).max() <= 1e-14


def test_eval_outside_disk():
    with pytest.raises(FieldError):
        AnalyticMatrixField.constant(np.eye(2))(1.5)


def test_bad_coefficients():
    with pytest.raises(FieldError):
        AnalyticMatrixField(np.zeros((2, 2, 2, 2)))


def test_derivative_examples(zhalf):
    assert derivative(AnalyticMatrixField.constant(np.eye(2))) == AnalyticMatrixField(np.zeros((1, 2, 2)))
    assert np.array_equal(zhalf.derivative().coefficients, [[[1], [0]]])


def test_derivative_finite_difference(rng):
    F = AnalyticMatrixField(random_polynomial_coefficients(rng, 2, 2, 4))
    z = 0.8 * np.sqrt(rng.random(5)) * np.exp(2j * np.pi * rng.random(5))
    d, dbar = fd_wirtinger(lambda w: F.eval(w, check=False), z, h=1e-5)
    assert np.abs(F.derivative()(z) - d).max() <= 1e-8
    assert np.abs(dbar).max() <= 1e-8


def test_involutions(zhalf):
    inv = involutions(zhalf)
    assert np.array_equal(inv["sharp"].coefficients, [[[0, 0.5]], [[1, 0]]])
    assert inv["transpose"].shape == (1, 2)
    A0 = np.array([[1 + 1j, 2], [3j, 4]])
    assert np.array_equal(AnalyticMatrixField.constant(A0).sharp().coefficients[0], A0.conj().T)


def test_sharp_identity(rng):
    F = AnalyticMatrixField(random_polynomial_coefficients(rng, 3, 2, 3))
    assert F.sharp().sharp() == F
    z = 0.3 + 0.5j
    assert np.allclose(F(z).conj().T, F.sharp()(np.conj(z)))
    assert np.allclose(F.conjugate()(z), np.conj(F(np.conj(z))))


def test_algebra(rng):
    F = AnalyticMatrixField(random_polynomial_coefficients(rng, 2, 3, 2))
    G = AnalyticMatrixField(random_polynomial_coefficients(rng, 3, 2, 1))
    z = 0.4 - 0.3j
    assert np.allclose((F @ G)(z), F(z) @ G(z))
    assert np.allclose((F - F)(z), 0)
    assert np.allclose(F.dilate(0.5)(z), F(0.5 * z))
    assert F.dilate(1.0) is F
    with pytest.raises(FieldError):
        F.dilate(1.2)
    with pytest.raises(FieldError):
        F @ F


def test_dilate_example(zhalf):
    assert np.array_equal(zhalf.dilate(0.5).coefficients, [[[0], [0.5]], [[0.5], [0]]])


def test_corona_delta_examples(grid, zhalf, const_col, diag_1_z):
    d = corona_delta(const_col, grid)
    assert d.delta == pytest.approx(1.0) and d.delta_tilde == pytest.approx(1.0)
    d = corona_delta(zhalf, grid)
    assert d.delta == pytest.approx(0.5, abs=1e-6)
    assert d.delta_tilde == pytest.approx(np.sqrt(5) / 2, abs=1e-12)
    assert d.delta_tilde >= d.delta - 1e-8
    d = corona_delta(diag_1_z, grid)
    assert d.c1_delta == pytest.approx(grid.radial_nodes[0], rel=1e-9)


def test_corona_delta_degenerate(grid):
    with pytest.raises(FieldError):
        corona_delta(AnalyticMatrixField(np.zeros((1, 2, 1))), grid)


def test_corona_delta_scaling_and_zero_row(small_grid, rng):
    F = AnalyticMatrixField(random_polynomial_coefficients(rng, 2, 1, 2))
    d = corona_delta(F, small_grid)
    d3 = corona_delta(F.scale(3.0), small_grid)
    for key in ("delta", "delta_tilde", "c1_delta"):
        assert getattr(d3, key) == pytest.approx(3 * getattr(d, key), rel=1e-12)
    padded = AnalyticMatrixField(np.concatenate([F.coefficients, np.zeros((3, 1, 1))], axis=1))
    assert corona_delta(padded, small_grid).delta == pytest.approx(d.delta, rel=1e-12)


def test_c1_refinement(diag_1_z, zhalf):
    grids = [DiskGrid(32, 128), DiskGrid(64, 256)]
    bad = c1_refinement(diag_1_z, grids)
    assert not bad["passed"] and bad["values"][1] < bad["values"][0]
    assert "lower bound" in bad["note"]
    assert c1_refinement(zhalf, grids)["passed"]


def test_boundary_trace_examples(grid, zhalf):
    zb = grid.boundary_nodes
    eye = np.eye(2)
    assert field_defect(np.conj(zb)[:, None, None] * eye, grid) == pytest.approx(1.0)
    assert field_defect(zb[:, None, None] ** 2 * eye, grid) <= 1e-8
    assert field_defect(zhalf_projection(zb), grid) > 0.1
    with pytest.raises(GridError):
        boundary_trace(np.zeros((10, 2, 2)), grid)


def test_boundary_trace_synthesis(grid, rng):
    F = AnalyticMatrixField(random_polynomial_coefficients(rng, 2, 2, 3))
    tr = boundary_trace(F, grid)
    assert np.abs(tr.synthesize() - tr.samples).max() <= 1e-8
    assert analyticity_defect(tr) <= 1e-8
    assert np.allclose(tr.analytic_part(3).coefficients, F.coefficients)
    norms = tr.mode_norms()
    assert norms[0] > 0 and norms[-1] < 1e-12


def test_samples_of(grid, zhalf):
    i, b = samples_of(zhalf, grid)
    assert i.shape == grid.shape + (2, 1) and b.shape == (grid.angular_count, 2, 1)
    with pytest.raises(TypeError):
        samples_of(3, grid)


coef_strategy = st.integers(0, 2**31 - 1)


@settings(max_examples=30, deadline=None)
@given(seed=coef_strategy, rows=st.integers(1, 4), cols=st.integers(1, 3), deg=st.integers(0, 4))
def test_polynomial_fields_are_analytic(seed, rows, cols, deg):
    grid = DiskGrid(8, 64)
    F = AnalyticMatrixField(random_polynomial_coefficients(np.random.default_rng(seed), rows, cols, deg))
    assert analyticity_defect(boundary_trace(F, grid)) <= 1e-8
    assert F.sharp().sharp() == F
    assert F.transpose().transpose() == F


@settings(max_examples=30, deadline=None)
@given(seed=coef_strategy, x=st.floats(-0.6, 0.6), y=st.floats(-0.6, 0.6))
def test_derivative_consistency(seed, x, y):
    F = AnalyticMatrixField(random_polynomial_coefficients(np.random.default_rng(seed), 2, 2, 3))
    z = np.array([complex(x, y)])
    d, _ = fd_wirtinger(lambda w: F.eval(w, check=False), z, h=1e-6)
    assert np.abs(F.derivative()(z) - d).max() <= 1e-6
