import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moyal_lab import plane
from moyal_lab.errors import AlignmentError, ConfigurationError, DimensionError, DomainError
from moyal_lab.plane import Boundary, GridOperator, GridSpec, PlaneContext, Symbol

lattice = st.tuples(st.integers(-8, 7), st.integers(-8, 7))


def test_theta_examples():
    th = plane.make_theta(2, 1.0)
    np.testing.assert_array_equal(th.matrix, [[0, 1], [-1, 0]])
    np.testing.assert_array_equal(th.inverse, [[0, -1], [1, 0]])
    np.testing.assert_allclose(plane.make_theta(2, 2.0).inverse, [[0, -0.5], [0.5, 0]])
    with pytest.raises(DimensionError):
        plane.make_theta(3, 1.0)
    with pytest.raises(DomainError):
        plane.make_theta(2, -1.0)


def test_theta_four_dimensional_blocks():
    th = plane.make_theta(4, 0.5)
    assert th.pfaffian == pytest.approx(0.25)
    assert th.det == pytest.approx(0.0625)
    np.testing.assert_allclose(th.matrix @ th.inverse, np.eye(4), atol=1e-15)


def test_auto_resolution_is_compatible():
    ctx = PlaneContext.build(2, 48, None, 2.0)
    assert ctx.grid.L == pytest.approx(np.sqrt(4 * np.pi * 48 / 2.0))
    assert ctx.grid.phase_defect(ctx.theta) < 1e-12
    ctx = PlaneContext.build(2, 32, 16.0, None)
    assert ctx.theta.theta0 == pytest.approx(np.pi / 2)


def test_incompatible_theta_names_the_fix():
    with pytest.raises(ConfigurationError) as err:
        PlaneContext.build(2, 32, 16.0, 1.0)
    assert err.value.field == "theta0"
    assert "1.57079632679" in str(err.value)


def test_open_box_accepts_any_theta():
    PlaneContext.build(2, 32, 16.0, 1.0, boundary="open-box")


def test_off_lattice_shift_rejected(torus16):
    with pytest.raises(AlignmentError):
        torus16.shift([0.3, 0.0])


def test_shift_at_zero_is_identity(torus16):
    np.testing.assert_array_equal(torus16.shift([0.0, 0.0]).matrix, np.eye(torus16.grid.size))


@given(lattice, lattice)
def test_group_law_on_torus(torus16, ti, si):
    g, th = torus16.grid, torus16.theta
    t, s = np.array(ti) * g.spacing, np.array(si) * g.spacing
    lhs = torus16.shift(t).matrix @ torus16.shift(s).matrix
    rhs = np.exp(0.5j * th.pairing(t, s)) * torus16.shift(t + s).matrix
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@given(lattice, st.integers(0, 2**31))
def test_shifts_preserve_norm(torus16, ti, seed):
    g = torus16.grid
    xi = np.random.default_rng(seed).standard_normal((g.size, 2)) @ [1, 1j]
    out = torus16.shift(np.array(ti) * g.spacing).matrix @ xi
    assert abs(np.linalg.norm(out) - np.linalg.norm(xi)) <= 1e-12 * np.linalg.norm(xi)


@given(lattice)
def test_shift_helpers_match_dense_products(torus16, ti):
    g, th = torus16.grid, torus16.theta
    t = np.array(ti) * g.spacing
    x = np.random.default_rng(0).standard_normal((g.size, g.size))
    U = torus16.shift(t).matrix
    np.testing.assert_allclose(plane.shift_left(g, th, t, x), U @ x, atol=1e-12)
    np.testing.assert_allclose(plane.shift_right(g, th, t, x), x @ U, atol=1e-12)


@given(lattice)
def test_lattice_delta_quantizes_to_shift(torus16, si):
    s0 = np.array(si) * torus16.grid.spacing
    X = torus16.quantize(plane.lattice_delta(torus16.grid, s0))
    assert np.max(np.abs(X.matrix - torus16.shift(s0).matrix)) <= 1e-12


@given(st.floats(0.7, 1.5))
def test_l2_isometry_after_calibration(torus32, sigma):
    f = plane.gaussian_symbol(torus32.grid, sigma)
    X = torus32.quantize(f)
    assert plane.l2_calibration(torus32.grid) * X.hs_norm() == pytest.approx(f.l2_norm(), rel=1e-6)


def random_symbol(grid, seed):
    r = np.random.default_rng(seed)
    envelope = np.exp(-np.sum(grid.points**2, axis=1) / 4)
    return Symbol(grid, (r.standard_normal(grid.size) + 1j * r.standard_normal(grid.size)) * envelope)


@given(st.integers(0, 2**31))
def test_adjoint_symbol(torus16, seed):
    f = random_symbol(torus16.grid, seed)
    lhs = torus16.quantize(f).matrix.conj().T
    rhs = torus16.quantize(f.reversed_conjugate()).matrix
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@given(st.integers(0, 2**31))
def test_dequantize_inverts_quantize(torus16, seed):
    f = random_symbol(torus16.grid, seed)
    back = plane.dequantize(torus16.quantize(f), torus16.theta)
    assert np.max(np.abs(back.values - f.values)) <= 1e-12


def test_dequantize_inverts_quantize_open_box(box16):
    grid, th = box16
    f = random_symbol(grid, 7)
    back = plane.dequantize(plane.quantize(grid, th, f), th)
    assert np.max(np.abs(back.values - f.values)) <= 1e-12


def test_grid_trace_of_gaussian(torus32):
    # tau(Op f) = sqrt(2 pi) f(0) / theta0 in d = 2
    X = torus32.quantize(plane.gaussian_symbol(torus32.grid))
    tau = plane.grid_tau(X, torus32.theta)
    assert tau.real == pytest.approx(np.sqrt(2 * np.pi) / torus32.theta.theta0, rel=1e-12)


def test_multiplier_examples(box16):
    grid, th = box16
    np.testing.assert_array_equal(plane.multiplier(grid, lambda u: 1.0).matrix, np.eye(grid.size))
    s = np.array([3, -2]) * grid.spacing
    U = plane.twisted_shift(grid, th, s).matrix
    for k in (1, 2):
        D = plane.multiplier(grid, plane.coordinate(k)).matrix
        assert np.max(np.abs(D @ U - U @ D - s[k - 1] * U)) <= 1e-12


def test_multiplier_rejects_nonfinite(torus16):
    with pytest.raises(DomainError, match="not finite"):
        plane.multiplier_values(torus16.grid, lambda u: np.where(u[:, 0] == 0, np.inf, 1.0))


def test_phase_conjugation_of_shift(torus16):
    g, th = torus16.grid, torus16.theta
    s = np.array([2, 5]) * g.spacing
    t = th.matrix @ (np.array([1, -3]) * g.spacing)
    U = torus16.shift(s)
    E = plane.multiplier(g, lambda u: np.exp(1j * u @ t)).matrix
    lhs = E @ U.matrix @ E.conj().T
    assert np.max(np.abs(lhs - np.exp(1j * t @ s) * U.matrix)) <= 1e-12


@given(st.integers(0, 2**31))
def test_product_and_adjoint_identities(torus16, seed):
    g = torus16.grid
    r = np.random.default_rng(seed)
    a = GridOperator(g, r.standard_normal((g.size, g.size)) + 1j * r.standard_normal((g.size, g.size)))
    b = GridOperator(g, r.standard_normal((g.size, g.size)))
    np.testing.assert_array_equal(plane.materialize_product(a, plane.identity(g)).matrix, a.matrix)
    np.testing.assert_array_equal(plane.adjoint(plane.adjoint(a)).matrix, a.matrix)
    lhs = plane.adjoint(plane.materialize_product(a, b)).matrix
    rhs = plane.materialize_product(plane.adjoint(b), plane.adjoint(a)).matrix
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_operators_on_different_grids_do_not_mix(torus16, torus32):
    with pytest.raises(DimensionError):
        plane.materialize_product(plane.identity(torus16.grid), plane.identity(torus32.grid))


def test_grid_validation():
    with pytest.raises(ConfigurationError) as err:
        GridSpec(2, 15, 8.0)
    assert err.value.field == "N"
    with pytest.raises(ValueError):
        GridSpec(2, 16, 8.0, "periodic")


def test_open_box_shift_drops_outgoing_mass():
    grid = GridSpec(2, 8, 4.0, Boundary.OPEN_BOX)
    U = plane.twisted_shift(grid, plane.make_theta(2, 1.0), [0.5, 0.0]).matrix
    assert np.count_nonzero(U) == grid.size - grid.N
