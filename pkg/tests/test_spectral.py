import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from moyal_lab import plane, spectral
from moyal_lab.errors import DomainError, NumericalError
from moyal_lab.plane import Symbol


@pytest.fixture(scope="module")
def square16(torus16):
    y = torus16.quantize(plane.gaussian_symbol(torus16.grid)).matrix
    X = plane.GridOperator(torus16.grid, y.conj().T @ y)
    return X, plane.dequantize(X, torus16.theta)


def test_zero_symbol_gives_zero_operator(torus16):
    c = spectral.cwikel_operator(Symbol.zeros(torus16.grid), torus16.theta)
    assert not np.any(c.matrix.matrix)
    assert not np.any(spectral.singular_spectrum(spectral.symmetrize(c)).values)


@pytest.mark.parametrize("variant", ["smooth", "floor", "power"])
def test_symmetrized_is_hermitian_with_matching_trace(torus16, square16, variant):
    X, fx = square16
    c = spectral.cwikel_operator(fx, torus16.theta, variant, x=X)
    sym = spectral.symmetrize(c).matrix
    assert np.max(np.abs(sym - sym.conj().T)) <= 1e-12
    eig = spectral.singular_spectrum(sym, hermitian=True).eigenvalues
    assert np.sum(eig) == pytest.approx(np.trace(c.matrix.matrix).real, abs=1e-10)


def test_weights_of_variants():
    u = np.array([[0.0, 0.0], [1.5, -0.5], [3.0, 4.0]])
    np.testing.assert_allclose(spectral.CwikelVariant.SMOOTH.weights(u), [1.0, 1 / 3.5, 1 / 26])
    np.testing.assert_allclose(spectral.CwikelVariant.FLOOR.weights(u), [1.0, 1 / 3.0, 1 / 26])
    np.testing.assert_allclose(spectral.CwikelVariant.POWER.weights(u), [1.0, 3.5**-1.5, 26**-1.5])


def test_correction_function_vanishes_on_integers():
    u = np.array([[a, b] for a in range(-4, 5) for b in range(-4, 5)], dtype=float)
    assert np.max(np.abs(spectral.correction_function(u))) <= 1e-12


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_correction_function_is_bounded(a, b):
    assert abs(spectral.correction_function(np.array([[a, b]]))[0]) <= 6.0 + 1e-9


def test_correction_sup_of_box(torus32):
    # the sup of |k| is the left limit 6 at the corner (2, 2)
    assert spectral.correction_sup(torus32.grid) == pytest.approx(6.0, abs=1e-6)


def test_correction_term_equals_difference_of_variants(torus16, square16):
    X, fx = square16
    corr = spectral.correction_term(fx, torus16.theta, x=X)
    g = spectral.cwikel_operator(fx, torus16.theta, "smooth", x=X).matrix.matrix
    h = spectral.cwikel_operator(fx, torus16.theta, "floor", x=X).matrix.matrix
    assert np.max(np.abs(corr.operator.matrix - (g - h))) <= 1e-12
    assert corr.sup_k <= corr.sup_box


def test_spectrum_examples():
    s = spectral.singular_spectrum(np.diag([1.0, 3.0, 2.0]))
    np.testing.assert_allclose(s.values, [3, 2, 1])
    u, v = np.array([1.0, 2.0, 2.0]), np.array([0.0, 3.0, 4.0j])
    r1 = spectral.singular_spectrum(np.outer(u, v.conj()), hermitian=False).values
    np.testing.assert_allclose(r1, [15.0, 0.0, 0.0], atol=1e-12)


@given(st.integers(0, 2**31))
def test_spectrum_is_unitarily_invariant(seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((12, 12)) + 1j * r.standard_normal((12, 12))
    U = unitary_group.rvs(12, random_state=r)
    V = unitary_group.rvs(12, random_state=r)
    lhs = spectral.singular_spectrum(U @ A @ V, hermitian=False).values
    rhs = spectral.singular_spectrum(A, hermitian=False).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_spectrum_reports_bad_input():
    bad = np.eye(3)
    bad[0, 1] = np.nan
    with pytest.raises(NumericalError, match="finite entries: False"):
        spectral.singular_spectrum(bad, hermitian=False)
    with pytest.raises(DomainError, match="not positive"):
        spectral.singular_spectrum(np.diag([1.0, -0.5]), hermitian=True, require_positive=True)


def test_trace_norm_of_diagonal():
    assert spectral.trace_norm(np.diag([3.0, -4.0, 1j])) == pytest.approx(8.0)


@pytest.fixture(scope="module")
def small_blocks():
    grid = spectral.box_grid(5, 2)
    f = plane.bump_symbol(grid, 1.0)
    return spectral.block_decompose(f, plane.make_theta(2, 1.0))


def test_blocks_reconstruct_floor_product(small_blocks):
    total = sum(T.matrix for _, _, T in small_blocks)
    assert np.max(np.abs(total - small_blocks.floor_product().matrix)) <= 1e-10


def test_blocks_are_orthogonal(small_blocks):
    for l1 in small_blocks.offsets:
        for l2 in small_blocks.offsets:
            assert spectral.orthogonality_residual(small_blocks, l1, l2) <= 1e-12


def test_block_merge_matches_dense(small_blocks):
    for l1, l2, T in small_blocks:
        dense = spectral.singular_spectrum(T, hermitian=False).values
        assert np.max(np.abs(dense - small_blocks.block_spectra(l1, l2).values)) <= 1e-10


def test_local_equivalence(small_blocks):
    for l1 in small_blocks.offsets:
        assert spectral.local_block_equivalence(small_blocks, (0, 0), l1) <= 1e-12
    assert spectral.local_block_equivalence(small_blocks, (1, -1), (0, 1)) <= 1e-10
    with pytest.raises(DomainError):
        spectral.local_block_equivalence(small_blocks, (-3, 0), (0, 0))


def test_block_decomposition_preconditions(torus16):
    with pytest.raises(DomainError, match="open-box"):
        spectral.block_decompose(plane.bump_symbol(torus16.grid), torus16.theta)
    grid = spectral.box_grid(5, 2)
    with pytest.raises(DomainError):
        spectral.block_decompose(plane.gaussian_symbol(grid, 2.0), plane.make_theta(2, 1.0))


def test_kernel_examples():
    assert spectral.kernel_operator(np.zeros((8, 8))).coeff_bound == 0.0
    assert spectral.kernel_operator(np.zeros((8, 8))).trace_norm() == 0.0
    n = 32
    t = np.arange(n) / n
    a = 1 + 0.5 * np.cos(2 * np.pi * t)
    b = np.sin(2 * np.pi * t) + 0.25j
    op = spectral.kernel_operator(np.outer(a, b.conj()))
    closed = np.sqrt(np.mean(np.abs(a) ** 2) * np.mean(np.abs(b) ** 2))
    assert op.trace_norm() == pytest.approx(closed, abs=1e-12)
    assert op.coeff_bound >= op.trace_norm()
    assert op.smooth


@given(st.integers(0, 2**31))
def test_fourier_bound_on_trig_polynomials(seed):
    from moyal_lab.experiments import random_trig_kernel

    K = random_trig_kernel(np.random.default_rng(seed), 24)
    op = spectral.kernel_operator(K)
    assert op.trace_norm() <= op.coeff_bound + 1e-8


def test_kernel_shape_validation():
    with pytest.raises(DomainError):
        spectral.kernel_operator(np.zeros((4, 5)))
    with pytest.raises(DomainError):
        spectral.kernel_operator(np.zeros(4))
