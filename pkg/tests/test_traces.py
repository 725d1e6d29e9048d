import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import digamma

from moyal_lab import traces
from moyal_lab.errors import DomainError
from moyal_lab.traces import EstimatorWindow, SingularSpectrum

COUNT = 1_000_000


@pytest.fixture(scope="module")
def harmonic():
    return traces.harmonic_spectrum(COUNT)


@pytest.fixture(scope="module")
def harmonic_estimate(harmonic):
    return traces.dixmier_estimate(harmonic)


def test_spectrum_validation():
    with pytest.raises(DomainError):
        SingularSpectrum(np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        SingularSpectrum(np.array([1.0, -1.0]))
    s = SingularSpectrum.from_eigenvalues([0.5, -2.0, 1.0])
    np.testing.assert_array_equal(s.values, [2.0, 1.0, 0.5])
    np.testing.assert_array_equal(s.eigenvalues, [-2.0, 1.0, 0.5])
    np.testing.assert_array_equal(s.positive_part().values, [1.0, 0.5])
    np.testing.assert_array_equal(s.negative_part().values, [2.0])


def test_weak_quasinorm_examples(harmonic):
    assert traces.weak_quasinorm(harmonic) == pytest.approx(1.0)
    assert traces.weak_quasinorm(SingularSpectrum(np.array([2.0, 0, 0, 0]))) == 2.0
    assert traces.weak_quasinorm(SingularSpectrum(np.zeros(5))) == 0.0


@given(st.floats(0.01, 100), st.lists(st.floats(0, 10), min_size=1, max_size=50))
def test_weak_quasinorm_is_homogeneous(c, values):
    s = SingularSpectrum.from_values(values)
    assert traces.weak_quasinorm(s.scaled(c)) == pytest.approx(c * traces.weak_quasinorm(s))


def test_log_cesaro_harmonic_oracle(harmonic):
    n = COUNT - 1
    oracle = (digamma(n + 2.0) + np.euler_gamma) / np.log(2.0 + n)
    assert traces.log_cesaro(harmonic, n) == pytest.approx(oracle, abs=1e-12)
    assert traces.log_cesaro(SingularSpectrum(np.zeros(10)), 9) == 0.0
    with pytest.raises(DomainError):
        traces.log_cesaro(harmonic, COUNT)


def test_finite_rank_log_means_decay():
    s = SingularSpectrum(np.concatenate([[3.0, 2.0, 1.0], np.zeros(10**5)]))
    means = [traces.log_cesaro(s, n) for n in (10, 10**3, 10**5 - 1)]
    assert means[0] > means[1] > means[2]


def test_geometric_grid():
    np.testing.assert_array_equal(traces.geometric_grid(4, 64), [4, 8, 16, 32, 64])
    np.testing.assert_array_equal(traces.geometric_grid(4, 16, 2), [4, 6, 8, 11, 16])
    with pytest.raises(DomainError):
        traces.geometric_grid(10, 5)


def test_harmonic_is_normalized(harmonic_estimate):
    assert harmonic_estimate.limit == pytest.approx(1.0, abs=0.02)
    assert abs(harmonic_estimate.limit - 1.0) <= harmonic_estimate.error_bar
    assert harmonic_estimate.measurable
    assert harmonic_estimate.diagnostic <= 0.05


def test_oscillating_sequence_is_flagged():
    est = traces.dixmier_estimate(traces.oscillating_sequence(COUNT))
    assert est.diagnostic >= 0.2
    assert est.status == "not measurable at this scale"


def test_oscillating_rearrangement_is_sorted():
    s = traces.oscillating_spectrum(1000)
    assert np.all(np.diff(s.values) <= 0)
    assert s.values[0] == 3.0


def test_trace_class_is_null():
    s = SingularSpectrum(1.0 / np.arange(1, COUNT + 1) ** 2)
    assert abs(traces.dixmier_estimate(s).limit) <= 0.01


def test_diagnostic_examples(harmonic):
    assert traces.measurability_diagnostic(SingularSpectrum(np.zeros(1000))) == 0.0
    assert traces.measurability_diagnostic(harmonic) <= 0.05


@given(st.floats(0.1, 10))
def test_estimate_is_homogeneous(c):
    s = traces.harmonic_spectrum(20_000)
    w = EstimatorWindow(16)
    assert traces.dixmier_estimate(s.scaled(c), w).limit == pytest.approx(c * traces.dixmier_estimate(s, w).limit)


@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=6))
def test_estimate_of_positive_spectrum_is_nonnegative(weights):
    k = np.arange(1, 20_001)
    values = sum(w / k ** (1 + 0.1 * i) for i, w in enumerate(weights))
    est = traces.dixmier_estimate(SingularSpectrum(values), EstimatorWindow(16))
    assert est.limit >= -est.error_bar


def test_additive_on_commuting_summands():
    k = np.arange(1, 200_001)
    a, b = 1.0 / k, 0.5 / k + 1.0 / k**2
    w = EstimatorWindow(16)
    ea, eb = traces.dixmier_estimate(SingularSpectrum(a), w), traces.dixmier_estimate(SingularSpectrum(b), w)
    both = traces.dixmier_estimate(SingularSpectrum(a + b), w)
    assert abs(both.limit - ea.limit - eb.limit) <= both.error_bar + ea.error_bar + eb.error_bar


def test_tensor_examples(harmonic, harmonic_estimate):
    np.testing.assert_array_equal(traces.tensor_spectrum([1.0], harmonic).values, harmonic.values)
    half = traces.dixmier_estimate(traces.tensor_spectrum([0.5, 0.5], harmonic))
    assert half.limit == pytest.approx(1.0, abs=0.03)
    eps = 1e-6
    split = traces.dixmier_estimate(traces.tensor_spectrum([1.0, eps], harmonic))
    assert abs(split.limit - 1.0) <= 2 * eps + 0.03


@given(st.lists(st.floats(0.05, 2.0), min_size=1, max_size=4))
def test_tensor_factorization(s):
    t = traces.harmonic_spectrum(200_000)
    w = EstimatorWindow(64)
    est = traces.dixmier_estimate(traces.tensor_spectrum(s, t), w)
    base = traces.dixmier_estimate(t, w)
    assert abs(est.limit - sum(s) * base.limit) <= 0.03 * sum(s)


def test_direct_sum_examples():
    merged = traces.direct_sum_spectrum([SingularSpectrum(np.array([3.0])), SingularSpectrum(np.array([2.0, 1.0]))])
    np.testing.assert_array_equal(merged.values, [3, 2, 1])
    s = SingularSpectrum(np.array([4.0, 2.0, 2.0, 0.5]))
    singles = [SingularSpectrum(np.array([v])) for v in s.values]
    np.testing.assert_array_equal(traces.direct_sum_spectrum(singles).values, s.values)


@given(st.integers(0, 2**31), st.floats(0.1, 10))
def test_direct_sum_matches_dense_and_commutes_with_scaling(seed, c):
    r = np.random.default_rng(seed)
    blocks = [r.standard_normal((n, n)) for n in (3, 5, 4)]
    dense = np.zeros((12, 12))
    parts, start = [], 0
    for B in blocks:
        dense[start:start + len(B), start:start + len(B)] = B
        parts.append(SingularSpectrum(np.linalg.svd(B, compute_uv=False)))
        start += len(B)
    merged = traces.direct_sum_spectrum(parts)
    np.testing.assert_allclose(merged.values, np.linalg.svd(dense, compute_uv=False), atol=1e-12)
    scaled = traces.direct_sum_spectrum([p.scaled(c) for p in parts])
    np.testing.assert_allclose(scaled.values, c * merged.values, rtol=1e-12)


def test_signed_estimate_of_difference(harmonic):
    eig = np.concatenate([1.0 / np.arange(1, 100_001), -0.25 / np.arange(1, 100_001)])
    est = traces.signed_estimate(SingularSpectrum.from_eigenvalues(eig), EstimatorWindow(16))
    assert est.limit == pytest.approx(0.75, abs=est.error_bar + 0.01)
    assert set(est.to_json()) == {"limit", "error_bar", "window_variation", "n_grid"}


def test_estimate_json_fields(harmonic_estimate):
    data = harmonic_estimate.to_json()
    assert set(data) == {"limit", "error_bar", "window_variation", "n_grid"}
    assert data["n_grid"][0] == 64
    rows = harmonic_estimate.plot_rows()
    assert len(rows) == len(data["n_grid"])
    assert np.isnan(rows[0][2]) and not np.isnan(rows[-1][2])


def test_short_windows_are_rejected():
    with pytest.raises(DomainError):
        traces.dixmier_estimate(traces.harmonic_spectrum(100), EstimatorWindow(64))
