"""Acceptance criteria, one test each, with their tolerances and runtime budgets.

Every test prints a PASS/FAIL line; the lines are repeated in the
"acceptance criteria" section at the end of the pytest run.
"""

import time

import pytest

from moyal_lab import experiments as ex
from moyal_lab.config import ExperimentConfig

from conftest import ACCEPTANCE_LINES

MINUTE = 60.0


def record(k: int, title: str, checks, seconds: float, budget: float) -> None:
    within = seconds < budget
    ok = within and all(c.passed for c in checks)
    parts = ", ".join(f"{c.name}={c.value:.3g} (threshold {c.threshold:.3g}){'' if c.passed else ' FAILED'}"
                      for c in checks)
    line = f"{'PASS' if ok else 'FAIL'} criterion {k:2d} {title}: {parts}; runtime {seconds:.1f} s / {budget:.0f} s"
    ACCEPTANCE_LINES[k] = line
    print(line)
    failed = [c.name for c in checks if not c.passed]
    assert not failed, f"criterion {k}: {failed}"
    assert within, f"criterion {k}: runtime {seconds:.1f} s over budget {budget:.0f} s"


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def pick(checks, *names):
    found = [c for c in checks if c.name in names]
    assert len(found) == len(names)
    return found


def test_criterion_01_algebra():
    checks, t = timed(ex.algebra_checks, 32, 16.0)
    record(1, "algebra exactness", checks, t, 10)


def test_criterion_02_l2_isometry():
    checks, t = timed(ex.quantization_checks, 64, 16.0)
    record(2, "L2 isometry", pick(checks, "quantize.l2_isometry"), t, 30)


def test_criterion_03_matrix_units():
    checks, t = timed(ex.fock_checks, 32, 64)
    record(3, "matrix units", pick(checks, "fock.matrix_units", "fock.matrix_units_decrease"), t, 2 * MINUTE)


def test_criterion_04_fourier_multiplier():
    checks, t = timed(ex.fourier_multiplier_checks, 32)
    record(4, "Fourier multiplier dual route", checks, t, 2 * MINUTE)


def test_criterion_05_sobolev_translation():
    checks, t = timed(ex.sobolev_translation_checks, 32, count=5)
    record(5, "Sobolev translation isometry", checks, t, 2 * MINUTE)


@pytest.mark.slow
def test_criterion_06_blocks():
    checks, t = timed(ex.block_checks, side=9)
    record(6, "block decomposition", checks, t, 5 * MINUTE)


def test_criterion_07_kernel_bound():
    checks, t = timed(ex.kernel_checks, 20)
    record(7, "kernel trace-norm bound", checks, t, MINUTE)


def test_criterion_08_tensor_factorization():
    (checks, _), t = timed(ex.trace_checks, 1_000_000)
    record(8, "tensor factorization", pick(checks, "traces.tensor_factorization"), t, 30)


@pytest.mark.slow
def test_criterion_09_direct_sum():
    checks, t = timed(ex.direct_sum_checks)
    record(9, "direct-sum merge", checks, t, MINUTE)


# ---------------------------------------------------------------------------
# criteria 10-13 share one pass of the pipeline over N = 32, 48, 64


@pytest.fixture(scope="module")
def config():
    return ExperimentConfig()


@pytest.fixture(scope="module")
def sweep(config):
    runs, seconds = {}, {}
    for N in config.sweep_N:
        runs[N], seconds[N] = timed(ex.cif_run, config, N)
    return runs, seconds


@pytest.mark.slow
def test_criterion_10_cwikel_surrogates(sweep):
    runs, seconds = sweep
    samples, extra = [], 0.0
    for N in sorted(runs):
        s, t = timed(ex.cwikel_sample, runs[N], with_correction=False)
        samples.append(s)
        extra += t
    record(10, "Cwikel surrogates", ex.cwikel_checks(samples, with_correction=False),
           sum(seconds.values()) + extra, 15 * MINUTE)


@pytest.mark.slow
def test_criterion_11_cif_main(sweep, config):
    runs, seconds = sweep
    ordered = [runs[N] for N in sorted(runs)]
    checks = ex.cif_main_checks(ordered[-1], config) + [ex.trend_check(ordered)]
    record(11, "integration formula", checks, sum(seconds.values()), 20 * MINUTE)


@pytest.mark.slow
def test_criterion_12_invariance(sweep, config):
    runs, seconds = sweep
    N = max(runs)
    (checks, _), t = timed(ex.invariance_checks, runs[N], config)
    assert len(checks) == 3
    record(12, "translation invariance", checks, seconds[N] + t, 20 * MINUTE)


@pytest.mark.slow
def test_criterion_13_zero_trace(sweep, config):
    runs, seconds = sweep
    N = max(runs)
    (check, _, _), t = timed(ex.zero_trace_check, runs[N], config)
    record(13, "zero-trace null", [check], seconds[N] + t, 10 * MINUTE)
