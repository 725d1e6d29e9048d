"""Singular-value sequence analytics: weak-l1 quasinorm and log-Cesaro estimators.

The ultrafilter limit behind a Dixmier trace is replaced by a least-squares
fit ``D_n ~ c0 + c1 / log(2 + n)`` over a geometric grid of ``n``, with a
guard on the log-means of one-octave windows::

    window_mean(a, b) = (S_b - S_a) / (log(2 + b) - log(2 + a)),   S_n = sum_{k<=n} mu_k.

A spectrum is called measurable at this scale when every window mean is
close to the fitted limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    """Descending nonnegative values; ``eigenvalues`` keeps signs for Hermitian sources."""

    values: np.ndarray
    eigenvalues: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size and (np.any(v < 0) or np.any(np.diff(v) > 0)):
            raise DomainError("singular values must be nonnegative and non-increasing")
        object.__setattr__(self, "values", v)
        if self.eigenvalues is not None:
            e = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
            if e.shape != v.shape:
                raise DomainError("eigenvalues must align with the singular values")
            object.__setattr__(self, "eigenvalues", e)

    @classmethod
    def from_values(cls, values, meta: dict | None = None) -> "SingularSpectrum":
        """Sort arbitrary nonnegative values into a spectrum (stable for ties)."""
        v = np.abs(np.asarray(values, dtype=float).reshape(-1))
        order = np.argsort(-v, kind="stable")
        return cls(v[order], meta=dict(meta or {}))

    @classmethod
    def from_eigenvalues(cls, eigenvalues, meta: dict | None = None) -> "SingularSpectrum":
        """Order real eigenvalues by descending modulus, keeping their signs."""
        e = np.asarray(eigenvalues, dtype=float).reshape(-1)
        order = np.argsort(-np.abs(e), kind="stable")
        return cls(np.abs(e[order]), e[order], dict(meta or {}))

    @property
    def count(self) -> int:
        return int(self.values.size)

    def scaled(self, c: float) -> "SingularSpectrum":
        c = float(c)
        eig = None if self.eigenvalues is None else c * self.eigenvalues
        return SingularSpectrum(abs(c) * self.values, eig, dict(self.meta))

    def positive_part(self) -> "SingularSpectrum":
        if self.eigenvalues is None:
            return self
        e = self.eigenvalues
        return SingularSpectrum.from_values(e[e > 0], self.meta)

    def negative_part(self) -> "SingularSpectrum":
        """Moduli of the negative eigenvalues."""
        if self.eigenvalues is None:
            return SingularSpectrum(np.zeros(0), meta=self.meta)
        e = self.eigenvalues
        return SingularSpectrum.from_values(-e[e < 0], self.meta)


def harmonic_spectrum(count: int) -> SingularSpectrum:
    return SingularSpectrum(1.0 / np.arange(1, count + 1))


def oscillating_sequence(count: int) -> np.ndarray:
    """``(2 + (-1)^floor(log2(k+1))) / (k+1)`` in index order; octave log-means alternate 3 and 1."""
    k = np.arange(count)
    sign = np.where(np.floor(np.log2(k + 1)).astype(int) % 2 == 0, 1.0, -1.0)
    return (2.0 + sign) / (k + 1)


def oscillating_spectrum(count: int) -> SingularSpectrum:
    """Decreasing rearrangement of :func:`oscillating_sequence`; octave log-means alternate 2.25 and 1.75."""
    return SingularSpectrum.from_values(oscillating_sequence(count))


def _values(s) -> np.ndarray:
    """Values of a spectrum, or a raw nonnegative sequence taken in the given order."""
    if isinstance(s, SingularSpectrum):
        return s.values
    v = np.asarray(s, dtype=float).reshape(-1)
    if np.any(v < 0):
        raise DomainError("sequence must be nonnegative")
    return v


def weak_quasinorm(s: SingularSpectrum, n_max: int | None = None) -> float:
    """``sup_k (k+1) mu_k`` over ``k <= n_max`` (default: the whole sequence)."""
    v = _values(s)
    v = v if n_max is None else v[: n_max + 1]
    if v.size == 0:
        return 0.0
    return float(np.max(np.arange(1, v.size + 1) * v))


def log_cesaro(s: SingularSpectrum, n: int) -> float:
    """``(1/log(2+n)) sum_{k<=n} mu_k``."""
    v = _values(s)
    if n < 0 or n >= v.size:
        raise DomainError(f"n={n} outside 0..{v.size - 1}")
    return float(np.sum(v[: n + 1]) / np.log(2.0 + n))


def geometric_grid(n_min: int, n_max: int, points_per_octave: int = 1) -> np.ndarray:
    """Integers ``n_min * 2^(j/ppo)`` up to ``n_max``, deduplicated."""
    if n_min < 1 or n_max < n_min:
        raise DomainError(f"empty estimator window [{n_min}, {n_max}]")
    octaves = np.log2(n_max / n_min)
    j = np.arange(int(np.floor(octaves * points_per_octave + 1e-9)) + 1)
    return np.unique(np.round(n_min * 2.0 ** (j / points_per_octave)).astype(int))


@dataclass(frozen=True)
class TraceEstimate:
    limit: float
    error_bar: float
    window_variation: float
    residual: float
    n_grid: list[int]
    raw_means: list[float]
    window_means: list[float]
    slope: float = 0.0
    diagnostic: float = 0.0
    guard: float = 0.1

    @property
    def measurable(self) -> bool:
        """Window means stay within ``guard`` (relative) of the limit."""
        return self.diagnostic <= self.guard

    @property
    def status(self) -> str:
        return "measurable" if self.measurable else "not measurable at this scale"

    def to_json(self) -> dict:
        return {
            "limit": self.limit,
            "error_bar": self.error_bar,
            "window_variation": self.window_variation,
            "n_grid": [int(n) for n in self.n_grid],
        }

    def plot_rows(self) -> list[tuple[int, float, float]]:
        """``(n, D_n, window_mean)``; the window ending at ``n`` (NaN for the first octave)."""
        offset = len(self.n_grid) - len(self.window_means)
        rows = []
        for i, (n, dn) in enumerate(zip(self.n_grid, self.raw_means)):
            wm = self.window_means[i - offset] if i >= offset else float("nan")
            rows.append((int(n), float(dn), float(wm)))
        return rows


@dataclass(frozen=True)
class EstimatorWindow:
    """Where along the spectrum the log-Cesaro means are sampled."""

    n_min: int = 64
    n_max: int | None = None
    points_per_octave: int = 1
    guard: float = 0.1

    def grid_for(self, count: int) -> np.ndarray:
        top = count - 1 if self.n_max is None else min(self.n_max, count - 1)
        return geometric_grid(self.n_min, top, self.points_per_octave)


def dixmier_estimate(s: SingularSpectrum, window: EstimatorWindow | None = None) -> TraceEstimate:
    """Extrapolated log-Cesaro limit with a one-octave window guard.

    ``s`` may also be a raw sequence, which is used in the given order.
    ``error_bar`` is the RMS fit residual plus the window variation.
    """
    window = window or EstimatorWindow()
    values = _values(s)
    if values.size < 2:
        raise DomainError("spectrum too short for an estimate")
    n = window.grid_for(values.size)
    if n.size < 3:
        raise DomainError(f"only {n.size} sample points in the estimator window")
    partial = np.cumsum(values)
    S = partial[n]
    logs = np.log(2.0 + n)
    D = S / logs
    A = np.column_stack([np.ones_like(logs), 1.0 / logs])
    coef, *_ = np.linalg.lstsq(A, D, rcond=None)
    residual = float(np.sqrt(np.mean((A @ coef - D) ** 2)))
    ppo = window.points_per_octave
    wm = (S[ppo:] - S[:-ppo]) / (logs[ppo:] - logs[:-ppo])
    limit = float(coef[0])
    variation = float(np.max(np.abs(wm - limit))) if wm.size else 0.0
    scale = abs(limit)
    if scale > 0:
        diagnostic = variation / scale
    else:
        diagnostic = 0.0 if variation == 0 else float("inf")
    return TraceEstimate(
        limit=limit,
        error_bar=residual + variation,
        window_variation=variation,
        residual=residual,
        n_grid=[int(v) for v in n],
        raw_means=[float(v) for v in D],
        window_means=[float(v) for v in wm],
        slope=float(coef[1]),
        diagnostic=diagnostic,
        guard=window.guard,
    )


@dataclass(frozen=True)
class SignedEstimate:
    """Estimate for a Hermitian operator: positive eigenvalues minus negative moduli."""

    positive: TraceEstimate | None
    negative: TraceEstimate | None

    @property
    def limit(self) -> float:
        return (self.positive.limit if self.positive else 0.0) - (self.negative.limit if self.negative else 0.0)

    @property
    def error_bar(self) -> float:
        return sum(e.error_bar for e in (self.positive, self.negative) if e is not None)

    @property
    def window_variation(self) -> float:
        return sum(e.window_variation for e in (self.positive, self.negative) if e is not None)

    @property
    def n_grid(self) -> list[int]:
        return (self.positive or self.negative).n_grid if (self.positive or self.negative) else []

    def to_json(self) -> dict:
        return {
            "limit": self.limit,
            "error_bar": self.error_bar,
            "window_variation": self.window_variation,
            "n_grid": self.n_grid,
        }


def signed_estimate(s: SingularSpectrum, window: EstimatorWindow | None = None) -> SignedEstimate:
    """Dixmier-type estimate of a Hermitian, not necessarily positive, operator.

    The positive and negative parts are estimated separately on the same
    window; a part too short for the window contributes zero.
    """
    if s.eigenvalues is None:
        return SignedEstimate(dixmier_estimate(s, window), None)
    window = window or EstimatorWindow()
    parts = []
    for part in (s.positive_part(), s.negative_part()):
        top = part.count - 1 if window.n_max is None else min(window.n_max, part.count - 1)
        if top < window.n_min * 2:
            parts.append(None)
            continue
        parts.append(dixmier_estimate(part, window))
    return SignedEstimate(*parts)


def measurability_diagnostic(s: SingularSpectrum, window: EstimatorWindow | None = None) -> float:
    """Largest one-octave window log-mean deviation from the fitted limit, relative to the limit."""
    if not np.any(_values(s)):
        return 0.0
    return dixmier_estimate(s, window).diagnostic


def tensor_spectrum(s_values, t: SingularSpectrum) -> SingularSpectrum:
    """Spectrum of ``S (x) T`` for finite ``S``, truncated to ``t.count`` values."""
    sv = np.asarray(s_values, dtype=float).reshape(-1)
    if np.any(sv < 0):
        raise DomainError("tensor factor must be positive")
    prod = np.multiply.outer(sv, t.values).reshape(-1)
    order = np.argsort(-prod, kind="stable")[: t.count]
    return SingularSpectrum(prod[order], meta=dict(t.meta))


def direct_sum_spectrum(parts: list[SingularSpectrum]) -> SingularSpectrum:
    """Descending merge; ties keep the order of ``parts``."""
    if not parts:
        return SingularSpectrum(np.zeros(0))
    vals = np.concatenate([p.values for p in parts])
    order = np.argsort(-vals, kind="stable")
    eig = None
    if all(p.eigenvalues is not None for p in parts):
        eig = np.concatenate([p.eigenvalues for p in parts])[order]
    return SingularSpectrum(vals[order], eig)


__all__ = [
    "EstimatorWindow", "SignedEstimate", "SingularSpectrum", "TraceEstimate", "dixmier_estimate",
    "direct_sum_spectrum", "geometric_grid", "harmonic_spectrum", "log_cesaro",
    "measurability_diagnostic", "oscillating_sequence", "oscillating_spectrum", "signed_estimate", "tensor_spectrum",
    "weak_quasinorm",
]
