"""Truncated Hermite-basis picture of the two-dimensional Moyal plane.

The twisted shift U(s) is represented by the displacement operator D(alpha)
with ``alpha = sqrt(theta0/2) * (s1 - i s2)``.  With this choice
``D(alpha) D(beta) = exp(i Im(alpha conj(beta))) D(alpha + beta)`` reproduces
``U(t) U(s) = exp(i/2 <t, theta s>) U(t + s)`` exactly.

Matrix elements in the number basis are

    <m|D|n> = exp(i k arg alpha) phi_n^(k)(|alpha|^2),      m = n + k >= n,
    <m|D|n> = (-exp(-i arg alpha))^k phi_m^(k)(|alpha|^2),  n = m + k >  m,

with ``phi_n^(k)(x) = sqrt(n!/(n+k)!) x^(k/2) exp(-x/2) L_n^(k)(x)``, evaluated
by an upward three-term recurrence in ``n`` started from a log-space seed.
"""

from __future__ import annotations

import hashlib
import itertools
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import resample
from scipy.special import gammaln, xlogy

from .errors import DimensionError, DomainError, ResolutionError
from .plane import Boundary, GridSpec, Symbol, ThetaMatrix, quantization_prefactor

FLUSH = 1e-300
# beyond this |alpha|^2 the exp(-x/2) seed underflows before the recurrence can recover
MAX_ARGUMENT = 1400.0

CACHE_MAGIC = b"MLDT"
CACHE_VERSION = 1
# magic, version, M, theta0, N, L
_HEADER = struct.Struct("<4sIIdId")


def _check_d2(theta: ThetaMatrix) -> None:
    if theta.d != 2:
        raise DimensionError("the Hermite-basis representation is implemented for d = 2 only")


def alpha_of(theta0: float, s: np.ndarray) -> np.ndarray:
    s = np.atleast_2d(np.asarray(s, dtype=float))
    return np.sqrt(theta0 / 2.0) * (s[:, 0] - 1j * s[:, 1])


def laguerre_ladder(x: np.ndarray, k: int, count: int) -> np.ndarray:
    """``phi_n^(k)(x)`` for ``n < count``; shape ``(count, len(x))``."""
    x = np.asarray(x, dtype=float)
    if np.any(x > MAX_ARGUMENT):
        raise DomainError(f"|alpha|^2 = {x.max():.1f} exceeds the stable range {MAX_ARGUMENT}")
    out = np.zeros((count, x.size))
    if count == 0:
        return out
    out[0] = np.exp(0.5 * (xlogy(k, x) - x - gammaln(k + 1.0)))
    if count > 1:
        out[1] = (1.0 + k - x) * out[0] / np.sqrt(1.0 + k)
    for n in range(1, count - 1):
        out[n + 1] = ((2 * n + 1 + k - x) * out[n] - np.sqrt(n * (n + k)) * out[n - 1]) / np.sqrt(
            (n + 1) * (n + k + 1)
        )
    out[np.abs(out) < FLUSH] = 0.0
    return out


def _diagonals(theta0: float, s: np.ndarray, M: int):
    """Yield ``(k, lower, upper)`` with the k-th sub- and super-diagonals of D at every point.

    ``lower[n, p] = <n+k|D(s_p)|n>`` and ``upper[n, p] = <n|D(s_p)|n+k>``.
    """
    a = alpha_of(theta0, s)
    x = np.abs(a) ** 2
    phase = np.exp(1j * np.angle(a))
    for k in range(M):
        ladder = laguerre_ladder(x, k, M - k)
        lower = ladder * phase**k
        upper = ladder * (-np.conj(phase)) ** k
        yield k, lower, upper


def displacement_matrices(M: int, theta0: float, points: np.ndarray) -> np.ndarray:
    """Stack of truncated displacement matrices, shape ``(P, M, M)``."""
    if M < 2:
        raise DomainError(f"truncation M must be >= 2, got {M}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros((points.shape[0], M, M), dtype=complex)
    for k, lower, upper in _diagonals(theta0, points, M):
        n = np.arange(M - k)
        out[:, n + k, n] = lower.T
        if k:
            out[:, n, n + k] = upper.T
    return out


def displacement_matrix(M: int, theta0: float, s) -> np.ndarray:
    """``<h_j, W(s) h_k>`` for ``j, k < M``."""
    s = np.asarray(s, dtype=float).reshape(1, 2)
    return displacement_matrices(M, theta0, s)[0]


@dataclass(frozen=True, eq=False)
class FockMatrix:
    M: int
    matrix: np.ndarray
    theta0: float
    provenance: str = ""

    def __post_init__(self):
        if self.matrix.shape != (self.M, self.M):
            raise DimensionError(f"expected {self.M}x{self.M}, got {self.matrix.shape}")

    def corner(self) -> "FockMatrix":
        h = self.M // 2
        return FockMatrix(h, self.matrix[:h, :h].copy(), self.theta0, self.provenance + "[corner]")

    def __add__(self, other: "FockMatrix") -> "FockMatrix":
        return FockMatrix(self.M, self.matrix + other.matrix, self.theta0, "sum")

    def __sub__(self, other: "FockMatrix") -> "FockMatrix":
        return FockMatrix(self.M, self.matrix - other.matrix, self.theta0, "difference")

    def __mul__(self, scalar: complex) -> "FockMatrix":
        return FockMatrix(self.M, scalar * self.matrix, self.theta0, self.provenance)

    __rmul__ = __mul__

    def __matmul__(self, other: "FockMatrix") -> "FockMatrix":
        return FockMatrix(self.M, self.matrix @ other.matrix, self.theta0, "product")

    def adjoint(self) -> "FockMatrix":
        return FockMatrix(self.M, self.matrix.conj().T.copy(), self.theta0, f"({self.provenance})^*")


def symbol_hash(f: Symbol) -> str:
    h = hashlib.sha256()
    h.update(repr(f.grid.key()).encode())
    h.update(np.ascontiguousarray(f.values).tobytes())
    return h.hexdigest()[:16]


class DisplacementTable:
    """Truncated displacement matrices at every lattice point of a grid.

    At ``M = 64`` on a 64 x 64 grid the table holds 268 MB, so it is built
    lazily and can be persisted with :meth:`save`.
    """

    def __init__(self, M: int, theta: ThetaMatrix, grid: GridSpec, data: np.ndarray | None = None):
        _check_d2(theta)
        if M < 2:
            raise DomainError(f"truncation M must be >= 2, got {M}")
        self.M = int(M)
        self.theta = theta
        self.grid = grid
        self._data = data

    @property
    def data(self) -> np.ndarray:
        if self._data is None:
            self._data = displacement_matrices(self.M, self.theta.theta0, self.grid.points)
        return self._data

    def __getitem__(self, index: int) -> np.ndarray:
        return self.data[index]

    def key(self) -> str:
        h = hashlib.sha256(repr((self.M, round(self.theta.theta0, 15), self.grid.key())).encode())
        return h.hexdigest()[:16]

    def filename(self) -> str:
        return f"dtable-{self.key()}.bin"

    def save(self, directory) -> Path:
        path = Path(directory) / self.filename()
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, self.M, self.theta.theta0,
                                  self.grid.N, self.grid.L))
            fh.write(np.ascontiguousarray(self.data, dtype="<c16").tobytes())
        return path

    @classmethod
    def load(cls, path, theta: ThetaMatrix, grid: GridSpec) -> "DisplacementTable":
        with open(path, "rb") as fh:
            raw = fh.read()
        magic, version, M, theta0, N, L = _HEADER.unpack_from(raw)
        if magic != CACHE_MAGIC or version != CACHE_VERSION:
            raise ValueError(f"{path} is not a displacement table (version {CACHE_VERSION})")
        if (N, L, theta0) != (grid.N, grid.L, theta.theta0):
            raise ValueError(f"{path} was built for N={N}, L={L}, theta0={theta0}")
        data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size).reshape(grid.size, M, M)
        return cls(M, theta, grid, data.astype(complex))

    @classmethod
    def cached(cls, directory, M: int, theta: ThetaMatrix, grid: GridSpec) -> "DisplacementTable":
        table = cls(M, theta, grid)
        path = Path(directory) / table.filename()
        if path.exists():
            return cls.load(path, theta, grid)
        table.save(directory)
        return table


def represent(f: Symbol, M: int, theta: ThetaMatrix, table: DisplacementTable | None = None) -> FockMatrix:
    """Quadrature ``(2 pi)^(-1/2) spacing^2 sum_s f(s) W(s)`` truncated to ``M x M``."""
    _check_d2(theta)
    if M < 2:
        raise DomainError(f"truncation M must be >= 2, got {M}")
    grid = f.grid
    weight = quantization_prefactor(grid.d) * grid.spacing**grid.d
    support = np.nonzero(f.values)[0]
    if table is not None:
        if table.M != M or table.grid != grid:
            raise DimensionError("displacement table does not match the symbol grid or M")
        mat = np.tensordot(f.values[support], table.data[support], axes=(0, 0))
    else:
        vals = f.values[support]
        mat = np.zeros((M, M), dtype=complex)
        for k, lower, upper in _diagonals(theta.theta0, grid.points[support], M):
            n = np.arange(M - k)
            mat[n + k, n] = lower @ vals
            if k:
                mat[n, n + k] = upper @ vals
    return FockMatrix(M, weight * mat, theta.theta0, f"represent:{symbol_hash(f)}")


def resolving_spacing(theta0: float, M: int) -> float:
    """Largest lattice spacing whose quadrature resolves Hermite indices up to ``M``.

    A lattice of spacing ``h`` carries about ``2 pi / (theta0 h^2)`` Hermite
    states before the sampled displacement entries alias; this asks for ``2 M``.
    """
    return float(np.sqrt(np.pi / (theta0 * M)))


def refine(f: Symbol, factor: int) -> Symbol:
    """Fourier interpolation of a symbol onto a grid ``factor`` times finer over the same box."""
    if factor <= 1:
        return f
    g = f.grid
    vals = f.values.reshape((g.N,) * g.d)
    for axis in range(g.d):
        vals = resample(vals, g.N * factor, axis=axis)
    fine = GridSpec(g.d, g.N * factor, g.L, Boundary.OPEN_BOX)
    return Symbol(fine, vals.reshape(-1))


def resolve_for_fock(f: Symbol, theta: ThetaMatrix, M: int) -> Symbol:
    """``f`` itself when its grid resolves ``M`` Hermite states, otherwise a refined copy."""
    factor = int(np.ceil(f.grid.spacing / resolving_spacing(theta.theta0, M) - 1e-9))
    return refine(f, factor)


def trace_tau(x: FockMatrix) -> complex:
    return complex(np.trace(x.matrix))


def lp_norm(x: FockMatrix, p: float) -> float:
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    sv = np.linalg.svd(x.matrix, compute_uv=False)
    if np.isinf(p):
        return float(sv[0]) if sv.size else 0.0
    return float(np.sum(sv**p) ** (1.0 / p))


@dataclass(frozen=True)
class Truncated:
    """A Fock-side quantity at ``M`` and on the ``M/2`` corner; ``error`` is their gap."""

    value: float
    corner: float

    @property
    def error(self) -> float:
        return abs(self.value - self.corner)


def with_corner(fn, x: FockMatrix) -> Truncated:
    return Truncated(float(np.real(fn(x))), float(np.real(fn(x.corner()))))


def matrix_unit_symbol(k: int, l: int, grid: GridSpec, theta: ThetaMatrix, tol: float = 1e-6) -> Symbol:
    """Sampled symbol of the matrix unit ``e_kl``: ``theta0/sqrt(2 pi) conj(<k|W(s)|l>)``.

    The exact symbol has ``||f_kl||_2^2 = theta0``; a grid whose quadrature
    misses that by more than ``tol`` (relative) cannot resolve it.
    """
    _check_d2(theta)
    if k < 0 or l < 0:
        raise DomainError("matrix-unit indices must be nonnegative")
    size = max(k, l, 1) + 1
    vals = displacement_matrices(size, theta.theta0, grid.points)[:, k, l]
    f = Symbol(grid, theta.theta0 / np.sqrt(2 * np.pi) * np.conj(vals))
    mass = f.l2_norm() ** 2
    rel = abs(mass / theta.theta0 - 1.0)
    if not rel <= tol:
        raise ResolutionError(
            f"f_{k}{l} is under-resolved on N={grid.N}, L={grid.L}: quadrature mass "
            f"{mass:.6g} vs {theta.theta0:.6g} (relative gap {rel:.2e} > {tol:.0e})"
        )
    return f


def multi_indices(d: int, m: int):
    """All ordered tuples of axes ``1..d`` of length ``0..m``."""
    for order in range(m + 1):
        yield from itertools.product(range(1, d + 1), repeat=order)


def sobolev_norm(f: Symbol, m: int, p: float, M: int, theta: ThetaMatrix,
                 table: DisplacementTable | None = None) -> float:
    """``sum_{|alpha| <= m} ||d^alpha Op(f)||_p`` over ordered multi-indices.

    ``d^alpha`` acts on symbols as multiplication by ``s^alpha``.
    """
    if m < 0:
        raise DomainError("m must be >= 0")
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    pts = f.grid.points
    total = 0.0
    for alpha in multi_indices(f.grid.d, m):
        weight = np.ones(f.grid.size)
        for axis in alpha:
            weight = weight * pts[:, axis - 1]
        total += lp_norm(represent(Symbol(f.grid, weight * f.values), M, theta, table), p)
    return total


def tau_closed_form(theta: ThetaMatrix) -> float:
    """``tau(Op f) / f(0)`` for d = 2 under the canonical trace: ``sqrt(2 pi) / theta0``."""
    _check_d2(theta)
    return float(np.sqrt(2 * np.pi) / theta.theta0)


@dataclass(frozen=True)
class TraceCalibration:
    fitted: float
    closed_form: float
    truncation_error: float

    @property
    def ratio(self) -> float:
        return self.fitted / self.closed_form

    @property
    def consistent(self) -> bool:
        return abs(self.ratio - 1.0) <= 0.05


def calibrate_trace(grid: GridSpec, theta: ThetaMatrix, M: int = 64, sigma: float = 1.0) -> TraceCalibration:
    """Fit ``tau(represent(f)) = C f(0)`` on a centred Gaussian and compare C with the closed form."""
    f = Symbol.from_function(grid, lambda s: np.exp(-np.sum(s**2, axis=1) / (2 * sigma**2)))
    x = represent(resolve_for_fock(f, theta, M), M, theta)
    t = with_corner(trace_tau, x)
    return TraceCalibration(t.value / f.at_origin().real, tau_closed_form(theta), t.error)


__all__ = [
    "DisplacementTable", "FockMatrix", "TraceCalibration", "Truncated", "alpha_of",
    "calibrate_trace", "displacement_matrices", "displacement_matrix", "laguerre_ladder",
    "lp_norm", "matrix_unit_symbol", "multi_indices", "refine", "represent", "resolve_for_fock",
    "resolving_spacing", "sobolev_norm",
    "symbol_hash", "tau_closed_form", "trace_tau", "with_corner",
]
