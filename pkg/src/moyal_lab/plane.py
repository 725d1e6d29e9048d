"""Left-regular picture of the Moyal plane on a finite grid.

Positions u and symbol arguments s share one lattice
``spacing * {-N/2, ..., N/2-1}^d``.  A twisted shift acts as

    (U(t) xi)(u) = exp(+i/2 <t, theta u>) xi(u - t),

which satisfies ``U(t + s) = exp(-i/2 <t, theta s>) U(t) U(s)``.  In torus mode
the shift wraps around the box and the relation is exact on the lattice
provided ``theta0 * spacing * L / 2`` is a multiple of ``2 pi``.  In open-box
mode the shift fills with zeros, which keeps the coordinate calculus exact
(``[D_k, U(s)] = s_k U(s)``) at the price of the group law near the edges.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    AlignmentError,
    ConfigurationError,
    DimensionError,
    DomainError,
)

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ThetaMatrix:
    d: int
    theta0: float
    matrix: np.ndarray
    inverse: np.ndarray

    @property
    def pfaffian(self) -> float:
        """Pfaffian of the block-diagonal matrix, ``theta0 ** (d/2)``."""
        return float(self.theta0 ** (self.d // 2))

    @property
    def det(self) -> float:
        return self.pfaffian**2

    def pairing(self, t: np.ndarray, s: np.ndarray) -> np.ndarray:
        """``<t, theta s>`` broadcast over leading axes."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        return np.einsum("...i,ij,...j->...", t, self.matrix, s)


def make_theta(d: int, theta0: float) -> ThetaMatrix:
    """Block-diagonal deformation matrix with 2x2 blocks [[0, theta0], [-theta0, 0]]."""
    if int(d) != d or d < 2 or d % 2:
        # a non-degenerate antisymmetric matrix has even order
        raise DimensionError(f"dimension must be an even positive integer, got {d}")
    if not np.isfinite(theta0) or theta0 <= 0:
        raise DomainError(f"theta0 must be positive, got {theta0}")
    d = int(d)
    block = np.array([[0.0, theta0], [-theta0, 0.0]])
    matrix = np.kron(np.eye(d // 2), block)
    inverse = np.kron(np.eye(d // 2), np.array([[0.0, -1.0 / theta0], [1.0 / theta0, 0.0]]))
    if np.max(np.abs(matrix @ inverse - np.eye(d))) > 1e-12:
        raise DomainError("theta is numerically degenerate")
    return ThetaMatrix(d=d, theta0=float(theta0), matrix=matrix, inverse=inverse)


class Boundary(str, enum.Enum):
    TORUS = "torus"
    OPEN_BOX = "open-box"


def compatible_theta0(N: int, L: float, m: int = 1) -> float:
    """Smallest torus-compatible deformation scale, ``4 pi m / (spacing * L)``."""
    return 4.0 * np.pi * m * N / L**2


def compatible_length(N: int, theta0: float, m: int = 1) -> float:
    """Box length making ``theta0`` torus-compatible, ``sqrt(4 pi m N / theta0)``."""
    return float(np.sqrt(4.0 * np.pi * m * N / theta0))


@dataclass(frozen=True)
class GridSpec:
    d: int
    N: int
    L: float
    boundary: Boundary = Boundary.TORUS

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ConfigurationError(f"must be a positive integer, got {self.d}", "d")
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise ConfigurationError(f"must be an even integer >= 4, got {self.N}", "N")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ConfigurationError(f"must be positive, got {self.L}", "L")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def spacing(self) -> float:
        return self.L / self.N

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def indices(self) -> np.ndarray:
        """Integer lattice coordinates, shape ``(N**d, d)``, C order."""
        axis = np.arange(-self.N // 2, self.N // 2)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def points(self) -> np.ndarray:
        return self.spacing * self.indices

    @property
    def is_torus(self) -> bool:
        return self.boundary is Boundary.TORUS

    def phase_defect(self, theta: ThetaMatrix) -> float:
        """Distance of ``theta0 * spacing * L / 2`` from the lattice ``2 pi Z``."""
        q = theta.theta0 * self.spacing * self.L / 2.0 / TWO_PI
        return abs(q - round(q))

    def check_compatible(self, theta: ThetaMatrix) -> None:
        if theta.d != self.d:
            raise ConfigurationError(f"theta has d={theta.d}, grid has d={self.d}", "d")
        if self.is_torus and self.phase_defect(theta) > 1e-9:
            raise ConfigurationError(
                f"theta0={theta.theta0} violates torus phase compatibility "
                f"(theta0*spacing*L/2 not in 2*pi*Z); use theta0="
                f"{compatible_theta0(self.N, self.L):.12g}",
                "theta0",
            )

    def multiplicity(self, theta: ThetaMatrix) -> float:
        """Number of copies of the irreducible representation carried by the grid.

        Equal to ``Pf(theta) L^d / (2 pi)^(d/2)``; grid traces divided by it
        reproduce the canonical trace (the one with minimal projections of
        trace one).
        """
        return theta.pfaffian * self.L**self.d / TWO_PI ** (self.d / 2)

    def lattice_index(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.shape != (self.d,):
            raise DimensionError(f"expected a vector of length {self.d}, got shape {t.shape}")
        q = t / self.spacing
        idx = np.round(q)
        if np.max(np.abs(q - idx)) > 1e-9:
            raise AlignmentError(f"{t.tolist()} is not on the lattice of spacing {self.spacing}")
        return idx.astype(np.int64)

    def flat(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Flat positions of integer coordinates plus a validity mask.

        Torus mode wraps every coordinate into range; open-box mode marks
        out-of-box coordinates invalid.
        """
        idx = np.asarray(idx, dtype=np.int64)
        half = self.N // 2
        shifted = idx + half
        if self.is_torus:
            shifted = np.mod(shifted, self.N)
            valid = np.ones(idx.shape[:-1], dtype=bool)
        else:
            valid = np.all((shifted >= 0) & (shifted < self.N), axis=-1)
            shifted = np.where(valid[..., None], shifted, 0)
        weights = self.N ** np.arange(self.d - 1, -1, -1)
        return shifted @ weights, valid

    def key(self) -> tuple:
        return (self.d, self.N, float(self.L), self.boundary.value)


@dataclass(frozen=True, eq=False)
class Symbol:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex).reshape(-1)
        if values.size != self.grid.size:
            raise DimensionError(f"symbol has {values.size} samples, grid needs {self.grid.size}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "Symbol":
        """Sample ``fn`` on the lattice; ``fn`` receives points of shape ``(N**d, d)``."""
        return cls(grid, np.asarray(fn(grid.points), dtype=complex))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Symbol":
        return cls(grid, np.zeros(grid.size, dtype=complex))

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.spacing**self.grid.d * np.sum(np.abs(self.values) ** 2)))

    def at_origin(self) -> complex:
        pos, _ = self.grid.flat(np.zeros(self.grid.d, dtype=np.int64))
        return complex(self.values[int(pos)])

    def reversed_conjugate(self) -> "Symbol":
        """``s -> conj(f(-s))``, the symbol of the adjoint (zero where -s leaves the grid)."""
        pos, valid = self.grid.flat(-self.grid.indices)
        vals = np.where(valid, np.conj(self.values[pos]), 0.0)
        return Symbol(self.grid, vals)

    def _same_grid(self, other: "Symbol") -> None:
        if other.grid != self.grid:
            raise ConfigurationError("symbols live on different grids", "grid")

    def __add__(self, other: "Symbol") -> "Symbol":
        self._same_grid(other)
        return Symbol(self.grid, self.values + other.values)

    def __sub__(self, other: "Symbol") -> "Symbol":
        self._same_grid(other)
        return Symbol(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> "Symbol":
        return Symbol(self.grid, scalar * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "Symbol":
        return Symbol(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class GridOperator:
    grid: GridSpec
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        n = self.grid.size
        if self.matrix.shape != (n, n):
            raise DimensionError(f"operator has shape {self.matrix.shape}, grid needs ({n}, {n})")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def _check(self, other: "GridOperator") -> None:
        if other.grid != self.grid:
            raise DimensionError("operators live on different grids")

    def __add__(self, other: "GridOperator") -> "GridOperator":
        self._check(other)
        return GridOperator(self.grid, self.matrix + other.matrix, f"({self.label} + {other.label})")

    def __sub__(self, other: "GridOperator") -> "GridOperator":
        self._check(other)
        return GridOperator(self.grid, self.matrix - other.matrix, f"({self.label} - {other.label})")

    def __mul__(self, scalar: complex) -> "GridOperator":
        return GridOperator(self.grid, scalar * self.matrix, f"{scalar}*{self.label}")

    __rmul__ = __mul__

    def __matmul__(self, other: "GridOperator") -> "GridOperator":
        return materialize_product(self, other)


def identity(grid: GridSpec) -> GridOperator:
    return GridOperator(grid, np.eye(grid.size, dtype=complex), "1")


def quantization_prefactor(d: int) -> float:
    return TWO_PI ** (-d / 4.0)


def l2_calibration(grid: GridSpec) -> float:
    """Constant C with ``C * ||Op(f)||_HS = ||f||_2`` on the torus grid.

    The grid carries the counting inner product while symbols carry the
    Lebesgue one; each twisted shift has ``N**d`` unimodular entries, so the
    constant is ``(2 pi)^(d/4) / L^(d/2)``.
    """
    return TWO_PI ** (grid.d / 4.0) / grid.L ** (grid.d / 2.0)


def grid_tau(op: GridOperator, theta: ThetaMatrix) -> complex:
    """Canonical trace computed on the grid: matrix trace over the multiplicity."""
    return op.trace() / op.grid.multiplicity(theta)


def _shift_columns(grid: GridSpec, tidx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return grid.flat(grid.indices - tidx[None, :])


def twisted_shift(grid: GridSpec, theta: ThetaMatrix, t) -> GridOperator:
    """Dense matrix of ``xi -> exp(i/2 <t, theta u>) xi(u - t)``."""
    grid.check_compatible(theta)
    tidx = grid.lattice_index(t)
    tvec = tidx * grid.spacing
    cols, valid = _shift_columns(grid, tidx)
    phase = np.exp(0.5j * theta.pairing(tvec[None, :], grid.points))
    mat = np.zeros((grid.size, grid.size), dtype=complex)
    rows = np.nonzero(valid)[0]
    mat[rows, cols[rows]] = phase[rows]
    return GridOperator(grid, mat, f"U({tvec.tolist()})")


def shift_left(grid: GridSpec, theta: ThetaMatrix, t, x: np.ndarray) -> np.ndarray:
    """``U(t) @ x`` without forming U(t); ``x`` may be a vector or a matrix."""
    tidx = grid.lattice_index(t)
    tvec = tidx * grid.spacing
    rows, valid = _shift_columns(grid, tidx)
    phase = np.exp(0.5j * theta.pairing(tvec[None, :], grid.points)) * valid
    out = x[rows] * (phase[:, None] if x.ndim == 2 else phase)
    return out


def shift_right(grid: GridSpec, theta: ThetaMatrix, t, x: np.ndarray) -> np.ndarray:
    """``x @ U(t)`` without forming U(t)."""
    tidx = grid.lattice_index(t)
    tvec = tidx * grid.spacing
    cols, valid = _shift_columns(grid, -tidx)
    phase = np.exp(0.5j * theta.pairing(tvec[None, :], grid.points)) * valid
    return x[:, cols] * phase[None, :]


def conjugate_by_shift(op: GridOperator, theta: ThetaMatrix, t) -> GridOperator:
    """``U(-t) x U(t)``."""
    grid = op.grid
    t = np.asarray(t, dtype=float)
    inner = shift_left(grid, theta, -t, op.matrix)
    return GridOperator(grid, shift_right(grid, theta, t, inner), f"U(-t){op.label}U(t)")


def _difference_positions(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Flat symbol position of ``u - v`` for all pairs, plus validity."""
    idx = grid.indices
    half = grid.N // 2
    flat = np.zeros((grid.size, grid.size), dtype=np.int64)
    valid = np.ones((grid.size, grid.size), dtype=bool)
    for k in range(grid.d):
        diff = idx[:, k][:, None] - idx[:, k][None, :] + half
        if grid.is_torus:
            diff %= grid.N
        else:
            valid &= (diff >= 0) & (diff < grid.N)
            np.clip(diff, 0, grid.N - 1, out=diff)
        flat *= grid.N
        flat += diff
    return flat, valid


def _pair_phase(grid: GridSpec, theta: ThetaMatrix) -> np.ndarray:
    pts = grid.points
    phase = (pts @ theta.matrix) @ pts.T
    phase *= 0.5
    return np.exp(1j * phase)


def quantize(grid: GridSpec, theta: ThetaMatrix, f: Symbol) -> GridOperator:
    """Riemann-sum quantization ``(2 pi)^(-d/4) spacing^d sum_s f(s) U(s)``.

    Entry ``(u, v)`` equals ``c spacing^d f(u - v) exp(i/2 <u, theta v>)``
    (``u - v`` wrapped on the torus, dropped when off-grid in open-box mode).
    """
    if f.grid != grid:
        raise ConfigurationError("symbol grid does not match operator grid", "grid")
    grid.check_compatible(theta)
    pos, valid = _difference_positions(grid)
    mat = _pair_phase(grid, theta)
    mat *= f.values[pos]
    if not grid.is_torus:
        mat *= valid
    mat *= quantization_prefactor(grid.d) * grid.spacing**grid.d
    label = f"Op(f) [hs_to_l2={l2_calibration(grid):.12g}]"
    return GridOperator(grid, mat, label)


def dequantize(op: GridOperator, theta: ThetaMatrix) -> Symbol:
    """Inverse of :func:`quantize`, pairing with ``U(s)^*`` and rescaling.

    Exact on the torus for every operator in the span of the shifts, and exact
    in open-box mode on operators produced by :func:`quantize`.
    """
    grid = op.grid
    idx = grid.indices
    pts = grid.points
    values = np.zeros(grid.size, dtype=complex)
    counts = np.zeros(grid.size)
    # column v = [u - s] for row u; accumulate over rows u for all s at once
    for k, s_idx in enumerate(idx):
        cols, valid = grid.flat(idx - s_idx[None, :])
        rows = np.nonzero(valid)[0]
        if rows.size == 0:
            continue
        phase = np.exp(-0.5j * theta.pairing(pts[k][None, :], pts[rows]))
        values[k] = np.sum(phase * op.matrix[rows, cols[rows]])
        counts[k] = rows.size
    scale = quantization_prefactor(grid.d) * grid.spacing**grid.d
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(counts > 0, values / (scale * np.maximum(counts, 1)), 0.0)
    return Symbol(grid, values)


def multiplier(grid: GridSpec, phi: Callable[[np.ndarray], np.ndarray], label: str = "phi(nabla)") -> GridOperator:
    """Diagonal operator of multiplication by ``phi(u)``."""
    return GridOperator(grid, np.diag(multiplier_values(grid, phi)), label)


def multiplier_values(grid: GridSpec, phi: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    vals = np.asarray(phi(grid.points), dtype=complex)
    if vals.ndim == 0:
        vals = np.full(grid.size, complex(vals))
    if vals.shape != (grid.size,):
        raise DimensionError(f"multiplier returned shape {vals.shape}")
    if not np.all(np.isfinite(vals)):
        bad = grid.points[~np.isfinite(vals)][0]
        raise DomainError(f"multiplier is not finite at grid point {bad.tolist()}")
    return vals


def coordinate(k: int) -> Callable[[np.ndarray], np.ndarray]:
    """``u -> u_k`` with 1-based axis index (the operator D_k)."""
    return lambda u: u[:, k - 1]


def materialize_product(a: GridOperator, b: GridOperator) -> GridOperator:
    if a.grid != b.grid:
        raise DimensionError("operators live on different grids")
    return GridOperator(a.grid, a.matrix @ b.matrix, f"{a.label}{b.label}")


def adjoint(a: GridOperator) -> GridOperator:
    return GridOperator(a.grid, a.matrix.conj().T.copy(), f"({a.label})^*")


def scale_columns(op: GridOperator, weights: np.ndarray, label: str = "") -> GridOperator:
    """``op @ diag(weights)`` without a dense diagonal."""
    return GridOperator(op.grid, op.matrix * weights[None, :], label or op.label)


def scale_rows(op: GridOperator, weights: np.ndarray, label: str = "") -> GridOperator:
    return GridOperator(op.grid, weights[:, None] * op.matrix, label or op.label)


def lattice_delta(grid: GridSpec, s0, weight: complex | None = None) -> Symbol:
    """Symbol supported at one lattice point; the default weight makes Op exactly U(s0)."""
    pos, valid = grid.flat(grid.lattice_index(s0))
    if not valid:
        raise AlignmentError(f"{s0} lies outside the box")
    if weight is None:
        weight = TWO_PI ** (grid.d / 4.0) / grid.spacing**grid.d
    vals = np.zeros(grid.size, dtype=complex)
    vals[int(pos)] = weight
    return Symbol(grid, vals)


def gaussian_symbol(grid: GridSpec, sigma: float = 1.0, center=None) -> Symbol:
    c = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
    return Symbol.from_function(grid, lambda s: np.exp(-np.sum((s - c) ** 2, axis=1) / (2 * sigma**2)))


def bump_symbol(grid: GridSpec, radius: float = 1.0, height: float = 1.0) -> Symbol:
    """Smooth radial bump ``exp(1 - 1/(1 - |s|^2/r^2))`` supported in the open ball."""

    def fn(s):
        r2 = np.sum(s**2, axis=1) / radius**2
        out = np.zeros(len(s))
        inside = r2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return height * out

    return Symbol.from_function(grid, fn)


@dataclass(frozen=True)
class PlaneContext:
    """A grid together with a compatible deformation matrix."""

    grid: GridSpec
    theta: ThetaMatrix
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.grid.check_compatible(self.theta)

    @classmethod
    def build(cls, d: int = 2, N: int = 64, L: float | None = 16.0, theta0: float | None = None,
              boundary: str = "torus", m: int = 1) -> "PlaneContext":
        """Resolve ``theta0=None`` or ``L=None`` from torus compatibility."""
        if theta0 is None and L is None:
            raise ConfigurationError("at most one of L and theta0 may be 'auto'", "theta0")
        if L is None:
            L = compatible_length(N, theta0, m)
        if theta0 is None:
            theta0 = compatible_theta0(N, L, m)
        grid = GridSpec(d, N, float(L), Boundary(boundary))
        return cls(grid, make_theta(d, theta0))

    def quantize(self, f: Symbol) -> GridOperator:
        return quantize(self.grid, self.theta, f)

    def shift(self, t) -> GridOperator:
        return twisted_shift(self.grid, self.theta, t)

    def multiplicity(self) -> float:
        return self.grid.multiplicity(self.theta)


__all__ = [
    "Boundary", "GridOperator", "GridSpec", "PlaneContext", "Symbol", "ThetaMatrix",
    "adjoint", "bump_symbol", "compatible_length", "compatible_theta0", "conjugate_by_shift",
    "coordinate", "dequantize", "gaussian_symbol", "grid_tau", "identity", "l2_calibration",
    "lattice_delta", "make_theta", "materialize_product", "multiplier", "multiplier_values",
    "quantization_prefactor", "quantize", "scale_columns", "scale_rows", "shift_left",
    "shift_right", "twisted_shift",
]
