"""Cwikel operators, their spectra, the integer-cell block decomposition and kernel operators.

Resolvent powers of the Laplacian are diagonal coordinate multipliers:
``(1 - Delta)^(-p) = multiplier((1 + |u|^2)^(-p))``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalError
from .plane import (
    Boundary,
    GridOperator,
    GridSpec,
    Symbol,
    ThetaMatrix,
    quantize,
)
from .traces import SingularSpectrum, direct_sum_spectrum

POSITIVITY_FLOOR = -1e-8


class CwikelVariant(str, enum.Enum):
    SMOOTH = "smooth"
    FLOOR = "floor"
    POWER = "power"

    def weights(self, u: np.ndarray) -> np.ndarray:
        d = u.shape[1]
        if self is CwikelVariant.SMOOTH:
            return (1.0 + np.sum(u**2, axis=1)) ** (-d / 2)
        if self is CwikelVariant.FLOOR:
            return (1.0 + np.sum(np.floor(u + 1e-12) ** 2, axis=1)) ** (-d / 2)
        return (1.0 + np.sum(u**2, axis=1)) ** (-(d + 1) / 2)


def floor_cells(u: np.ndarray) -> np.ndarray:
    """Integer cell ``floor(u)`` of each point, robust to rounding just below an integer."""
    return np.floor(u + 1e-12).astype(np.int64)


@dataclass(frozen=True, eq=False)
class CwikelOperator:
    x_symbol: Symbol
    variant: CwikelVariant
    matrix: GridOperator
    x: GridOperator
    weights: np.ndarray

    @property
    def grid(self) -> GridSpec:
        return self.x.grid


def cwikel_operator(f: Symbol, theta: ThetaMatrix, variant: CwikelVariant | str = "smooth",
                    x: GridOperator | None = None) -> CwikelOperator:
    """``Op(f) w(nabla)`` with ``w`` the variant's weight, assembled by column scaling.

    Pass ``x`` to reuse an already quantized ``Op(f)``.
    """
    variant = CwikelVariant(variant)
    grid = f.grid
    if x is None:
        x = quantize(grid, theta, f)
    w = variant.weights(grid.points)
    mat = GridOperator(grid, x.matrix * w[None, :], f"{x.label}*{variant.value}(nabla)")
    return CwikelOperator(f, variant, mat, x, w)


def symmetrize(c: CwikelOperator) -> GridOperator:
    """``w^(1/2) x w^(1/2)``, Hermitian when ``x`` is; same nonzero spectrum as ``x w`` up to similarity."""
    r = np.sqrt(c.weights)
    mat = r[:, None] * c.x.matrix * r[None, :]
    mat = 0.5 * (mat + mat.conj().T)
    return GridOperator(c.grid, mat, f"sym({c.matrix.label})")


@dataclass(frozen=True)
class CorrectionTerm:
    """``sup_k`` is the sup of ``|k|`` over the grid points; ``sup_box`` over the whole box."""

    operator: GridOperator
    sup_k: float
    sup_box: float


def correction_function(u: np.ndarray) -> np.ndarray:
    """``k(u) = (g(u) - h(u)) (1 + |u|^2)^((d+1)/2)``; bounded, zero on integer points."""
    g = CwikelVariant.SMOOTH.weights(u)
    h = CwikelVariant.FLOOR.weights(u)
    d = u.shape[1]
    return (g - h) * (1.0 + np.sum(u**2, axis=1)) ** ((d + 1) / 2)


def correction_sup(grid: GridSpec, chunk: int = 1 << 16) -> float:
    """Sup of ``|k|`` over the box ``[-L/2, L/2)^d``.

    ``k`` jumps where a coordinate crosses an integer and its sup is a left
    limit there, so grid points alone undersample it.  Candidates per axis are
    the grid coordinates, the integers, and points just below the integers.
    """
    half = grid.L / 2
    ints = np.arange(np.ceil(-half), np.ceil(half))
    axis = np.unique(np.concatenate([grid.spacing * np.arange(-grid.N // 2, grid.N // 2), ints, ints - 1e-9]))
    axis = axis[(axis >= -half) & (axis < half)]
    best = 0.0
    total = axis.size**grid.d
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        u = axis[np.stack(np.unravel_index(flat, (axis.size,) * grid.d), axis=-1)]
        best = max(best, float(np.max(np.abs(correction_function(u)))))
    return best


def correction_term(f: Symbol, theta: ThetaMatrix, x: GridOperator | None = None) -> CorrectionTerm:
    """``x (1 - Delta)^(-(d+1)/2) k(nabla)``, which equals ``x (g - h)(nabla)``."""
    power = cwikel_operator(f, theta, CwikelVariant.POWER, x)
    k = correction_function(f.grid.points)
    op = GridOperator(f.grid, power.matrix.matrix * k[None, :], "x(1-Delta)^(-(d+1)/2)k(nabla)")
    return CorrectionTerm(op, float(np.max(np.abs(k))), correction_sup(f.grid))


def is_hermitian(a: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return bool(np.max(np.abs(a - a.conj().T)) <= tol * scale) if a.size else True


def singular_spectrum(a: GridOperator | np.ndarray, hermitian: bool | None = None,
                      require_positive: bool = False, meta: dict | None = None) -> SingularSpectrum:
    """Descending singular values; Hermitian input keeps its eigenvalues.

    With ``require_positive`` an eigenvalue below the floor ``-1e-8`` raises.
    """
    mat = a.matrix if isinstance(a, GridOperator) else np.asarray(a)
    if hermitian is None:
        hermitian = is_hermitian(mat)
    try:
        if hermitian:
            eig = scipy.linalg.eigvalsh(mat, check_finite=True)
        else:
            sv = scipy.linalg.svdvals(mat, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        finite = bool(np.all(np.isfinite(mat)))
        norm = float(np.linalg.norm(mat)) if finite else float("nan")
        raise NumericalError(
            f"decomposition of a {mat.shape[0]}x{mat.shape[1]} matrix failed ({exc}); "
            f"finite entries: {finite}, Frobenius norm {norm:.3e}"
        ) from exc
    if hermitian:
        if require_positive and eig.size and eig[0] < POSITIVITY_FLOOR:
            raise DomainError(f"operator is not positive: smallest eigenvalue {eig[0]:.3e}")
        # eigvalsh is ascending; reverse before the stable sort so ties keep descending-eigenvalue order
        return SingularSpectrum.from_eigenvalues(eig[::-1], meta)
    return SingularSpectrum(np.sort(sv)[::-1], meta=dict(meta or {}))


def trace_norm(a: GridOperator | np.ndarray) -> float:
    mat = a.matrix if isinstance(a, GridOperator) else a
    return float(np.sum(scipy.linalg.svdvals(mat)))


# ---------------------------------------------------------------------------
# integer-cell block decomposition


@dataclass(frozen=True)
class CellLayout:
    """Partition of an open-box grid into unit cells ``m + [0, 1)^d``."""

    grid: GridSpec
    cells: np.ndarray
    labels: dict = field(repr=False)

    @classmethod
    def build(cls, grid: GridSpec) -> "CellLayout":
        cells = floor_cells(grid.points)
        labels: dict = {}
        for i, c in enumerate(map(tuple, cells)):
            labels.setdefault(c, []).append(i)
        return cls(grid, cells, {k: np.array(v) for k, v in labels.items()})

    @property
    def points_per_cell(self) -> int:
        return int(round(1.0 / self.grid.spacing)) ** self.grid.d

    def members(self, m) -> np.ndarray:
        return self.labels.get(tuple(int(v) for v in m), np.zeros(0, dtype=int))

    def is_full(self, m) -> bool:
        return self.members(m).size == self.points_per_cell


def box_grid(side: int, points_per_unit: int = 4, d: int = 2) -> GridSpec:
    """Open-box grid of integer side with cell boundaries on grid points."""
    return GridSpec(d, side * points_per_unit, float(side), Boundary.OPEN_BOX)


def check_unit_support(f: Symbol, tol: float = 0.0) -> None:
    outside = np.max(np.abs(f.grid.points), axis=1) > 1.0 + 1e-12
    bad = np.abs(f.values[outside])
    if bad.size and np.max(bad) > tol * max(1.0, float(np.max(np.abs(f.values)))):
        raise DomainError(f"symbol does not vanish outside [-1, 1]^d (max {np.max(bad):.3e} outside)")


@dataclass
class BlockDecomposition:
    """``x h(nabla) = sum_{l1, l2} T_{l1, l2}`` with ``T_{l1,l2} = sum_{m = l2 mod 3} h(m) T_{m,l1}``.

    ``T_{m,l1}`` is the block of ``Op(f)`` with column cell ``m`` and row cell
    ``m + l1``.  Blocks are assembled on demand.
    """

    f: Symbol
    theta: ThetaMatrix
    x: GridOperator
    layout: CellLayout

    @property
    def grid(self) -> GridSpec:
        return self.x.grid

    @property
    def offsets(self) -> list[tuple[int, ...]]:
        return list(itertools.product((-1, 0, 1), repeat=self.grid.d))

    def cell_pairs(self, l1) -> list[tuple[tuple[int, ...], np.ndarray, np.ndarray]]:
        """``(m, rows, cols)`` for every cell ``m`` whose shifted cell ``m + l1`` meets the box."""
        out = []
        for m, cols in sorted(self.layout.labels.items()):
            rows = self.layout.members(np.add(m, l1))
            if rows.size:
                out.append((m, rows, cols))
        return out

    def h(self, m) -> float:
        return float((1.0 + np.sum(np.square(m))) ** (-self.grid.d / 2))

    def cell_block(self, m, l1) -> np.ndarray:
        """Dense sub-matrix of ``T_{m,l1}`` (rows in cell ``m + l1``, columns in cell ``m``)."""
        rows = self.layout.members(np.add(m, l1))
        cols = self.layout.members(m)
        return self.x.matrix[np.ix_(rows, cols)]

    def operator(self, l1, l2) -> GridOperator:
        mat = np.zeros_like(self.x.matrix)
        for m, rows, cols in self.cell_pairs(l1):
            if all((mi - li) % 3 == 0 for mi, li in zip(m, l2)):
                mat[np.ix_(rows, cols)] = self.h(m) * self.x.matrix[np.ix_(rows, cols)]
        return GridOperator(self.grid, mat, f"T[{l1},{l2}]")

    def __iter__(self) -> Iterator[tuple[tuple, tuple, GridOperator]]:
        for l1 in self.offsets:
            for l2 in self.offsets:
                yield l1, l2, self.operator(l1, l2)

    def block_spectra(self, l1, l2) -> SingularSpectrum:
        """Direct-sum merge of the spectra of ``h(m) T_{m,l1}``, padded with zeros to full dimension."""
        parts = []
        for m, rows, cols in self.cell_pairs(l1):
            if all((mi - li) % 3 == 0 for mi, li in zip(m, l2)):
                sv = scipy.linalg.svdvals(self.h(m) * self.x.matrix[np.ix_(rows, cols)])
                parts.append(SingularSpectrum(np.sort(sv)[::-1]))
        merged = direct_sum_spectrum(parts).values
        pad = np.zeros(self.grid.size - merged.size)
        return SingularSpectrum(np.concatenate([merged, pad]))

    def floor_product(self) -> GridOperator:
        w = CwikelVariant.FLOOR.weights(self.grid.points)
        return GridOperator(self.grid, self.x.matrix * w[None, :], "x h(nabla)")


def block_decompose(f: Symbol, theta: ThetaMatrix) -> BlockDecomposition:
    """Split ``Op(f) h(nabla)`` on an open-box grid into the 3^d x 3^d family ``T_{l1,l2}``."""
    grid = f.grid
    if grid.is_torus:
        raise DomainError("block decomposition needs an open-box grid (the torus wrap breaks cell translations)")
    per_unit = 1.0 / grid.spacing
    if abs(per_unit - round(per_unit)) > 1e-9:
        raise DomainError(f"grid spacing {grid.spacing} does not divide the unit cell")
    check_unit_support(f)
    x = quantize(grid, theta, f)
    return BlockDecomposition(f, theta, x, CellLayout.build(grid))


def cell_translation(grid: GridSpec, theta: ThetaMatrix, m, points: np.ndarray) -> np.ndarray:
    """Diagonal of ``U_m`` at target points: ``(U_m xi)(t) = e^{-i/2 <m, theta t>} xi(t - m)``."""
    m = np.asarray(m, dtype=float)
    return np.exp(-0.5j * theta.pairing(m[None, :], points))


def local_block_equivalence(dec: BlockDecomposition, m, l1) -> float:
    """``max |T_{m,l1} - U_m S_{l1} U_m^{-1}|`` with ``S_{l1} = T_{0,l1}``.

    Both cells ``m`` and ``m + l1`` (and ``0``, ``l1``) must lie fully inside the box.
    """
    lay = dec.layout
    zero = tuple(0 for _ in m)
    for c in (m, np.add(m, l1), zero, l1):
        if not lay.is_full(c):
            raise DomainError(f"cell {tuple(int(v) for v in c)} is not fully inside the box")
    pts = dec.grid.points
    T = dec.cell_block(m, l1)
    S = dec.cell_block(zero, l1)
    rows = lay.members(np.add(m, l1))
    cols = lay.members(m)
    left = cell_translation(dec.grid, dec.theta, m, pts[rows])
    right = np.conj(cell_translation(dec.grid, dec.theta, m, pts[cols]))
    return float(np.max(np.abs(T - left[:, None] * S * right[None, :])))


def orthogonality_residual(dec: BlockDecomposition, l1, l2) -> float:
    """Largest entry of ``T_a T_b``, ``T_a^* T_b`` and ``T_a T_b^*`` over distinct cells of one residue class."""
    blocks = []
    for m, rows, cols in dec.cell_pairs(l1):
        if all((mi - li) % 3 == 0 for mi, li in zip(m, l2)):
            blocks.append((rows, cols, dec.x.matrix[np.ix_(rows, cols)]))
    worst = 0.0

    def product(rows_a, cols_a, A, rows_b, cols_b, B) -> float:
        # embedded product E(A) E(B) is supported on rows_a x cols_b through the shared index set
        shared, ia, ib = np.intersect1d(cols_a, rows_b, return_indices=True)
        if shared.size == 0:
            return 0.0
        return float(np.max(np.abs(A[:, ia] @ B[ib, :])))

    for (ra, ca, A), (rb, cb, B) in itertools.permutations(blocks, 2):
        worst = max(
            worst,
            product(ra, ca, A, rb, cb, B),
            product(ca, ra, A.conj().T, rb, cb, B),
            product(ra, ca, A, cb, rb, B.conj().T),
        )
    return worst


# ---------------------------------------------------------------------------
# integral operators on a cube


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Quadrature discretisation of an integral operator on ``[lower, upper)^d``."""

    K: np.ndarray
    matrix: np.ndarray
    coeff_bound: float
    tail_fraction: float
    side: float

    @property
    def smooth(self) -> bool:
        """Fourier coefficients decay: the top-frequency shell carries under 1e-6 of the mass."""
        return self.tail_fraction < 1e-6

    def trace_norm(self) -> float:
        return float(np.sum(scipy.linalg.svdvals(self.matrix)))


def _kernel_shape(K: np.ndarray) -> tuple[int, int]:
    if K.ndim % 2 or K.ndim == 0:
        raise DomainError(f"kernel samples must have 2d axes, got {K.ndim}")
    d = K.ndim // 2
    n = K.shape[0]
    if any(s != n for s in K.shape):
        raise DomainError(f"kernel must be sampled on a uniform product grid, got {K.shape}")
    return d, n


def fourier_coefficients(K: np.ndarray) -> np.ndarray:
    """Coefficients ``c_{m1,m2}`` with ``K(t,s) = sum c e^{2 pi i (m1 t + m2 s)/side}`` at the nodes."""
    d, n = _kernel_shape(K)
    axes = tuple(range(d))
    rest = tuple(range(d, 2 * d))
    # fftn pairs with e^{-i...}; the bound only needs |c|, which is sign-blind
    return np.fft.fftn(K, axes=axes + rest) / n ** (2 * d)


def fourier_coeff_bound(K: np.ndarray, side: float = 1.0) -> float:
    """``side^d sum |c_{m1,m2}|``; bounds the trace norm of :func:`kernel_operator`."""
    d, _ = _kernel_shape(K)
    return float(side**d * np.sum(np.abs(fourier_coefficients(K))))


def _tail_fraction(c: np.ndarray) -> float:
    n = c.shape[0]
    freq = np.abs(np.fft.fftfreq(n, 1.0 / n))
    mesh = np.meshgrid(*([freq] * c.ndim), indexing="ij")
    top = np.max(np.stack(mesh), axis=0) >= n // 2 - 1
    total = np.sum(np.abs(c))
    return float(np.sum(np.abs(c[top])) / total) if total else 0.0


def kernel_operator(K: np.ndarray, lower: float = 0.0, upper: float = 1.0) -> KernelOperator:
    """Matrix ``K(t_i, s_j) (side/n)^d`` on the periodic node grid of ``[lower, upper)^d``."""
    K = np.asarray(K, dtype=complex)
    d, n = _kernel_shape(K)
    side = float(upper - lower)
    mat = K.reshape(n**d, n**d) * (side / n) ** d
    c = fourier_coefficients(K)
    bound = float(side**d * np.sum(np.abs(c)))
    return KernelOperator(K, mat, bound, _tail_fraction(c), side)


def kernel_nodes(n: int, d: int = 1, lower: float = 0.0, upper: float = 1.0) -> np.ndarray:
    """Node coordinates, shape ``(n**d, d)``, matching the row order of :func:`kernel_operator`."""
    axis = lower + (upper - lower) * np.arange(n) / n
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


__all__ = [
    "BlockDecomposition", "CellLayout", "CorrectionTerm", "CwikelOperator", "CwikelVariant",
    "KernelOperator", "block_decompose", "box_grid", "cell_translation", "check_unit_support",
    "correction_function", "correction_sup", "correction_term", "cwikel_operator", "fourier_coeff_bound",
    "fourier_coefficients", "is_hermitian", "kernel_nodes", "kernel_operator",
    "local_block_equivalence", "orthogonality_residual", "singular_spectrum", "symmetrize",
    "trace_norm",
]
