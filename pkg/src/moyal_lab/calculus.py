"""Derivatives, Fourier multipliers and translation conjugations.

Two routes exist for most operations: a symbol route (multiply the symbol)
and an operator route (dense commutators or conjugations).  Agreement of the
two is the main correctness check.

Derivatives follow ``d_k x = [D_k, x]`` with ``D_k`` the coordinate
multiplier, so ``d_k U(s) = s_k U(s)``.  The coordinate is not periodic, so
the commutator route is exact only in open-box mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AlignmentError, DimensionError, DomainError
from .plane import (
    GridOperator,
    GridSpec,
    Symbol,
    ThetaMatrix,
    conjugate_by_shift,
    dequantize,
    quantize,
    shift_left,
    shift_right,
)


class AccuracyWarning(UserWarning):
    """A quadrature did not reach its target accuracy."""


@dataclass(frozen=True)
class MultiIndex:
    entries: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(int(a) for a in self.entries))

    @property
    def order(self) -> int:
        return len(self.entries)

    def validate(self, d: int) -> None:
        if any(a < 1 or a > d for a in self.entries):
            raise DimensionError(f"multi-index {self.entries} has axes outside 1..{d}")
        if self.order > 2 * d + 2:
            raise DimensionError(f"order {self.order} exceeds the supported maximum {2 * d + 2}")

    def monomial(self, s: np.ndarray) -> np.ndarray:
        """``s^alpha`` at points of shape ``(P, d)``."""
        out = np.ones(s.shape[0])
        for a in self.entries:
            out = out * s[:, a - 1]
        return out


def derivative_symbol(f: Symbol, alpha: MultiIndex | tuple) -> Symbol:
    """``s -> s^alpha f(s)``."""
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(tuple(alpha))
    alpha.validate(f.grid.d)
    return Symbol(f.grid, alpha.monomial(f.grid.points) * f.values)


def derivative_commutator(x: GridOperator, alpha: MultiIndex | tuple) -> GridOperator:
    """Iterated commutators ``[D_a1, [D_a2, ... x]]`` on the dense matrix."""
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(tuple(alpha))
    alpha.validate(x.grid.d)
    pts = x.grid.points
    mat = x.matrix
    for a in reversed(alpha.entries):
        u = pts[:, a - 1]
        mat = u[:, None] * mat - mat * u[None, :]
    return GridOperator(x.grid, mat, f"d{alpha.entries}({x.label})")


def fourier_multiplier(f: Symbol, phi: Callable[[np.ndarray], np.ndarray]) -> Symbol:
    """``s -> phi(s) f(s)``, the symbol of ``T_phi Op(f)``."""
    vals = np.asarray(phi(f.grid.points), dtype=complex)
    if vals.ndim == 0:
        vals = np.full(f.grid.size, complex(vals))
    if not np.all(np.isfinite(vals)):
        raise DomainError("multiplier is not finite on the grid")
    return Symbol(f.grid, vals * f.values)


def gaussian(s: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * np.sum(np.atleast_2d(s) ** 2, axis=1))


def gaussian_transform(d: int) -> Callable[[np.ndarray], np.ndarray]:
    """``F phi`` for ``phi = exp(-|s|^2/2)``, normalised so ``phi(s) = int F phi(u) e^{i<u,s>} du``."""
    return lambda u: (2 * np.pi) ** (-d / 2) * gaussian(u)


def transform_by_sum(grid: GridSpec, phi: Callable[[np.ndarray], np.ndarray], u: np.ndarray) -> np.ndarray:
    """``F phi(u) = (2 pi)^-d sum_s spacing^d phi(s) e^{-i<s,u>}`` by direct summation over the grid."""
    s = grid.points
    vals = np.asarray(phi(s), dtype=complex)
    out = np.empty(len(u), dtype=complex)
    for start in range(0, len(u), 256):
        block = u[start:start + 256]
        out[start:start + 256] = np.exp(-1j * block @ s.T) @ vals
    return out * grid.spacing**grid.d / (2 * np.pi) ** grid.d


@dataclass(frozen=True)
class ConjugationNodes:
    """Quadrature nodes ``w`` on the lattice with ``u = theta w`` inside a ball."""

    w: np.ndarray
    u: np.ndarray
    weights: np.ndarray

    def realized_multiplier(self, s: np.ndarray) -> np.ndarray:
        """``sum_w weight_w e^{i<s,u_w>}``, the multiplier the quadrature actually applies."""
        return np.exp(1j * s @ self.u.T) @ self.weights


def conjugation_nodes(grid: GridSpec, theta: ThetaMatrix, fphi, radius: float = 6.0) -> ConjugationNodes:
    pts = grid.points
    u = pts @ theta.matrix.T
    keep = np.linalg.norm(u, axis=1) <= radius
    w, u = pts[keep], u[keep]
    if fphi is None:
        raise DomainError("a transform of the multiplier is required")
    f_u = np.asarray(fphi(u), dtype=complex)
    weights = theta.det * grid.spacing**grid.d * f_u
    return ConjugationNodes(w, u, weights)


def conjugation_average(
    x: GridOperator,
    theta: ThetaMatrix,
    phi: Callable[[np.ndarray], np.ndarray] | None = None,
    fphi: Callable[[np.ndarray], np.ndarray] | None = None,
    radius: float = 6.0,
    tol: float = 1e-3,
) -> GridOperator:
    """``sum_w |det theta| spacing^d F phi(theta w) U(-w) x U(w)`` over lattice ``w`` with ``|theta w| <= radius``.

    Since ``U(-w) U(s) U(w) = e^{i<s, theta w>} U(s)`` the sum applies the
    Fourier multiplier ``phi`` to every twisted shift.  ``fphi`` defaults to
    the direct-sum transform of ``phi``.

    On the torus the realized multiplier is periodic with period
    ``2 pi / (theta0 spacing)``, so it can only match ``phi`` on part of the
    box.  When ``phi`` is given, the gap between the two is weighted by the
    symbol of ``x`` and an :class:`AccuracyWarning` is issued above ``tol``.
    """
    grid = x.grid
    if fphi is None:
        if phi is None:
            raise DomainError("give phi or its transform fphi")
        fphi = lambda u: transform_by_sum(grid, phi, u)  # noqa: E731
    nodes = conjugation_nodes(grid, theta, fphi, radius)
    if phi is not None:
        gap = accuracy_gap(nodes, grid, phi, weight=np.abs(dequantize(x, theta).values))
        if gap > tol:
            warnings.warn(
                f"conjugation quadrature misses the multiplier by {gap:.2e} on the symbol "
                f"support (radius {radius}, {len(nodes.w)} nodes)",
                AccuracyWarning,
                stacklevel=2,
            )
    out = np.zeros_like(x.matrix)
    for w, c in zip(nodes.w, nodes.weights):
        out += c * shift_right(grid, theta, w, shift_left(grid, theta, -w, x.matrix))
    return GridOperator(grid, out, f"T_phi({x.label})")


def accuracy_gap(nodes: ConjugationNodes, grid: GridSpec, phi, weight: np.ndarray | None = None) -> float:
    """Largest gap between the realized and the requested multiplier on the grid.

    With ``weight`` (typically ``|f|`` of the operand) the gap is weighted by
    ``weight / max(weight)``, so only the region the operand occupies counts.
    """
    s = grid.points
    gap = np.abs(nodes.realized_multiplier(s) - np.asarray(phi(s), dtype=complex))
    if weight is not None:
        top = np.max(weight)
        if top == 0:
            return 0.0
        gap = gap * weight / top
    return float(np.max(gap))


def translate_conjugate(f: Symbol, theta: ThetaMatrix, t) -> Symbol:
    """Symbol of ``U(-t) Op(f) U(t)`` via dense conjugation and inverse quantization."""
    x = quantize(f.grid, theta, f)
    return dequantize(conjugate_by_shift(x, theta, t), theta)


def translate_phase(f: Symbol, theta: ThetaMatrix, t) -> Symbol:
    """Closed form of :func:`translate_conjugate`: ``s -> e^{i<s, theta t>} f(s)``."""
    t = np.asarray(t, dtype=float)
    return Symbol(f.grid, np.exp(1j * theta.pairing(f.grid.points, t[None, :])) * f.values)


def nabla_conjugate(x: GridOperator, t) -> GridOperator:
    """``e^{i<t,nabla>} x e^{-i<t,nabla>}`` with ``nabla`` the coordinate multipliers."""
    t = np.asarray(t, dtype=float)
    if t.shape != (x.grid.d,):
        raise DimensionError(f"expected a vector of length {x.grid.d}")
    phase = np.exp(1j * x.grid.points @ t)
    return GridOperator(x.grid, phase[:, None] * x.matrix * np.conj(phase)[None, :],
                        f"e^(i<t,nabla>){x.label}e^(-i<t,nabla>)")


def nabla_shift_vector(grid: GridSpec, theta: ThetaMatrix, t) -> np.ndarray:
    """Lattice vector ``theta^{-1} t``; raises when ``t`` is not of the form ``theta w``."""
    w = theta.inverse @ np.asarray(t, dtype=float)
    try:
        return grid.lattice_index(w) * grid.spacing
    except AlignmentError as exc:
        raise AlignmentError(f"theta^-1 t = {w.tolist()} is off the lattice") from exc


def phase_multiplier(t) -> Callable[[np.ndarray], np.ndarray]:
    """``u -> e^{i<t,u>}`` for use with :func:`moyal_lab.plane.multiplier`."""
    t = np.asarray(t, dtype=float)
    return lambda u: np.exp(1j * u @ t)


def translation_lipschitz(f: Symbol, theta: ThetaMatrix, t) -> float:
    """``||U(-t) x U(t) - x||_2 / |t|`` in the symbol L2 norm, for a lattice step ``t``."""
    t = np.asarray(t, dtype=float)
    moved = translate_phase(f, theta, t)
    return (moved - f).l2_norm() / float(np.linalg.norm(t))


__all__ = [
    "AccuracyWarning", "ConjugationNodes", "MultiIndex", "accuracy_gap", "conjugation_average",
    "conjugation_nodes", "derivative_commutator", "derivative_symbol", "fourier_multiplier",
    "gaussian", "gaussian_transform", "nabla_conjugate", "nabla_shift_vector", "phase_multiplier",
    "transform_by_sum", "translate_conjugate", "translate_phase", "translation_lipschitz",
]
