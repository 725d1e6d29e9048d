"""Check suites behind the CLI commands and the acceptance tests.

Every suite returns a :class:`SuiteResult`: named checks with the measured
value and the threshold it was held to, plus any spectra and estimates worth
persisting.  Suites are deterministic for a fixed configuration and seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma

from . import calculus, fock, plane, spectral, traces
from .config import ExperimentConfig, SymbolSpec
from .errors import AlignmentError, ConfigurationError, ResolutionError
from .plane import GridOperator, GridSpec, PlaneContext, Symbol, ThetaMatrix
from .traces import EstimatorWindow, SingularSpectrum


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": _clean(self.value),
            "threshold": _clean(self.threshold),
            "detail": {k: _clean(v) for k, v in sorted(self.detail.items())},
        }


def _clean(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    return v


def at_most(name: str, value: float, threshold: float, **detail) -> Check:
    return Check(name, bool(value <= threshold), float(value), float(threshold), detail)


@dataclass
class SuiteResult:
    checks: list[Check] = field(default_factory=list)
    spectra: dict[str, SingularSpectrum] = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    def add(self, check: Check) -> Check:
        if any(c.name == check.name for c in self.checks):
            raise ValueError(f"check {check.name!r} recorded twice")
        self.checks.append(check)
        return check

    def extend(self, checks) -> None:
        for c in checks:
            self.add(c)

    def merge(self, other: "SuiteResult") -> None:
        self.extend(other.checks)
        self.spectra.update(other.spectra)
        self.estimates.update(other.estimates)
        self.timings.update(other.timings)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


class Stopwatch:
    def __init__(self, sink: dict, name: str):
        self.sink, self.name = sink, name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.sink[self.name] = self.sink.get(self.name, 0.0) + time.perf_counter() - self.start


# ---------------------------------------------------------------------------
# symbols from specs


def build_symbol(spec: SymbolSpec, grid: GridSpec, theta: ThetaMatrix) -> Symbol:
    """Sample a non-square symbol spec on ``grid``; grid mismatches surface as config errors."""
    try:
        return _sample_symbol(spec, grid, theta)
    except (AlignmentError, ResolutionError) as exc:
        raise ConfigurationError(str(exc), "symbol") from exc


def _sample_symbol(spec: SymbolSpec, grid: GridSpec, theta: ThetaMatrix) -> Symbol:
    fam = spec.family
    if fam == "zero":
        return Symbol.zeros(grid)
    if fam == "gaussian":
        return plane.gaussian_symbol(grid, spec.param("sigma", 1.0))
    if fam == "bump":
        return plane.bump_symbol(grid, spec.param("radius", 1.0))
    if fam == "matrix-unit":
        return fock.matrix_unit_symbol(int(spec.param("k")), int(spec.param("l")), grid, theta)
    if fam == "lattice-delta":
        s0 = np.asarray(spec.param("s0"), dtype=float)
        if s0.shape != (grid.d,):
            raise ConfigurationError(f"s0 must have {grid.d} components", "symbol")
        return plane.lattice_delta(grid, s0)
    raise ConfigurationError(f"{fam} is not a plain symbol", "symbol")


def build_operator(spec: SymbolSpec, ctx: PlaneContext) -> tuple[GridOperator, Symbol]:
    """Quantize a symbol spec; squares are formed as ``Op(g)^* Op(g)``; returns the operator and its symbol."""
    if spec.family == "square":
        if spec.inner.family == "square":
            raise ConfigurationError("nested squares are not supported", "symbol")
        inner = build_symbol(spec.inner, ctx.grid, ctx.theta)
        y = ctx.quantize(inner).matrix
        x = GridOperator(ctx.grid, y.conj().T @ y, f"square({spec.inner})")
        return x, plane.dequantize(x, ctx.theta)
    f = build_symbol(spec, ctx.grid, ctx.theta)
    return ctx.quantize(f), f


def resource_check(config: ExperimentConfig, force: bool, sizes=None) -> None:
    from .config import RESOURCE_CEILING

    for n in sizes or (config.N,):
        dim = n**config.d
        if dim > RESOURCE_CEILING and not force:
            raise ConfigurationError(
                f"N^d = {dim} exceeds the dense ceiling {RESOURCE_CEILING}; rerun with --force", "N"
            )


def _lattice_vectors(rng: np.random.Generator, grid: GridSpec, count: int, reach: int = 3) -> list[np.ndarray]:
    out = []
    while len(out) < count:
        idx = rng.integers(-reach, reach + 1, size=grid.d)
        if np.any(idx):
            out.append(idx * grid.spacing)
    return out


# ---------------------------------------------------------------------------
# plane-core and Fock checks


def algebra_checks(N: int = 32, L: float = 16.0, seed: int = 0, pairs: int = 5) -> list[Check]:
    """Exact twisted-shift identities: group law, unitarity, coordinate and phase conjugations."""
    ctx = PlaneContext.build(2, N, L)
    g, th = ctx.grid, ctx.theta
    rng = np.random.default_rng(seed)
    half = N // 2
    comm = unit = 0.0
    for _ in range(pairs):
        t, s = (rng.integers(-half, half, size=2) * g.spacing for _ in range(2))
        Ut, Us, Uts = ctx.shift(t), ctx.shift(s), ctx.shift(t + s)
        prod = plane.shift_left(g, th, t, Us.matrix)
        comm = max(comm, np.max(np.abs(Uts.matrix - np.exp(-0.5j * th.pairing(t, s)) * prod)))
        gram = plane.shift_right(g, th, t, Ut.matrix.conj().T)
        unit = max(unit, np.max(np.abs(gram - np.eye(g.size))))
        xi = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
        unit = max(unit, abs(np.linalg.norm(Ut.matrix @ xi) - np.linalg.norm(xi)) / np.linalg.norm(xi))

    box = GridSpec(2, N, L, plane.Boundary.OPEN_BOX)
    coord = 0.0
    for _ in range(pairs):
        s = rng.integers(-half // 2, half // 2, size=2) * g.spacing
        U = plane.twisted_shift(box, th, s).matrix
        for k in (1, 2):
            u = box.points[:, k - 1]
            comm_k = u[:, None] * U - U * u[None, :]
            coord = max(coord, np.max(np.abs(comm_k - s[k - 1] * U)))

    phase = 0.0
    for _ in range(pairs):
        s = rng.integers(-half, half, size=2) * g.spacing
        w = rng.integers(-4, 5, size=2) * g.spacing
        t = th.matrix @ w
        U = ctx.shift(s)
        lhs = calculus.nabla_conjugate(U, t).matrix
        phase = max(phase, np.max(np.abs(lhs - np.exp(1j * t @ s) * U.matrix)))
        phase = max(phase, np.max(np.abs(lhs - plane.conjugate_by_shift(U, th, w).matrix)))

    s0 = rng.integers(-half, half, size=2) * g.spacing
    delta = np.max(np.abs(ctx.quantize(plane.lattice_delta(g, s0)).matrix - ctx.shift(s0).matrix))
    return [
        at_most("algebra.commutation", comm, 1e-12, N=N),
        at_most("algebra.unitarity", unit, 1e-12, N=N),
        at_most("algebra.coordinate_commutator", coord, 1e-12, N=N, boundary="open-box"),
        at_most("algebra.nabla_phase", phase, 1e-12, N=N),
        at_most("algebra.lattice_delta", delta, 1e-12, N=N),
    ]


def quantization_checks(N: int = 64, L: float = 16.0, seed: int = 0) -> list[Check]:
    """L2 isometry after calibration, adjoint symbol and linearity of ``Op``."""
    ctx = PlaneContext.build(2, N, L)
    g, th = ctx.grid, ctx.theta
    f = plane.gaussian_symbol(g)
    X = ctx.quantize(f)
    iso = abs(plane.l2_calibration(g) * X.hs_norm() / f.l2_norm() - 1.0)
    rng = np.random.default_rng(seed)
    h = Symbol(g, (rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)) * np.exp(-np.sum(g.points**2, 1) / 8))
    H = ctx.quantize(h)
    adj = np.max(np.abs(H.matrix.conj().T - ctx.quantize(h.reversed_conjugate()).matrix))
    a, b = 0.7 - 0.2j, -1.3
    lin = np.max(np.abs(ctx.quantize(a * f + b * h).matrix - (a * X.matrix + b * H.matrix)))
    return [
        at_most("quantize.l2_isometry", iso, 1e-6, N=N, L=L, calibration=plane.l2_calibration(g)),
        at_most("quantize.adjoint_symbol", adj, 1e-12, N=N),
        at_most("quantize.linearity", lin, 1e-12, N=N),
    ]


def fock_grid(theta0: float = 2.0, N: int = 96, L: float = 20.0) -> tuple[GridSpec, ThetaMatrix]:
    """Open-box grid fine enough to resolve 64 Hermite states at ``theta0 = 2``."""
    return GridSpec(2, N, L, plane.Boundary.OPEN_BOX), plane.make_theta(2, theta0)


def matrix_unit_errors(M: int, kmax: int = 3, grid=None, theta=None) -> dict[str, float]:
    """Largest violation of the matrix-unit relations among ``e_kl``, ``k, l <= kmax``."""
    if grid is None:
        grid, theta = fock_grid()
    units = {(k, l): fock.matrix_unit_symbol(k, l, grid, theta) for k in range(kmax + 1) for l in range(kmax + 1)}
    rep = {kl: fock.represent(f, M, theta).matrix for kl, f in units.items()}
    product = adjoint = trace = shape = 0.0
    for (k, l), A in rep.items():
        E = np.zeros((M, M))
        E[k, l] = 1.0
        shape = max(shape, np.max(np.abs(A - E)))
        adjoint = max(adjoint, np.max(np.abs(A.conj().T - rep[(l, k)])))
        trace = max(trace, abs(np.trace(A) - (k == l)))
        for (a, b), B in rep.items():
            target = rep[(k, b)] if l == a else 0.0
            product = max(product, np.max(np.abs(A @ B - target)))
    return {"product": product, "adjoint": adjoint, "trace": trace, "shape": shape}


def fock_checks(M_small: int = 32, M_large: int = 64, floor: float = 1e-12) -> list[Check]:
    grid, theta = fock_grid()
    small = matrix_unit_errors(M_small, grid=grid, theta=theta)
    large = matrix_unit_errors(M_large, grid=grid, theta=theta)
    worst_small = max(small.values())
    worst_large = max(large.values())
    checks = [
        at_most("fock.matrix_units", worst_small, 1e-3, M=M_small, **{f"{k}_M{M_small}": v for k, v in small.items()}),
        # at machine precision the error can only stay flat; allow noise below the floor
        at_most("fock.matrix_units_decrease", worst_large, max(worst_small, floor),
                M=M_large, **{f"{k}_M{M_large}": v for k, v in large.items()}),
    ]
    ctx = PlaneContext.build(2, 64, 16.0)
    cal = fock.calibrate_trace(ctx.grid, ctx.theta, M=M_large)
    checks.append(at_most("fock.trace_calibration", abs(cal.ratio - 1.0), 0.05, fitted=cal.fitted,
                          closed_form=cal.closed_form, truncation_error=cal.truncation_error))
    f = plane.gaussian_symbol(ctx.grid)
    X = ctx.quantize(f)
    grid_l2 = np.sqrt(np.real(np.sum(np.abs(X.matrix) ** 2)) / ctx.multiplicity())
    fock_l2 = fock.lp_norm(fock.represent(fock.resolve_for_fock(f, ctx.theta, M_large), M_large, ctx.theta), 2)
    checks.append(at_most("fock.cross_representation_l2", abs(fock_l2 / grid_l2 - 1.0), 1e-3,
                          grid=grid_l2, fock=fock_l2))
    return checks


# ---------------------------------------------------------------------------
# calculus checks


def derivative_checks(N: int = 32, L: float = 16.0) -> list[Check]:
    ctx = PlaneContext.build(2, N, L)
    box = GridSpec(2, N, L, plane.Boundary.OPEN_BOX)
    f = plane.gaussian_symbol(box, 1.0, center=(0.5, -0.25))
    X = plane.quantize(box, ctx.theta, f)
    worst = 0.0
    for alpha in [(1,), (2,), (1, 2), (2, 1, 1)]:
        sym = plane.quantize(box, ctx.theta, calculus.derivative_symbol(f, alpha)).matrix
        worst = max(worst, np.max(np.abs(calculus.derivative_commutator(X, alpha).matrix - sym)))
    return [at_most("calculus.commutator_route", worst, 1e-12, N=N, boundary="open-box")]


def multiplier_corpus(grid: GridSpec) -> dict[str, Symbol]:
    return {
        "gaussian": plane.gaussian_symbol(grid, 1.0),
        "shifted_gaussian": plane.gaussian_symbol(grid, 0.8, center=(1.0, 0.5)),
        "lattice_delta": plane.lattice_delta(grid, np.array([2, -1]) * grid.spacing),
    }


def fourier_multiplier_checks(N: int = 32, L: float = 16.0) -> list[Check]:
    """Symbol route versus conjugation average for a Gaussian multiplier."""
    ctx = PlaneContext.build(2, N, L)
    g, th = ctx.grid, ctx.theta
    worst = 0.0
    detail = {}
    for name, f in multiplier_corpus(g).items():
        X = ctx.quantize(f)
        A = calculus.conjugation_average(X, th, phi=calculus.gaussian, fphi=calculus.gaussian_transform(2))
        B = ctx.quantize(calculus.fourier_multiplier(f, calculus.gaussian))
        rel = np.linalg.norm(A.matrix - B.matrix) / np.linalg.norm(B.matrix)
        detail[name] = rel
        worst = max(worst, rel)
    return [at_most("calculus.fourier_multiplier_dual_route", worst, 1e-3, N=N, **detail)]


def translation_checks(N: int = 32, L: float = 16.0, seed: int = 0, count: int = 5) -> list[Check]:
    ctx = PlaneContext.build(2, N, L)
    g, th = ctx.grid, ctx.theta
    f = plane.gaussian_symbol(g, 1.0, center=(0.25, -0.5))
    rng = np.random.default_rng(seed)
    closed = cov = 0.0
    for t in _lattice_vectors(rng, g, count):
        moved = calculus.translate_conjugate(f, th, t)
        closed = max(closed, np.max(np.abs(moved.values - calculus.translate_phase(f, th, t).values)))
        for alpha in [(1,), (1, 2)]:
            lhs = calculus.derivative_symbol(moved, alpha)
            rhs = calculus.translate_conjugate(calculus.derivative_symbol(f, alpha), th, t)
            cov = max(cov, np.max(np.abs(lhs.values - rhs.values)))
    lip = max(calculus.translation_lipschitz(f, th, np.array(e) * g.spacing) for e in [(1, 0), (0, 1)])
    # |e^{i<s,theta t>} - 1| <= |s| |theta t|
    bound = np.linalg.norm(th.matrix, 2) * Symbol(g, np.linalg.norm(g.points, axis=1) * f.values).l2_norm()
    return [
        at_most("calculus.translate_closed_form", closed, 1e-12, N=N),
        at_most("calculus.derivative_covariance", cov, 1e-12, N=N),
        at_most("calculus.translation_lipschitz", lip, bound, N=N),
    ]


def sobolev_translation_checks(N: int = 32, L: float = 16.0, M: int = 64, seed: int = 0, count: int = 5) -> list[Check]:
    """``||U(-t) x U(t)||_{W^{2,1}} = ||x||_{W^{2,1}}`` with the translated symbol from the dense route."""
    ctx = PlaneContext.build(2, N, L)
    g, th = ctx.grid, ctx.theta
    f = plane.gaussian_symbol(g, 1.0)
    base = fock.sobolev_norm(fock.resolve_for_fock(f, th, M), 2, 1.0, M, th)
    rng = np.random.default_rng(seed)
    worst = 0.0
    values = []
    for t in _lattice_vectors(rng, g, count, reach=2):
        moved = calculus.translate_conjugate(f, th, t)
        val = fock.sobolev_norm(fock.resolve_for_fock(moved, th, M), 2, 1.0, M, th)
        values.append(val)
        worst = max(worst, abs(val / base - 1.0))
    return [at_most("calculus.sobolev_translation", worst, 1e-3, base=base, translated=values)]


def nabla_translation_checks(N: int = 32, L: float = 16.0, seed: int = 0) -> list[Check]:
    ctx = PlaneContext.build(2, N, L)
    g, th = ctx.grid, ctx.theta
    rng = np.random.default_rng(seed)
    X = ctx.quantize(plane.gaussian_symbol(g, 1.2, center=(0.5, 0.0)))
    worst = 0.0
    for w in _lattice_vectors(rng, g, 3):
        t = th.matrix @ w
        lhs = calculus.nabla_conjugate(X, t).matrix
        rhs = plane.conjugate_by_shift(X, th, calculus.nabla_shift_vector(g, th, t)).matrix
        worst = max(worst, np.max(np.abs(lhs - rhs)))
    return [at_most("calculus.nabla_equals_translation", worst, 1e-12, N=N)]


def averaging_checks(N: int = 32, L: float = 16.0, M: int = 64) -> list[Check]:
    """Derivatives commute with the Gaussian average, and the average contracts the trace norm."""
    ctx = PlaneContext.build(2, N, L)
    g, th = ctx.grid, ctx.theta
    f = plane.gaussian_symbol(g, 1.0, center=(0.5, 0.0))
    X = ctx.quantize(f)
    TX = calculus.conjugation_average(X, th, phi=calculus.gaussian, fphi=calculus.gaussian_transform(2))
    tsym = plane.dequantize(TX, th)
    worst = 0.0
    for alpha in [(1,), (1, 2)]:
        mono = calculus.MultiIndex(alpha).monomial(g.points)
        route_a = calculus.derivative_symbol(tsym, alpha)
        route_b = calculus.fourier_multiplier(f, lambda s, m=mono: m * calculus.gaussian(s))
        worst = max(worst, (route_a - route_b).l2_norm() / route_b.l2_norm())
    rep_f = fock.represent(fock.resolve_for_fock(f, th, M), M, th)
    rep_t = fock.represent(fock.resolve_for_fock(tsym, th, M), M, th)
    n_f = fock.with_corner(lambda x: fock.lp_norm(x, 1), rep_f)
    n_t = fock.with_corner(lambda x: fock.lp_norm(x, 1), rep_t)
    eps = n_f.error + n_t.error
    return [
        at_most("calculus.derivative_average_commute", worst, 1e-3, N=N),
        at_most("calculus.l1_contraction", n_t.value, (1 + eps) * n_f.value, fphi_l1=1.0,
                truncation_error=eps),
    ]


# ---------------------------------------------------------------------------
# block decomposition


def block_checks(side: int = 9, points_per_unit: int = 4, seed: int = 0, theta0: float = 1.0,
                 samples: int = 6) -> list[Check]:
    grid = spectral.box_grid(side, points_per_unit)
    theta = plane.make_theta(2, theta0)
    f = plane.bump_symbol(grid, 1.0)
    dec = spectral.block_decompose(f, theta)
    total = np.zeros_like(dec.x.matrix)
    orth = merge = 0.0
    for l1, l2, T in dec:
        total += T.matrix
        orth = max(orth, spectral.orthogonality_residual(dec, l1, l2))
        dense = spectral.singular_spectrum(T, hermitian=False).values
        merged = dec.block_spectra(l1, l2).values
        merge = max(merge, np.max(np.abs(dense - merged)))
    recon = np.max(np.abs(total - dec.floor_product().matrix))

    rng = np.random.default_rng(seed)
    full = [m for m in dec.layout.labels if dec.layout.is_full(m)]
    equiv = spec_eq = 0.0
    tested = 0
    while tested < samples:
        m = full[rng.integers(len(full))]
        l1 = tuple(rng.integers(-1, 2, size=2))
        if not dec.layout.is_full(np.add(m, l1)):
            continue
        equiv = max(equiv, spectral.local_block_equivalence(dec, m, l1))
        a = spectral.singular_spectrum(dec.cell_block(m, l1), hermitian=False).values
        b = spectral.singular_spectrum(dec.cell_block((0, 0), l1), hermitian=False).values
        spec_eq = max(spec_eq, np.max(np.abs(a - b)))
        tested += 1
    zero = max(spectral.local_block_equivalence(dec, (0, 0), l1) for l1 in dec.offsets)
    return [
        at_most("blocks.reconstruction", recon, 1e-10, side=side),
        at_most("blocks.orthogonality", orth, 1e-12),
        at_most("blocks.unitary_equivalence", max(equiv, zero), 1e-10, samples=samples),
        at_most("blocks.equivalent_spectra", spec_eq, 1e-10),
        at_most("blocks.direct_sum_merge", merge, 1e-10),
    ]


# ---------------------------------------------------------------------------
# kernels


def random_trig_kernel(rng: np.random.Generator, n: int, d: int = 1, degree: int = 3) -> np.ndarray:
    """Random trigonometric polynomial of the given degree on ``[0,1)^d x [0,1)^d``."""
    nodes = np.arange(n) / n
    modes = np.arange(-degree, degree + 1)
    K = np.zeros((n,) * (2 * d), dtype=complex)
    grids = np.meshgrid(*([nodes] * (2 * d)), indexing="ij")
    for m in np.array(np.meshgrid(*([modes] * (2 * d)), indexing="ij")).reshape(2 * d, -1).T:
        c = (rng.standard_normal() + 1j * rng.standard_normal()) / (1.0 + np.sum(m**2))
        K += c * np.exp(2j * np.pi * sum(mk * gk for mk, gk in zip(m, grids)))
    return K


def random_smooth_kernel(rng: np.random.Generator, n: int) -> np.ndarray:
    """Periodic smooth kernel on ``[0,1)^2`` built from Gaussian bumps on the circle."""
    t = np.arange(n) / n
    T, S = np.meshgrid(t, t, indexing="ij")
    K = np.zeros((n, n), dtype=complex)
    for _ in range(3):
        a, b = rng.uniform(0, 1, 2)
        w = rng.uniform(0.5, 1.5)
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        K += amp * np.exp(w * (np.cos(2 * np.pi * (T - a)) + np.cos(2 * np.pi * (S - b))))
    return K


def kernel_checks(count: int = 20, seed: int = 0, n: int = 48) -> list[Check]:
    rng = np.random.default_rng(seed)
    slack = []
    for i in range(count):
        if i % 2 == 0:
            K = random_trig_kernel(rng, n, d=1)
        elif i % 4 == 1:
            K = random_smooth_kernel(rng, n)
        else:
            K = random_trig_kernel(rng, 10, d=2, degree=2)
        op = spectral.kernel_operator(K)
        slack.append(op.coeff_bound - op.trace_norm())
    t = np.arange(n) / n
    a = np.exp(np.sin(2 * np.pi * t))
    b = np.cos(2 * np.pi * t) + 0.5j * np.sin(4 * np.pi * t)
    K = np.multiply.outer(a, np.conj(b))
    op = spectral.kernel_operator(K)
    norm_a = np.sqrt(np.sum(np.abs(a) ** 2) / n)
    norm_b = np.sqrt(np.sum(np.abs(b) ** 2) / n)
    rank_one = abs(op.trace_norm() - norm_a * norm_b)
    return [
        Check("kernel.fourier_bound", bool(min(slack) >= 0), float(min(slack)), 0.0,
              {"count": count, "largest_slack": float(max(slack))}),
        at_most("kernel.rank_one_closed_form", rank_one, 1e-8),
        Check("kernel.rank_one_bound", bool(op.coeff_bound >= op.trace_norm()), float(op.coeff_bound - op.trace_norm()), 0.0),
    ]


# ---------------------------------------------------------------------------
# synthetic trace analytics


def trace_checks(count: int = 1_000_000) -> tuple[list[Check], dict]:
    harmonic = traces.harmonic_spectrum(count)
    window = EstimatorWindow()
    est = traces.dixmier_estimate(harmonic, window)
    n = count - 1
    # H_{n+1} = digamma(n + 2) + euler_gamma
    oracle = (digamma(n + 2.0) + np.euler_gamma) / np.log(2.0 + n)
    checks = [
        at_most("traces.log_cesaro_harmonic", abs(traces.log_cesaro(harmonic, n) - oracle), 1e-12),
        at_most("traces.harmonic_limit", abs(est.limit - 1.0), 0.02, error_bar=est.error_bar),
        at_most("traces.harmonic_measurable", est.diagnostic, 0.05),
    ]
    osc = traces.dixmier_estimate(traces.oscillating_sequence(count), window)
    checks.append(Check("traces.oscillating_flagged", bool(osc.diagnostic >= 0.2 and not osc.measurable),
                        osc.diagnostic, 0.2, {"limit": osc.limit}))
    trace_class = traces.dixmier_estimate(SingularSpectrum(1.0 / np.arange(1, count + 1) ** 2), window)
    checks.append(at_most("traces.trace_class_null", abs(trace_class.limit), 0.01))

    factors = {"S=(1/2,1/2)": [0.5, 0.5], "S=(1,eps)": [1.0, 1e-6], "S=(0.3,0.2,0.1)": [0.3, 0.2, 0.1]}
    worst = 0.0
    detail = {}
    for name, s in factors.items():
        lim = traces.dixmier_estimate(traces.tensor_spectrum(s, harmonic), window).limit
        rel = abs(lim - sum(s)) / sum(s)
        detail[name] = lim
        worst = max(worst, rel)
    checks.append(at_most("traces.tensor_factorization", worst, 0.03, **detail))

    a = SingularSpectrum(1.0 / np.arange(1, count // 2 + 1))
    b = SingularSpectrum(0.5 / np.arange(1, count // 2 + 1))
    ea, eb = traces.dixmier_estimate(a, window), traces.dixmier_estimate(b, window)
    summed = traces.dixmier_estimate(SingularSpectrum(a.values + b.values), window)
    checks.append(at_most("traces.additivity", abs(summed.limit - ea.limit - eb.limit),
                          summed.error_bar + ea.error_bar + eb.error_bar))
    return checks, {"harmonic": est, "oscillating": osc}


def _merge_residual(blocks: list[np.ndarray], hermitian: bool) -> float:
    dim = sum(B.shape[0] for B in blocks)
    dense = np.zeros((dim, dim), dtype=complex)
    start = 0
    for B in blocks:
        n = B.shape[0]
        dense[start:start + n, start:start + n] = B
        start += n
    parts = [spectral.singular_spectrum(B, hermitian=hermitian) for B in blocks]
    merged = traces.direct_sum_spectrum(parts).values
    oracle = spectral.singular_spectrum(dense, hermitian=hermitian).values
    return float(np.max(np.abs(merged - oracle)) / oracle[0])


def direct_sum_checks(seed: int = 0, hermitian_sizes=(1024, 1536, 1536), general_sizes=(256, 512, 512)) -> list[Check]:
    """Merged block spectra against the dense block-diagonal matrix.

    The 4096-dimensional case uses Hermitian blocks so the dense oracle is an
    eigenvalue problem; general blocks are checked at a smaller size.
    """
    rng = np.random.default_rng(seed)

    def draw(n):
        return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))

    herm = [(lambda A: A + A.conj().T)(draw(n)) for n in hermitian_sizes]
    general = [draw(n) for n in general_sizes]
    return [
        at_most("traces.direct_sum_merge", _merge_residual(herm, True), 1e-12, dimension=sum(hermitian_sizes)),
        at_most("traces.direct_sum_merge_general", _merge_residual(general, False), 1e-12,
                dimension=sum(general_sizes)),
    ]


# ---------------------------------------------------------------------------
# integration formula pipeline


def cif_constant(theta: ThetaMatrix) -> float:
    """Ratio of the Dixmier limit of ``x (1 - Delta)^(-d/2)`` to ``tau(x)``: ``(theta0/2)^(d/2) / (d/2)!``."""
    from math import factorial

    d = theta.d
    return float((theta.theta0 / 2.0) ** (d // 2) / factorial(d // 2))


def canonical_trace(x_symbol: Symbol, theta: ThetaMatrix, M: int) -> fock.Truncated:
    """``tau(Op f)`` through the Hermite representation (d = 2) with its corner error bar."""
    if theta.d == 2:
        rep = fock.represent(fock.resolve_for_fock(x_symbol, theta, M), M, theta)
        return fock.with_corner(fock.trace_tau, rep)
    grid = x_symbol.grid
    value = (2 * np.pi) ** (grid.d / 4) * x_symbol.at_origin().real / theta.pfaffian
    return fock.Truncated(value, value)


def estimator_window(config: ExperimentConfig, ctx: PlaneContext) -> EstimatorWindow:
    cap = int(config.window_fraction * ctx.multiplicity())
    return EstimatorWindow(config.n_min, cap, config.points_per_octave, config.guard)


@dataclass
class CifRun:
    """One pass of the integration-formula pipeline on one grid."""

    ctx: PlaneContext
    x: GridOperator
    x_symbol: Symbol
    tau: fock.Truncated
    spectrum: SingularSpectrum
    estimate: object
    window: EstimatorWindow
    positive: bool

    @property
    def expected(self) -> float:
        return cif_constant(self.ctx.theta) * self.tau.value

    @property
    def discrepancy(self) -> float:
        if self.expected == 0:
            return abs(self.estimate.limit)
        return abs(self.estimate.limit - self.expected) / abs(self.expected)


def sandwich_spectrum(x: GridOperator, x_symbol: Symbol, theta: ThetaMatrix, variant: str = "smooth",
                      meta: dict | None = None, require_positive: bool = False) -> SingularSpectrum:
    c = spectral.cwikel_operator(x_symbol, theta, variant, x=x)
    return spectral.singular_spectrum(spectral.symmetrize(c), hermitian=True,
                                      require_positive=require_positive, meta=meta)


def _estimate(spectrum: SingularSpectrum, window: EstimatorWindow, positive: bool):
    if not np.any(spectrum.values):
        return traces.SignedEstimate(None, None)
    if positive:
        return traces.dixmier_estimate(spectrum, window)
    return traces.signed_estimate(spectrum, window)


def cif_run(config: ExperimentConfig, N: int | None = None, timings: dict | None = None) -> CifRun:
    timings = {} if timings is None else timings
    ctx = config.context(N)
    with Stopwatch(timings, f"assemble_N{ctx.grid.N}"):
        x, fx = build_operator(config.symbol, ctx)
    if not spectral.is_hermitian(x.matrix, 1e-10):
        raise ConfigurationError("cif needs a self-adjoint x; wrap the symbol as square{...}", "symbol")
    positive = config.symbol.family in ("square", "zero")
    with Stopwatch(timings, f"trace_N{ctx.grid.N}"):
        tau = canonical_trace(fx, ctx.theta, config.M)
    meta = {
        "grid": f"d={ctx.grid.d} N={ctx.grid.N} L={ctx.grid.L:.12g} {ctx.grid.boundary.value}",
        "theta0": f"{ctx.theta.theta0:.12g}",
        "variant": config.variant,
        "symbol": str(config.symbol),
        "symbol_hash": fock.symbol_hash(fx),
    }
    with Stopwatch(timings, f"spectrum_N{ctx.grid.N}"):
        spec = sandwich_spectrum(x, fx, ctx.theta, config.variant, meta, require_positive=positive)
    window = estimator_window(config, ctx)
    est = _estimate(spec, window, positive)
    return CifRun(ctx, x, fx, tau, spec, est, window, positive)


def cif_main_checks(run: CifRun, config: ExperimentConfig) -> list[Check]:
    est = run.estimate
    diag = getattr(est, "diagnostic", 0.0)
    return [
        at_most("cif.relative_discrepancy", run.discrepancy, config.tolerance,
                limit=est.limit, error_bar=est.error_bar, tau=run.tau.value,
                tau_truncation=run.tau.error, constant=cif_constant(run.ctx.theta), N=run.ctx.grid.N),
        at_most("cif.measurability", diag, config.guard, N=run.ctx.grid.N),
    ]


def reference_bump(ctx: PlaneContext, M: int) -> tuple[GridOperator, Symbol, float]:
    """``x0 = Op(bump)`` scaled so that ``tau(x0) = 1``; returns the raw trace too."""
    f0 = plane.bump_symbol(ctx.grid, 1.0)
    t0 = canonical_trace(f0, ctx.theta, M).value
    f0 = f0 * (1.0 / t0)
    return ctx.quantize(f0), f0, t0


def zero_trace_check(run: CifRun, config: ExperimentConfig) -> tuple[Check, object, SingularSpectrum]:
    ctx = run.ctx
    x0, f0, _ = reference_bump(ctx, config.M)
    z = run.x - run.tau.value * x0
    fz = run.x_symbol - run.tau.value * f0
    spec = sandwich_spectrum(z, fz, ctx.theta, config.variant, {"operator": "z = x - tau(x) x0"})
    est = traces.signed_estimate(spec, run.window)
    tau_z = canonical_trace(fz, ctx.theta, config.M).value
    check = at_most("cif.zero_trace", abs(est.limit), est.error_bar, limit=est.limit, tau_z=tau_z,
                    N=ctx.grid.N)
    return check, est, spec


def invariance_checks(run: CifRun, config: ExperimentConfig) -> tuple[list[Check], dict]:
    """Estimates for ``U(-w) x U(w)`` against ``x`` for lattice ``w`` (``t = theta w``)."""
    ctx = run.ctx
    rng = np.random.default_rng(config.seed)
    checks, estimates = [], {}
    for i, w in enumerate(_lattice_vectors(rng, ctx.grid, config.translations)):
        xt = plane.conjugate_by_shift(run.x, ctx.theta, w)
        ft = calculus.translate_phase(run.x_symbol, ctx.theta, w)
        spec = sandwich_spectrum(xt, ft, ctx.theta, config.variant)
        est = _estimate(spec, run.window, run.positive)
        gap = abs(est.limit - run.estimate.limit)
        checks.append(at_most(f"cif.invariance_{i}", gap, est.error_bar + run.estimate.error_bar,
                              w=list(w), t=list(ctx.theta.matrix @ w), limit=est.limit))
        estimates[f"invariance_{i}"] = est
    return checks, estimates


# ---------------------------------------------------------------------------
# Cwikel surrogates across grids


@dataclass
class CwikelSample:
    N: int
    weak_quasinorm: float
    trace_norm_power: float
    correction_trace_norm: float
    sup_k: float
    sup_box: float


def cwikel_sample(run: CifRun, with_correction: bool = True) -> CwikelSample:
    """Weak quasinorm of ``x g(nabla)`` over the estimator window and trace norms of the L1 variants."""
    fx, th, x = run.x_symbol, run.ctx.theta, run.x
    smooth = spectral.cwikel_operator(fx, th, "smooth", x=x).matrix
    sv = spectral.singular_spectrum(smooth, hermitian=False)
    wq = traces.weak_quasinorm(sv, run.window.n_max)
    power = spectral.cwikel_operator(fx, th, "power", x=x).matrix
    tn = spectral.trace_norm(power)
    corr_tn = sup_k = sup_box = float("nan")
    if with_correction:
        corr = spectral.correction_term(fx, th, x=x)
        corr_tn, sup_k, sup_box = spectral.trace_norm(corr.operator), corr.sup_k, corr.sup_box
    return CwikelSample(run.ctx.grid.N, wq, tn, corr_tn, sup_k, sup_box)


def relative_spread(values) -> float:
    """Largest relative deviation from the finest-grid value (the last entry)."""
    ref = values[-1]
    return float(max(abs(v - ref) for v in values) / abs(ref))


def cwikel_checks(samples: list[CwikelSample], with_correction: bool = True) -> list[Check]:
    Ns = [s.N for s in samples]
    checks = [
        at_most("cwikel.weak_quasinorm_stability", relative_spread([s.weak_quasinorm for s in samples]), 0.10,
                N=Ns, values=[s.weak_quasinorm for s in samples]),
        at_most("cwikel.trace_norm_stability", relative_spread([s.trace_norm_power for s in samples]), 0.05,
                N=Ns, values=[s.trace_norm_power for s in samples]),
    ]
    if with_correction:
        checks += [
            at_most("cwikel.correction_trace_norm_stability",
                    relative_spread([s.correction_trace_norm for s in samples]), 0.10,
                    N=Ns, values=[s.correction_trace_norm for s in samples]),
            # grid points undersample the jumps of k, so stability is judged on the box sup
            at_most("cwikel.correction_sup_stability", relative_spread([s.sup_box for s in samples]), 0.05,
                    N=Ns, values=[s.sup_box for s in samples], grid_point_sup=[s.sup_k for s in samples]),
        ]
    return checks


def trend_check(runs: list[CifRun]) -> Check:
    """The CIF discrepancy must not grow under refinement."""
    disc = [r.discrepancy for r in runs]
    growth = max((b - a for a, b in zip(disc, disc[1:])), default=0.0)
    return Check("cif.discrepancy_trend", bool(growth <= 0.0), float(growth), 0.0,
                 {"N": [r.ctx.grid.N for r in runs], "discrepancy": disc})


# ---------------------------------------------------------------------------
# command suites


def suite_verify_algebra(config: ExperimentConfig) -> SuiteResult:
    out = SuiteResult()
    with Stopwatch(out.timings, "algebra"):
        out.extend(algebra_checks(min(config.N, 32), 16.0, config.seed))
    with Stopwatch(out.timings, "quantize"):
        out.extend(quantization_checks(config.N, 16.0, config.seed))
    if config.d == 2:
        with Stopwatch(out.timings, "fock"):
            out.extend(fock_checks(32, config.M))
    return out


def suite_verify_calculus(config: ExperimentConfig) -> SuiteResult:
    out = SuiteResult()
    N = min(config.N, 32)
    for name, fn in [("derivatives", lambda: derivative_checks(N)),
                     ("multiplier", lambda: fourier_multiplier_checks(N)),
                     ("translation", lambda: translation_checks(N, seed=config.seed)),
                     ("nabla", lambda: nabla_translation_checks(N, seed=config.seed)),
                     ("sobolev", lambda: sobolev_translation_checks(N, M=config.M, seed=config.seed)),
                     ("averaging", lambda: averaging_checks(N, M=config.M))]:
        with Stopwatch(out.timings, name):
            out.extend(fn())
    return out


def suite_verify_blocks(config: ExperimentConfig) -> SuiteResult:
    out = SuiteResult()
    with Stopwatch(out.timings, "blocks"):
        out.extend(block_checks(config.box_side, config.points_per_unit, config.seed))
    return out


def suite_verify_traces(config: ExperimentConfig) -> SuiteResult:
    out = SuiteResult()
    with Stopwatch(out.timings, "synthetic"):
        checks, estimates = trace_checks(config.count)
    out.extend(checks)
    out.estimates.update(estimates)
    with Stopwatch(out.timings, "direct_sum"):
        out.extend(direct_sum_checks(config.seed))
    return out


def suite_verify_kernel(config: ExperimentConfig) -> SuiteResult:
    out = SuiteResult()
    with Stopwatch(out.timings, "kernels"):
        out.extend(kernel_checks(config.kernels, config.seed))
    return out


def suite_cif(config: ExperimentConfig) -> SuiteResult:
    out = SuiteResult()
    run = cif_run(config, timings=out.timings)
    out.extend(cif_main_checks(run, config))
    tag = f"N{run.ctx.grid.N}"
    out.spectra[f"cif_{tag}"] = run.spectrum
    out.estimates[f"cif_{tag}"] = run.estimate
    if run.tau.value != 0:
        with Stopwatch(out.timings, "zero_trace"):
            check, est, spec = zero_trace_check(run, config)
        out.add(check)
        out.estimates[f"zero_trace_{tag}"] = est
        with Stopwatch(out.timings, "invariance"):
            checks, ests = invariance_checks(run, config)
        out.extend(checks)
        out.estimates.update({f"{k}_{tag}": v for k, v in ests.items()})
    return out


def suite_sweep(config: ExperimentConfig) -> SuiteResult:
    out = SuiteResult()
    runs, samples = [], []
    for N in config.sweep_N:
        run = cif_run(config, N, timings=out.timings)
        runs.append(run)
        out.spectra[f"sweep_N{N}"] = run.spectrum
        out.estimates[f"sweep_N{N}"] = run.estimate
        with Stopwatch(out.timings, f"cwikel_N{N}"):
            samples.append(cwikel_sample(run))
    finest = runs[-1]
    out.extend(cif_main_checks(finest, config))
    out.add(trend_check(runs))
    out.extend(cwikel_checks(samples))
    return out


SUITES = {
    "verify-algebra": suite_verify_algebra,
    "verify-calculus": suite_verify_calculus,
    "verify-blocks": suite_verify_blocks,
    "verify-traces": suite_verify_traces,
    "verify-kernel": suite_verify_kernel,
    "cif": suite_cif,
    "sweep": suite_sweep,
}
