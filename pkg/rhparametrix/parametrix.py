"""
The global parametrix M(z) of the model Riemann-Hilbert problem, assembled
from the exponentiated Abelian integrals of the two normalised differentials,
and its validation suite.
"""

import cmath
import math
import multiprocessing
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .abelian import AbelianEvaluator, check_jumps, check_v_jumps
from .differentials import build_differential
from .numerics import DEFAULT_TOL, Tolerance
from .period_map import InversionError, InversionReport, invert_psi, mod1_distance
from .surface import Side, SurfaceConfig
from .utils import logger

CUT_JUMP = np.array([[0, 1], [-1, 0]], dtype=complex)
SIGN_RETRY_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class ParametrixMatrix:
    config: SurfaceConfig
    alphas: np.ndarray
    n: int
    rows: dict[int, AbelianEvaluator]
    reports: dict[int, InversionReport]
    # +1 when the targets n alpha were used as given, -1 after the sign retry
    sign_convention: int = 1

    @property
    def targets(self) -> np.ndarray:
        return np.mod(self.n * self.alphas, 1.0)

    def divisor(self, nu: int):
        return self.rows[nu].omega.points


def _build_row(config, targets, nu, tol, quad_tol) -> tuple[AbelianEvaluator, InversionReport]:
    if config.genus == 0:
        report = InversionReport((), 0.0, 0, 0)
    else:
        report = invert_psi(config, targets, nu, tol=tol, quad_tol=quad_tol)
    omega = build_differential(config, report.solution, nu, quad_tol)
    return AbelianEvaluator(omega, quad_tol), report


def _gap_probe(ev: AbelianEvaluator, k: int) -> float:
    """A point of gap k away from the divisor projection."""
    b, a_next = ev.config.gap(k)
    xk = ev.omega.x[k - 1]
    for t in (0.5, 0.3, 0.7):
        x = b + t * (a_next - b)
        if abs(x - xk) > 0.05 * (a_next - b):
            return x
    return b + 0.1 * (a_next - b)


def _gap_jump_ok(ev: AbelianEvaluator, targets: np.ndarray) -> bool:
    for k in range(1, ev.config.N):
        check = check_jumps(ev, _gap_probe(ev, k), "gap", beta=targets)
        if check.max > SIGN_RETRY_THRESHOLD:
            return False
    return True


def build_from_targets(
    config: SurfaceConfig,
    targets,
    tol: float = 1e-10,
    quad_tol: Tolerance = DEFAULT_TOL,
    alphas=None,
    n: int = 1,
) -> ParametrixMatrix:
    targets = np.mod(np.atleast_1d(np.asarray(targets, dtype=float)), 1.0)
    alphas = targets if alphas is None else np.asarray(alphas, dtype=float)
    rows, reports = {}, {}
    sign = 1
    for nu in (1, 2):
        try:
            rows[nu], reports[nu] = _build_row(config, targets, nu, tol, quad_tol)
        except InversionError as e:
            raise ParametrixBuildError(f"inversion for nu={nu} failed: {e}") from e

    if config.genus and not _gap_jump_ok(rows[1], targets):
        logger.warning("gap jumps inconsistent with the targets, retrying with negated targets")
        negated = np.mod(-targets, 1.0)
        for nu in (1, 2):
            try:
                rows[nu], reports[nu] = _build_row(config, negated, nu, tol, quad_tol)
            except InversionError as e:
                raise ParametrixBuildError(f"inversion for nu={nu} failed: {e}") from e
        if not _gap_jump_ok(rows[1], targets):
            raise ParametrixBuildError("gap jumps fail under both sign conventions")
        sign = -1

    return ParametrixMatrix(config, alphas, n, rows, reports, sign)


def build_parametrix(
    config: SurfaceConfig,
    alphas,
    n: int,
    tol: float = 1e-10,
    quad_tol: Tolerance = DEFAULT_TOL,
) -> ParametrixMatrix:
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if len(alphas) != config.genus:
        raise ValueError(f"expected {config.genus} alphas, got {len(alphas)}")
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    targets = np.mod(n * alphas, 1.0)
    mat = build_from_targets(config, targets, tol, quad_tol, alphas=alphas, n=n)
    logger.info(f"built parametrix for N={config.N}, n={n}, targets {targets}")
    return mat


def _check_point(config: SurfaceConfig, z: complex, side):
    if z.imag == 0:
        if config.is_branch_point(z):
            raise EndpointEvaluationError(f"M is singular at the endpoint {z.real}")
        if side is None:
            if config.a[0] <= z.real <= config.b[-1]:
                raise EndpointEvaluationError(
                    f"z = {z.real} lies on [a_1, b_N]: a side tag is mandatory"
                )
            side = Side.ABOVE
        return Side(side)
    return None


def eval_M(mat: ParametrixMatrix, z: complex, side: Side | None = None) -> np.ndarray:
    z = complex(z)
    side = _check_point(mat.config, z, side)
    upper = z.imag > 0 if side is None else side is Side.ABOVE
    r1, r2 = mat.rows[1], mat.rows[2]
    v11, v12 = r1.v(1, z, side), r1.v(2, z, side)
    v21, v22 = r2.v(1, z, side), r2.v(2, z, side)
    if upper:
        return np.array([[v11, v12], [-v21, v22]])
    return np.array([[v11, -v12], [v21, v22]])


def eval_inverse(mat: ParametrixMatrix, z: complex, side: Side | None = None) -> np.ndarray:
    """M^{-1} as the adjugate of M (det M = 1)."""
    M = eval_M(mat, z, side)
    return np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]])


def one_cut_closed_form(
    config: SurfaceConfig, z: complex, side: Side | None = None
) -> np.ndarray:
    if config.N != 1:
        raise ValueError("the closed form exists for one cut only")
    a, b = config.cut(1)
    z = complex(z)
    side = _check_point(config, z, side)
    ratio = (z - b) / (z - a)
    if z.imag == 0 and a < z.real < b:
        gamma = abs(ratio) ** 0.25 * cmath.exp(1j * side.sign * math.pi / 4)
    else:
        gamma = ratio**0.25
    return np.array(
        [
            [(gamma + 1 / gamma) / 2, (gamma - 1 / gamma) / 2j],
            [-(gamma - 1 / gamma) / 2j, (gamma + 1 / gamma) / 2],
        ]
    )


def _interior(lo: float, hi: float, m: int) -> np.ndarray:
    return lo + (hi - lo) * (np.arange(m) + 0.5) / m


@dataclass(frozen=True)
class ZeroOrder:
    nu: int
    gap: int
    sheet: int
    x: float
    order: float


def _fit_order(values, radii) -> float:
    slope, _ = np.polyfit(np.log(radii), np.log(np.abs(values)), 1)
    return float(slope)


def zero_orders(mat: ParametrixMatrix, radii=None) -> list[ZeroOrder]:
    """Fitted vanishing order of M_{nu,j} at z(P_k) for each divisor point on sheet j."""
    radii = np.logspace(-3, -6, 13) if radii is None else np.asarray(radii)
    direction = cmath.exp(1j * math.pi / 4)
    found = []
    for nu in (1, 2):
        ev = mat.rows[nu]
        for k, (xk, wk, sk) in enumerate(
            zip(ev.omega.x, ev.omega.w, ev.omega.sheets), start=1
        ):
            if wk == 0.0:
                continue
            values = [ev.v(sk, xk + r * direction) for r in radii]
            found.append(ZeroOrder(nu, k, sk, float(xk), _fit_order(values, radii)))
    return found


def endpoint_exponents(mat: ParametrixMatrix, radii=None) -> dict[float, float]:
    """Fitted growth exponent of the largest entry of M at every endpoint."""
    radii = np.logspace(-3, -6, 13) if radii is None else np.asarray(radii)
    direction = cmath.exp(1j * math.pi / 4)
    result = {}
    for e in mat.config.endpoints:
        values = [np.max(np.abs(eval_M(mat, e + r * direction))) for r in radii]
        result[float(e)] = _fit_order(values, radii)
    return result


@dataclass
class ResidualReport:
    cut_jump: list[float] = field(default_factory=list)
    gap_jump: list[float] = field(default_factory=list)
    outside_jump: float = 0.0
    v_jump: float = 0.0
    det_deviation: float = 0.0
    asymptotic_constant: float = 0.0
    asymptotic_deviation: float = 0.0
    endpoint_exponents: dict = field(default_factory=dict)
    zero_orders: list = field(default_factory=list)

    def passed(self, jump_threshold: float = 1e-7, det_threshold: float = 1e-9) -> bool:
        jumps = self.cut_jump + self.gap_jump + [self.outside_jump, self.v_jump]
        return (
            max(jumps, default=0.0) <= jump_threshold
            and self.det_deviation <= det_threshold
            and self.asymptotic_deviation <= 1.2 * self.asymptotic_constant * 1e-4
            and all(e >= -0.25 - 0.02 for e in self.endpoint_exponents.values())
            and all(abs(z.order - 1.0) <= 0.02 for z in self.zero_orders)
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["endpoint_exponents"] = {
            repr(k): v for k, v in self.endpoint_exponents.items()
        }
        return data


def _jump_residual(mat, x: float, J: np.ndarray) -> float:
    plus = eval_M(mat, x, Side.ABOVE)
    minus = eval_M(mat, x, Side.BELOW)
    return float(np.max(np.abs(plus - minus @ J)))


def validate(
    mat: ParametrixMatrix, m: int = 20, seed: int = 0, det_samples: int = 100
) -> ResidualReport:
    """
    Jump, determinant, normalisation and local-behaviour residuals of M. Jumps
    are sampled at m interior points per interval, det M at det_samples random
    points off the real axis.
    """
    if m < 10:
        raise ValueError(f"at least 10 samples per interval are required, got {m}")
    if det_samples < 1:
        raise ValueError(f"det_samples must be positive, got {det_samples}")
    config = mat.config
    report = ResidualReport()
    targets = mat.targets

    for k in range(1, config.N + 1):
        a, b = config.cut(k)
        report.cut_jump.append(
            max(_jump_residual(mat, x, CUT_JUMP) for x in _interior(a, b, m))
        )

    poles = np.concatenate([mat.rows[1].omega.x, mat.rows[2].omega.x])
    for k in range(1, config.N):
        b, a_next = config.gap(k)
        phase = cmath.exp(2j * math.pi * targets[k - 1])
        J = np.diag([1 / phase, phase])
        xs = [x for x in _interior(b, a_next, m) if np.min(np.abs(poles - x)) > 1e-6]
        report.gap_jump.append(max(_jump_residual(mat, x, J) for x in xs))

    span = config.b[-1] - config.a[0]
    outside = np.concatenate(
        [config.a[0] - span * _interior(0, 1, m // 2), config.b[-1] + span * _interior(0, 1, m // 2)]
    )
    identity = np.eye(2, dtype=complex)
    report.outside_jump = max(_jump_residual(mat, x, identity) for x in outside)

    v_residuals = []
    for nu in (1, 2):
        ev = mat.rows[nu]
        v_residuals.append(check_v_jumps(ev, float(outside[0]), "outside", targets).max)
        for k in range(1, config.N + 1):
            v_residuals.append(check_v_jumps(ev, config.cut_midpoint(k), "cut").max)
        for k in range(1, config.N):
            b, a_next = config.gap(k)
            x = b + 0.37 * (a_next - b)
            if np.min(np.abs(poles - x)) > 1e-6:
                v_residuals.append(check_v_jumps(ev, x, "gap", targets).max)
    report.v_jump = max(v_residuals)

    rng = np.random.default_rng(seed)
    scale = max(1.0, config.R0)
    shape = (2, det_samples)
    re, im = rng.uniform(-scale, scale, shape)
    pts = re + 1j * im
    pts = pts[pts.imag != 0]
    report.det_deviation = max(abs(np.linalg.det(eval_M(mat, z)) - 1) for z in pts)

    report.asymptotic_constant = 1e2 * np.max(np.abs(eval_M(mat, 1e2j) - identity))
    report.asymptotic_deviation = float(np.max(np.abs(eval_M(mat, 1e4j) - identity)))
    report.endpoint_exponents = endpoint_exponents(mat)
    report.zero_orders = zero_orders(mat)

    logger.info(
        f"validation: max cut jump {max(report.cut_jump):.2e}, "
        f"max gap jump {max(report.gap_jump, default=0.0):.2e}, "
        f"det deviation {report.det_deviation:.2e}"
    )
    return report


def sweep_test_points(config: SurfaceConfig, eps: float, count: int = 8):
    """Fixed test set: circles of radius eps around the endpoints and both sides of the real line."""
    points = []
    angles = math.pi / 8 + 2 * math.pi * np.arange(count) / count
    for e in config.endpoints:
        points.extend((complex(e + eps * cmath.exp(1j * t)), None) for t in angles)
    for k in range(1, config.N + 1):
        a, b = config.cut(k)
        if b - a > 2 * eps:
            for x in _interior(a + eps, b - eps, count):
                points.extend([(complex(x), Side.ABOVE), (complex(x), Side.BELOW)])
    for k in range(1, config.N):
        b, a_next = config.gap(k)
        if a_next - b > 2 * eps:
            for x in _interior(b + eps, a_next - eps, count):
                points.extend([(complex(x), Side.ABOVE), (complex(x), Side.BELOW)])
    return points


@dataclass
class BoundednessReport:
    envelope: float
    grid_points: int
    skipped: int
    norms: dict = field(default_factory=dict)
    inverse_norms: dict = field(default_factory=dict)

    @property
    def all_within(self) -> bool:
        return all(v <= 1.05 * self.envelope for v in self.norms.values())


def _sup_norm(mat: ParametrixMatrix, points, inverse: bool = False) -> float:
    f = eval_inverse if inverse else eval_M
    return max(float(np.max(np.abs(f(mat, z, side)))) for z, side in points)


def _grid_norm(task) -> float | None:
    config, beta, quad_tol, points = task
    try:
        mat = build_from_targets(config, beta, quad_tol=quad_tol)
    except (ParametrixBuildError, InversionError) as e:
        logger.warning(f"grid point {beta} skipped: {e}")
        return None
    return _sup_norm(mat, points)


def boundedness_sweep(
    config: SurfaceConfig,
    alphas,
    n_max: int,
    m: int = 64,
    eps: float = 0.1,
    quad_tol: Tolerance = DEFAULT_TOL,
    count: int = 8,
    workers: int = 1,
) -> BoundednessReport:
    """
    Envelope of sup |M| over an m^(N-1) grid of targets on the torus, then
    sup |M(.; n alpha)| and sup |M^{-1}(.; n alpha)| for n = 0..n_max on the
    same test set. Grid builds run in a process pool when workers > 1; the
    reduction follows grid order either way.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    points = sweep_test_points(config, eps, count)
    g = config.genus

    if g == 0:
        grid = np.zeros((1, 0))
    else:
        axes = np.meshgrid(*[np.arange(m) / m] * g, indexing="ij")
        grid = np.stack(axes, -1).reshape(-1, g)
    tasks = [(config, beta, quad_tol, points) for beta in grid]
    start = time.perf_counter()
    if workers > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            grid_norms = pool.map(_grid_norm, tasks)
    else:
        grid_norms = [_grid_norm(task) for task in tasks]
    skipped = sum(v is None for v in grid_norms)
    envelope = max((v for v in grid_norms if v is not None), default=0.0)
    if skipped > 0.01 * len(grid):
        raise ParametrixBuildError(f"{skipped} of {len(grid)} grid builds failed")
    logger.info(
        f"envelope {envelope:.6g} over {len(grid)} grid points "
        f"in {time.perf_counter() - start:.1f}s"
    )

    report = BoundednessReport(envelope, len(grid), skipped)
    for n in range(0, n_max + 1):
        mat = build_parametrix(config, alphas, n, quad_tol=quad_tol)
        report.norms[n] = _sup_norm(mat, points)
        report.inverse_norms[n] = _sup_norm(mat, points, inverse=True)
        on_grid = mod1_distance(mat.targets, np.round(mat.targets * m) / m)
        logger.debug(f"n={n}: sup norm {report.norms[n]:.6g}, grid distance {on_grid:.2e}")
    return report


class ParametrixBuildError(RuntimeError):
    pass


class EndpointEvaluationError(ValueError):
    pass
