"""
The period map Psi: divisor points on the real ovals -> B-periods of the
normalised differential mod 1, and its numerical inverse.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .differentials import build_differential, collapsed_b_period, cut_integrals
from .numerics import DEFAULT_TOL, Tolerance
from .surface import DivisorPoints, OvalPoint, SurfaceConfig, midpoint_divisor
from .utils import logger

FD_STEP = 1e-6
MAX_JACOBIAN_CONDITION = 1e10
LIFT_THRESHOLD = 0.25
REALNESS_TOL = 1e-9


def wrap(v):
    """Representative of v mod 1 in (-1/2, 1/2]."""
    v = np.asarray(v, dtype=float)
    return -((0.5 - v) % 1.0 - 0.5)


def mod1_distance(u, v) -> float:
    u, v = np.atleast_1d(u), np.atleast_1d(v)
    if u.size == 0:
        return 0.0
    return float(np.max(np.abs(wrap(u - v))))


def theta_distance(p: DivisorPoints, q: DivisorPoints) -> float:
    if [a.gap for a in p] != [b.gap for b in q]:
        raise ValueError("divisors live on different gaps")
    return mod1_distance([a.theta for a in p], [b.theta for b in q])


@dataclass(frozen=True, eq=False)
class PeriodVector:
    beta: np.ndarray
    imag_residual: float = 0.0

    def __post_init__(self):
        beta = np.mod(np.atleast_1d(np.asarray(self.beta, dtype=float)), 1.0)
        # np.mod can round tiny negatives up to exactly 1.0
        beta[beta >= 1.0] = 0.0
        object.__setattr__(self, "beta", beta)

    def __len__(self) -> int:
        return len(self.beta)

    def distance(self, other: "PeriodVector") -> float:
        return mod1_distance(self.beta, other.beta)


@dataclass(frozen=True)
class InversionReport:
    solution: DivisorPoints
    residual: float
    iterations: int
    continuation_steps: int
    smallest_singular_values: tuple[float, ...] = field(default=(), repr=False)


def _thetas_to_points(thetas) -> DivisorPoints:
    return tuple(OvalPoint(j, t) for j, t in enumerate(thetas, start=1))


def psi(
    config: SurfaceConfig,
    points: DivisorPoints,
    nu: int,
    tol: Tolerance = DEFAULT_TOL,
) -> PeriodVector:
    if config.genus == 0:
        return PeriodVector(np.zeros(0))

    omega = build_differential(config, points, nu, tol, verify=False)
    cuts = cut_integrals(omega, config.genus, tol)
    raw = np.array(
        [
            collapsed_b_period(omega, k, tol=tol, cuts=cuts) / (2j * math.pi)
            for k in range(1, config.N)
        ]
    )
    imag = float(np.max(np.abs(raw.imag)))
    if imag > REALNESS_TOL:
        logger.warning(f"B-periods / 2 pi i not real: max |Im beta| = {imag:.3e}")
    return PeriodVector(raw.real, imag)


class _PsiResidual:
    """Wrapped residual psi(theta) - target together with an evaluation counter."""

    def __init__(self, config, nu, tol):
        self.config, self.nu, self.tol = config, nu, tol
        self.evaluations = 0

    def beta(self, thetas) -> np.ndarray:
        self.evaluations += 1
        return psi(self.config, _thetas_to_points(thetas), self.nu, self.tol).beta

    def jacobian(self, thetas) -> np.ndarray:
        g = len(thetas)
        J = np.zeros((g, g))
        for i in range(g):
            step = np.zeros(g)
            step[i] = FD_STEP
            J[:, i] = wrap(self.beta(thetas + step) - self.beta(thetas - step)) / (
                2 * FD_STEP
            )
        return J


def _newton(
    residual: _PsiResidual,
    thetas: np.ndarray,
    target: np.ndarray,
    tol: float,
    max_iter: int,
    sigmas: list[float],
):
    """Damped Newton on the torus; returns (thetas, residual norm, iterations, converged)."""
    r = wrap(residual.beta(thetas) - target)
    norm = float(np.max(np.abs(r)))
    perturbed = False
    for it in range(max_iter):
        if norm <= tol:
            return thetas, norm, it, True

        J = residual.jacobian(thetas)
        s = np.linalg.svd(J, compute_uv=False)
        if s[-1] == 0 or s[0] / s[-1] > MAX_JACOBIAN_CONDITION:
            if perturbed:
                raise InversionError(
                    f"singular Jacobian at theta = {thetas} (sigma_min = {s[-1]:.3e})",
                    best_residual=norm,
                )
            logger.warning(f"near-singular Jacobian at theta = {thetas}, perturbing")
            perturbed = True
            thetas = np.mod(thetas + 1e-3 * np.arange(1, len(thetas) + 1), 1.0)
            r = wrap(residual.beta(thetas) - target)
            norm = float(np.max(np.abs(r)))
            continue

        step = -np.linalg.solve(J, r)
        longest = np.max(np.abs(step))
        if longest > LIFT_THRESHOLD:
            step *= LIFT_THRESHOLD / longest

        lam = 1.0
        while lam >= 1.0 / 64:
            trial = np.mod(thetas + lam * step, 1.0)
            r_trial = wrap(residual.beta(trial) - target)
            norm_trial = float(np.max(np.abs(r_trial)))
            if norm_trial < norm:
                break
            lam *= 0.5
        else:
            logger.debug(f"Newton stagnated at residual {norm:.3e}")
            return thetas, norm, it, False

        thetas, r, norm = trial, r_trial, norm_trial
        sigmas.append(float(s[-1]))
        logger.debug(
            f"Newton step {it + 1}: residual {norm:.3e}, damping {lam}, "
            f"sigma_min {s[-1]:.3e}"
        )

    return thetas, norm, max_iter, norm <= tol


def invert_psi(
    config: SurfaceConfig,
    target: PeriodVector,
    nu: int,
    tol: float = 1e-10,
    quad_tol: Tolerance = DEFAULT_TOL,
    max_iter: int = 40,
    max_segments: int = 128,
) -> InversionReport:
    if not isinstance(target, PeriodVector):
        values = np.atleast_1d(np.asarray(target, dtype=float))
        if np.any((values < 0) | (values >= 1)):
            raise ValueError(f"target entries must lie in [0, 1), got {values}")
        target = PeriodVector(values)
    if len(target) != config.genus:
        raise ValueError(f"target has {len(target)} entries, genus is {config.genus}")
    if config.genus == 0:
        return InversionReport((), 0.0, 0, 0)

    residual = _PsiResidual(config, nu, quad_tol)
    sigmas: list[float] = []
    start = np.full(config.genus, 0.25)

    thetas, norm, iters, ok = _newton(
        residual, start, target.beta, tol, max_iter, sigmas
    )
    best = norm
    if ok:
        logger.info(f"inverted Psi in {iters} Newton steps, residual {norm:.2e}")
        return InversionReport(
            _thetas_to_points(thetas), norm, iters, 0, tuple(sigmas)
        )

    # continuation from the midpoint divisor along the short torus path
    beta0 = psi(config, midpoint_divisor(config), nu, quad_tol).beta
    direction = wrap(target.beta - beta0)
    segments = 8
    while segments <= max_segments:
        logger.info(f"Newton stalled, continuation with {segments} segments")
        thetas, total_iters, ok = start.copy(), 0, True
        for s in range(1, segments + 1):
            goal = np.mod(beta0 + direction * s / segments, 1.0)
            step_tol = tol if s == segments else max(tol, 1e-7)
            thetas, norm, iters, ok = _newton(
                residual, thetas, goal, step_tol, max_iter, sigmas
            )
            total_iters += iters
            if not ok:
                break
        best = min(best, norm)
        if ok:
            logger.info(
                f"inverted Psi by continuation ({segments} segments, "
                f"{residual.evaluations} evaluations), residual {norm:.2e}"
            )
            return InversionReport(
                _thetas_to_points(thetas), norm, total_iters, segments, tuple(sigmas)
            )
        segments *= 2

    raise InversionError(
        f"no convergence after continuation with {max_segments} segments",
        best_residual=best,
    )


def degree_check(
    config: SurfaceConfig,
    nu: int,
    j: int,
    m: int = 400,
    points: DivisorPoints | None = None,
    tol: Tolerance = DEFAULT_TOL,
) -> int:
    """
    Winding number of beta_j as P_j runs once around the oval over gap j,
    the other divisor points held fixed.

    Neighbouring samples may move beta_j by less than LIFT_THRESHOLD (a
    quarter turn) for the lift to be unambiguous. A tighter bound of 0.5 / m
    would reject any degree-one sweep whose speed is not uniform, since the
    steps then average 1 / m.
    """
    config.gap(j)
    if m < 4:
        raise ValueError(f"resolution must be at least 4, got {m}")
    points = list(points if points is not None else midpoint_divisor(config))

    betas = []
    for i in range(m):
        points[j - 1] = OvalPoint(j, i / m)
        betas.append(psi(config, tuple(points), nu, tol).beta[j - 1])
    betas.append(betas[0])

    steps = wrap(np.diff(betas))
    worst = float(np.max(np.abs(steps)))
    if worst > LIFT_THRESHOLD:
        raise LiftAmbiguityError(
            f"beta_{j} moved {worst:.3f} of a turn between neighbouring samples; "
            f"increase the resolution (m = {m})"
        )
    winding = int(round(math.fsum(steps)))
    logger.info(f"degree check on gap {j}: winding {winding} at m = {m}")
    if config.genus == 1 and abs(winding) != 1:
        logger.warning(f"genus-1 winding {winding} is not +-1")
    return winding


class InversionError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class LiftAmbiguityError(RuntimeError):
    pass
