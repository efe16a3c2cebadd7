"""
Abelian integrals u_j(z) of a normalised differential, taken from the base
point at infinity on sheet nu, their exponentials v_j = exp(u_j) and checks of
their jump and local laws.

Paths: the tail from infinity to the anchor +-iR (R = 2 R0, on the side of z)
is the series primitive; from the anchor a straight segment leads to z. On
the other sheet the anchor value is reached through the midpoint of a cut,
approached from the opposite half-plane of sheet nu.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .differentials import MeromorphicDifferential, collapsed_b_period, cut_integrals
from .numerics import DEFAULT_TOL, Path, Segment, Tolerance, integrate_path, tail_integral
from .surface import Side, SheetPointError
from .utils import logger

POLE_RADIUS = 1e-8


def mod_2pi_i(d: complex) -> float:
    """Distance of d to the lattice 2 pi i Z."""
    d = complex(d)
    return abs(complex(d.real, (d.imag + math.pi) % (2 * math.pi) - math.pi))


class AbelianEvaluator:
    def __init__(
        self,
        omega: MeromorphicDifferential,
        tol: Tolerance = DEFAULT_TOL,
        crossing_cut: int = 1,
    ):
        self.omega = omega
        self.nu = omega.nu
        self.config = omega.config
        self.R = self.config.anchor_radius
        self.tol = tol
        self.crossing_cut = crossing_cut
        self._anchors: dict[tuple[int, int], complex] = {}
        self._beta = None
        self.config.cut(crossing_cut)

    def _primitive(self, z, sheet: int) -> complex:
        """Series primitive without the log term, vanishing at infinity."""
        return tail_integral(self.omega.tail_coefficients[sheet][1:], z, radius=self.R)

    def _segment(self, start: complex, end: complex, sheet: int) -> complex:
        path = Path((Segment.line(start, end, sheet),))
        return integrate_path(self.omega.raw_density, path, self.tol)

    def anchor(self, j: int, half: int) -> complex:
        """u_j at the anchor half * iR, half = +1 above and -1 below."""
        key = (j, half)
        if key not in self._anchors:
            Z = half * 1j * self.R
            if j == self.nu:
                value = self._primitive(Z, self.nu)
            else:
                p = self.config.cut_midpoint(self.crossing_cut)
                crossing = self._primitive(-Z, self.nu) + self._segment(-Z, p, self.nu)
                value = crossing + self._segment(p, Z, j)
            self._anchors[key] = value
        return self._anchors[key]

    def _half(self, z: complex, side: Side | None) -> int:
        if z.imag != 0:
            return 1 if z.imag > 0 else -1
        if side is None:
            raise SheetPointError(
                f"z = {z.real} is real: a side tag (above/below) is mandatory"
            )
        return Side(side).sign

    def u(self, j: int, z: complex, side: Side | None = None) -> complex:
        if j not in (1, 2):
            raise ValueError(f"sheet index must be 1 or 2, got {j}")
        z = complex(z)
        half = self._half(z, side)
        if z.imag == 0 and self.config.is_branch_point(z):
            raise SheetPointError(f"z = {z.real} is a branch point")

        omega = self.omega
        for k, (xk, wk, sk) in enumerate(zip(omega.x, omega.w, omega.sheets), start=1):
            if wk != 0.0 and sk == j and abs(z - xk) < POLE_RADIUS:
                raise PoleProximityError(
                    f"z = {z} within {POLE_RADIUS} of the pole P_{k} on sheet {j}"
                )

        Z = half * 1j * self.R
        if abs(z) >= self.R:
            if j == self.nu:
                return self._primitive(z, j)
            d1 = self.omega.tail_coefficients[j][0]
            return (
                self.anchor(j, half)
                + d1 * cmath.log(z / Z)
                + self._primitive(z, j)
                - self._primitive(Z, j)
            )
        return self.anchor(j, half) + self._segment(Z, z, j)

    def v(self, j: int, z: complex, side: Side | None = None) -> complex:
        try:
            return cmath.exp(self.u(j, z, side))
        except PoleProximityError:
            # v_j vanishes at a divisor point on its sheet
            return 0j

    @property
    def beta(self) -> np.ndarray:
        """B-periods / 2 pi i of the underlying differential, unreduced."""
        if self._beta is None:
            omega, g = self.omega, self.config.genus
            cuts = cut_integrals(omega, g, self.tol) if g else None
            self._beta = np.array(
                [
                    (collapsed_b_period(omega, k, tol=self.tol, cuts=cuts) / (2j * math.pi)).real
                    for k in range(1, g + 1)
                ]
            )
        return self._beta

    def anchor_discrepancy(self) -> float:
        """Compare the series value at iR with quadrature from 2iR and 4iR."""
        Z = 1j * self.R
        reference = self._primitive(Z, self.nu)
        worst = 0.0
        for scale in (2.0, 4.0):
            far = scale * Z
            value = self._primitive(far, self.nu) + self._segment(far, Z, self.nu)
            worst = max(worst, abs(value - reference))
        return worst


@dataclass(frozen=True)
class JumpCheck:
    x: float
    which: str
    residuals: dict

    @property
    def max(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _classify(config, x: float, which: str) -> int | None:
    """Validates that x lies in an open interval of kind ``which``; returns its index."""
    if which == "cut":
        for k, (a, b) in enumerate(config.cuts, start=1):
            if a < x < b:
                return k
    elif which == "gap":
        for k in range(1, config.N):
            b, a_next = config.gap(k)
            if b < x < a_next:
                return k
    elif which == "outside":
        if x < config.a[0] or x > config.b[-1]:
            return None
    else:
        raise ValueError(f"unknown interval kind {which!r}")
    raise ValueError(f"x = {x} is not inside an open {which} interval")


def _gap_beta(ev: AbelianEvaluator, k: int, beta) -> float:
    return float(np.atleast_1d(ev.beta if beta is None else beta)[k - 1])


def check_jumps(ev: AbelianEvaluator, x: float, which: str, beta=None) -> JumpCheck:
    """
    Residuals mod 2 pi i of the jump laws of u_1, u_2 at x. ``beta`` overrides
    the gap constants (the targets n alpha mod 1); by default the differential's
    own normalised B-periods are used.
    """
    k = _classify(ev.config, x, which)
    up = {j: ev.u(j, x, Side.ABOVE) for j in (1, 2)}
    down = {j: ev.u(j, x, Side.BELOW) for j in (1, 2)}

    residuals = {}
    if which == "cut":
        residuals["u1+ = u2-"] = mod_2pi_i(up[1] - down[2])
        residuals["u2+ = u1-"] = mod_2pi_i(up[2] - down[1])
    elif which == "outside":
        for j in (1, 2):
            expected = 0.0 if j == ev.nu else math.pi
            residuals[f"u{j}+ - u{j}-"] = mod_2pi_i(up[j] - down[j] - 1j * expected)
    else:
        b = _gap_beta(ev, k, beta)
        for j in (1, 2):
            sign = -1.0 if j == 1 else 1.0
            expected = sign * 2 * math.pi * b + (0.0 if j == ev.nu else math.pi)
            residuals[f"u{j}+ - u{j}-"] = mod_2pi_i(up[j] - down[j] - 1j * expected)
    return JumpCheck(x, which, residuals)


def v_jump_matrix(ev: AbelianEvaluator, x: float, which: str, beta=None) -> np.ndarray:
    k = _classify(ev.config, x, which)
    if which == "cut":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    sign = 1.0 if ev.nu == 1 else -1.0
    if which == "outside":
        return sign * np.diag([1.0, -1.0]).astype(complex)
    phase = cmath.exp(2j * math.pi * _gap_beta(ev, k, beta))
    return sign * np.diag([1.0 / phase, -phase])


def check_v_jumps(ev: AbelianEvaluator, x: float, which: str, beta=None) -> JumpCheck:
    """(v_1, v_2)_+ = (v_1, v_2)_- J_v at x."""
    J = v_jump_matrix(ev, x, which, beta)
    plus = np.array([ev.v(j, x, Side.ABOVE) for j in (1, 2)])
    minus = np.array([ev.v(j, x, Side.BELOW) for j in (1, 2)])
    residual = float(np.max(np.abs(plus - minus @ J)))
    return JumpCheck(x, which, {"v+ - v- J": residual})


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    rms: float
    flagged: bool


def local_exponent(
    ev: AbelianEvaluator,
    j: int,
    center: float,
    radii=None,
    angle: float = math.pi / 4,
    max_rms: float = 0.02,
) -> ExponentFit:
    """Least-squares slope of Re u_j against log|z - center| on a ray off the real axis."""
    radii = np.logspace(-3, -6, 13) if radii is None else np.asarray(radii)
    direction = cmath.exp(1j * angle)
    values = np.array([ev.u(j, center + r * direction).real for r in radii])
    logs = np.log(radii)
    slope, intercept = np.polyfit(logs, values, 1)
    rms = float(np.sqrt(np.mean((values - (slope * logs + intercept)) ** 2)))
    flagged = rms > max_rms
    if flagged:
        logger.warning(f"exponent fit of u_{j} at {center} is noisy (rms {rms:.3e})")
    return ExponentFit(float(slope), rms, flagged)


class PoleProximityError(ValueError):
    pass
