"""
Meromorphic differentials of the third kind on the surface.

For a divisor P_1, ..., P_{N-1} (one point per real oval) and nu in {1, 2} the
differential is assembled in closed form as

    omega = [A(z) + B(z) / w] dz,
    A(z) = -W'(z) / (4 W(z)) + sum_j (1/2) / (z - x_j),
    B(z) = sum_j (w_j / 2) / (z - x_j) + c z^{N-1} + sum_i gamma_i z^{i-1},

with c = +1/2 for nu = 1 and -1/2 for nu = 2. The first term gives residue
-1/2 at every branch point, the divisor terms residue +1 at P_j only, c fixes
the residues at the two infinities and gamma is solved from the vanishing
A-periods.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .numerics import (
    DEFAULT_TOL,
    Path,
    Segment,
    Tolerance,
    integrate_cut,
    integrate_cut_pv,
    integrate_path,
    series_mul,
    series_reciprocal,
)
from .surface import (
    DivisorPoints,
    OvalPoint,
    SheetPoint,
    SheetPointError,
    Side,
    SurfaceConfig,
    divisor_coords,
)
from .utils import logger

MAX_CONDITION = 1e12
TAIL_ORDER = 20

PoleId = tuple[str, int]


@dataclass(frozen=True)
class Pole:
    label: str  # "a", "b", "P" or "inf"
    index: int  # cut, gap or sheet index
    residue: Fraction
    z: float
    sheet: int | None = None

    @property
    def id(self) -> PoleId:
        return self.label, self.index


@dataclass(frozen=True, eq=False)
class MeromorphicDifferential:
    config: SurfaceConfig
    nu: int
    points: DivisorPoints
    c: Fraction
    gamma: np.ndarray = field(repr=False)

    @cached_property
    def _divisor(self):
        return divisor_coords(self.config, self.points)

    @property
    def x(self) -> np.ndarray:
        return self._divisor[0]

    @property
    def w(self) -> np.ndarray:
        return self._divisor[1]

    @property
    def sheets(self) -> tuple[int, ...]:
        return self._divisor[2]

    def A(self, z):
        z = np.asarray(z)
        value = -0.25 * self.config.log_derivative_W(z)
        for xj in self.x:
            value = value + 0.5 / (z - xj)
        return value

    def B(self, z):
        z = np.asarray(z)
        N = self.config.N
        value = float(self.c) * z ** (N - 1) + 0j * z
        for i, g in enumerate(self.gamma, start=1):
            value = value + g * z ** (i - 1)
        for xj, wj in zip(self.x, self.w):
            if wj != 0.0:
                value = value + 0.5 * wj / (z - xj)
        return value

    def raw_density(self, z, sheet: int):
        """A + B/w evaluated directly, for points off the real axis."""
        return self.A(z) + self.B(z) / self.config.sheet_w(z, sheet)

    def boundary_density(self, x, side: Side, sheet: int):
        x = np.asarray(x, dtype=float)
        return self.A(x + 0j) + self.B(x + 0j) / self.config.boundary_w(x, side, sheet)

    @cached_property
    def tail_coefficients(self) -> dict[int, np.ndarray]:
        return {s: laurent_at_infinity(self, s, TAIL_ORDER) for s in (1, 2)}

    def density(self, z, sheet: int):
        """
        dz-density on a sheet; far out on sheet nu the Laurent series replaces
        the direct formula, whose O(1/z) parts cancel there.
        """
        z = np.asarray(z, dtype=complex)
        if sheet != self.nu:
            return self.raw_density(z, sheet)
        far = np.abs(z) > self.config.anchor_radius
        if not np.any(far):
            return self.raw_density(z, sheet)
        coeffs = self.tail_coefficients[sheet]
        inv = 1.0 / z
        series = np.zeros_like(z)
        for d in coeffs[::-1]:
            series = (series + d) * inv
        near = np.where(far, 1j, z)
        return np.where(far, series, self.raw_density(near, sheet))

    @property
    def divisor_sign(self) -> np.ndarray:
        """+1 for points on sheet 1, -1 on sheet 2, 0 at branch points."""
        return np.array(
            [
                0.0 if wj == 0.0 else (1.0 if s == 1 else -1.0)
                for wj, s in zip(self.w, self.sheets)
            ]
        )


def laurent_at_infinity(omega: MeromorphicDifferential, sheet: int, K: int) -> np.ndarray:
    """
    Coefficients d_1..d_K of the density sum_m d_m z^{-m} near infinity on
    ``sheet``. d_1 vanishes on sheet nu and equals -1 on the other sheet.
    """
    config = omega.config
    N = config.N
    n = K + 1
    powers = np.arange(n)

    # A as a series in t = 1/z
    a_t = np.zeros(n)
    for e in config.endpoints:
        a_t[1:] += -0.25 * e ** powers[:-1]
    for xj in omega.x:
        a_t[1:] += 0.5 * xj ** powers[:-1]

    # t^N B as a series in t
    tb = np.zeros(n)
    tb[1] += float(omega.c)
    for i, g in enumerate(omega.gamma, start=1):
        tb[N - i + 1] += g
    for xj, wj in zip(omega.x, omega.w):
        if N + 1 < n:
            tb[N + 1 :] += 0.5 * wj * xj ** powers[: n - N - 1]

    inv_s = series_reciprocal(config.infinity_series(n), n)
    sign = 1.0 if sheet == 1 else -1.0
    d = a_t + sign * series_mul(tb, inv_s, n)
    if sheet == omega.nu:
        d[1] = 0.0
    return d[1:]


@lru_cache(maxsize=64)
def holomorphic_period_matrix(
    config: SurfaceConfig, tol: Tolerance = DEFAULT_TOL
) -> np.ndarray:
    """A-periods of z^{i-1}/w dz; entry (j, i) is 2 * integral over gap j of x^{i-1}/w_1."""
    g = config.genus
    H = np.zeros((g, g))
    for j in range(1, g + 1):
        interval = config.gap(j)
        for i in range(1, g + 1):

            def h(x, i=i):
                return x ** (i - 1) / config.boundary_w(x, Side.ABOVE)

            H[j - 1, i - 1] = 2.0 * integrate_cut(h, interval, tol).real
    H.setflags(write=False)
    return H


def collapsed_a_period(
    omega: MeromorphicDifferential, j: int, tol: Tolerance = DEFAULT_TOL
) -> complex:
    """2 * PV integral over gap j of B/w_1."""
    config = omega.config
    interval = config.gap(j)

    def h(x):
        return omega.B(x + 0j) / config.boundary_w(x, Side.ABOVE)

    xj, wj = omega.x[j - 1], omega.w[j - 1]
    if wj == 0.0:
        return 2.0 * integrate_cut(h, interval, tol)
    residue = 0.5 * wj / complex(config.boundary_w(xj, Side.ABOVE))
    return 2.0 * integrate_cut_pv(h, interval, xj, residue, tol)


def build_differential(
    config: SurfaceConfig,
    points: DivisorPoints,
    nu: int,
    tol: Tolerance = DEFAULT_TOL,
    verify: bool = True,
) -> MeromorphicDifferential:
    if nu not in (1, 2):
        raise ValueError(f"nu must be 1 or 2, got {nu}")
    points = tuple(points)
    if [q.gap for q in points] != list(range(1, config.N)):
        raise ValueError(
            f"expected one oval point per gap 1..{config.genus}, got gaps "
            f"{[q.gap for q in points]}"
        )

    c = Fraction(1, 2) if nu == 1 else Fraction(-1, 2)
    base = MeromorphicDifferential(config, nu, points, c, np.zeros(config.genus))
    if config.genus == 0:
        return base

    H = holomorphic_period_matrix(config, tol)
    cond = np.linalg.cond(H)
    if not cond < MAX_CONDITION:
        raise DifferentialConstructionError(
            "A-period matrix of the holomorphic basis is ill-conditioned", cond
        )

    rhs = np.array(
        [collapsed_a_period(base, j, tol).real for j in range(1, config.N)]
    )
    gamma = lu_solve(lu_factor(H), -rhs)
    omega = MeromorphicDifferential(config, nu, points, c, gamma)

    if verify:
        residual = max(abs(collapsed_a_period(omega, j, tol)) for j in range(1, config.N))
        logger.debug(f"built differential nu={nu}, max A-period {residual:.2e}")
        if residual > 1e-9:
            raise DifferentialConstructionError(
                f"A-periods do not vanish (max {residual:.3e})", cond
            )
    return omega


def eval_density(omega: MeromorphicDifferential, p: SheetPoint) -> complex:
    """dz-density of omega at a finite point of the surface."""
    config = omega.config
    if p.is_real and config.is_branch_point(p.z.real):
        raise PoleError(f"{p.z.real} is a branch point, the density is singular there")
    for xj, wj, s in zip(omega.x, omega.w, omega.sheets):
        if wj != 0.0 and p.z == xj:
            if p.sheet == s:
                raise PoleError(f"({xj}, sheet {s}) is a divisor pole")
            # regular at the conjugate point, but A and B/w both blow up there
            eps = 1e-5 * max(1.0, config.min_gap)
            pair = omega.density(np.array([xj + 1j * eps, xj - 1j * eps]), p.sheet)
            return complex(np.mean(pair))

    if p.is_real and config.in_cut(p.z.real):
        if p.side is None:
            raise SheetPointError(f"{p.z.real} lies on a cut, a side is required")
        return complex(omega.boundary_density(p.z.real, p.side, p.sheet))
    return complex(omega.density(p.z, p.sheet))


def pole_set(omega: MeromorphicDifferential) -> list[Pole]:
    config = omega.config
    merged = {}
    for j, (xj, wj) in enumerate(zip(omega.x, omega.w), start=1):
        if wj == 0.0:
            merged[xj] = j

    poles = []
    for k, (a, b) in enumerate(config.cuts, start=1):
        for label, e in (("a", a), ("b", b)):
            residue = Fraction(1, 2) if e in merged else Fraction(-1, 2)
            poles.append(Pole(label, k, residue, e))
    for j, (xj, wj, s) in enumerate(zip(omega.x, omega.w, omega.sheets), start=1):
        if wj != 0.0:
            poles.append(Pole("P", j, Fraction(1), xj, s))
    poles.append(Pole("inf", 3 - omega.nu, Fraction(1), math.inf, 3 - omega.nu))
    return poles


def residue_at(omega: MeromorphicDifferential, pole: PoleId | Pole) -> Fraction:
    pole_id = pole.id if isinstance(pole, Pole) else tuple(pole)
    table = {p.id: p.residue for p in pole_set(omega)}
    if pole_id in table:
        return table[pole_id]

    # a divisor point sitting on a branch point is reported as the merged pole
    if pole_id[0] == "P" and 1 <= pole_id[1] <= omega.config.genus:
        j = pole_id[1]
        if omega.w[j - 1] == 0.0:
            return Fraction(1, 2)
    raise PoleError(f"{pole_id} is not a pole of the differential")


def residue_by_quadrature(
    omega: MeromorphicDifferential, pole: PoleId, radius: float = 1e-4
) -> complex:
    """
    Residue from a small circle: in the local coordinate t = sqrt(z - e) at a
    branch point e, in z at a divisor point.
    """
    label, index = pole
    config = omega.config
    if label == "P":
        xj, sheet = omega.x[index - 1], omega.sheets[index - 1]
        path = Path((Segment.arc(xj, radius, 0.0, 2 * math.pi, sheet),))
        return integrate_path(omega.raw_density, path) / (2j * math.pi)

    e = config.cut(index)[0 if label == "a" else 1]
    others = [p for p in config.endpoints if p != e]
    # W/(z - e) is close to the real number prod(e - p) on the circle
    h0 = math.prod(e - p for p in others)
    rot = 1.0 if h0 > 0 else 1j

    def local(t, sheet):
        z = np.asarray(e + t * t)
        rest = np.prod(z[..., None] - np.array(others), axis=-1)
        h = rot * np.sqrt(rest / (rot * rot))
        return (omega.A(z) + omega.B(z) / (t * h)) * 2 * t

    path = Path((Segment.arc(0.0, radius, 0.0, 2 * math.pi),))
    return integrate_path(local, path) / (2j * math.pi)


@dataclass(frozen=True)
class Cycle:
    kind: str  # "A" or "B"
    index: int
    path: Path
    crossing: float | None = None  # right real crossing of a B cycle
    # collapsed form: ("cut" | "gap", index, coefficient) of B/w_1 integrals,
    # plus the residue offsets of b_period_offsets for B cycles
    intervals: tuple[tuple[str, int, float], ...] = ()


def clearance_delta(config: SurfaceConfig) -> float:
    return config.min_gap / 4.0


def a_cycle(config: SurfaceConfig, j: int) -> Cycle:
    """Sheet-1 upper arc from the midpoint of cut j to that of cut j+1, back on sheet 2 below."""
    config.gap(j)
    p, q = config.cut_midpoint(j), config.cut_midpoint(j + 1)
    m, r = 0.5 * (p + q), 0.5 * (q - p)
    path = Path(
        (
            Segment.arc(m, r, math.pi, 0.0, sheet=1),
            Segment.arc(m, r, 0.0, -math.pi, sheet=2),
        )
    )
    return Cycle("A", j, path, intervals=(("gap", j, 2.0),))


def b_cycle(config: SurfaceConfig, k: int, crossing: float | None = None) -> Cycle:
    """Counterclockwise stadium on sheet 1 around [a_1, b_k], crossing gap k at ``crossing``."""
    config.gap(k)
    delta = clearance_delta(config)
    a1 = config.a[0]
    c = config.b[k - 1] + delta if crossing is None else crossing
    right = c - delta
    path = Path(
        (
            Segment.line(a1 - 1j * delta, right - 1j * delta),
            Segment.arc(right, delta, -math.pi / 2, math.pi / 2),
            Segment.line(right + 1j * delta, a1 + 1j * delta),
            Segment.arc(a1, delta, math.pi / 2, 3 * math.pi / 2),
        )
    )
    intervals = tuple(("cut", i, -2.0) for i in range(1, k + 1))
    return Cycle("B", k, path, c, intervals)


def _clearance(cycle: Cycle, poles: np.ndarray) -> float:
    pts = cycle.path.points(512)
    return float(np.min(np.abs(pts[:, None] - poles[None, :])))


def resolve_cycle(omega: MeromorphicDifferential, cycle: Cycle) -> Cycle:
    """Move the real crossing of a B cycle so the contour clears every pole by delta/2."""
    if cycle.kind != "B":
        return cycle
    config = omega.config
    delta = clearance_delta(config)
    poles = np.concatenate([config.endpoints, omega.x])
    b, a_next = config.gap(cycle.index)
    candidates = [cycle.crossing, b + delta, a_next - delta, 0.5 * (b + a_next)]
    for c in candidates:
        candidate = b_cycle(config, cycle.index, c)
        if _clearance(candidate, poles) >= 0.5 * delta * (1 - 1e-9):
            if c != cycle.crossing:
                logger.debug(f"B_{cycle.index} crossing moved to {c:.6g}")
            return candidate
    raise PoleCollisionError(f"no B_{cycle.index} contour clears the divisor poles")


def period(
    omega: MeromorphicDifferential,
    cycle: Cycle,
    method: str = "collapsed",
    tol: Tolerance = DEFAULT_TOL,
) -> complex:
    cycle = resolve_cycle(omega, cycle)
    if method == "direct":
        return integrate_path(omega.raw_density, cycle.path, tol)
    if method != "collapsed":
        raise ValueError(f"unknown period method {method!r}")

    if cycle.kind == "A":
        return collapsed_a_period(omega, cycle.index, tol)
    return collapsed_b_period(omega, cycle.index, cycle.crossing, tol)


def cut_integrals(
    omega: MeromorphicDifferential, upto: int, tol: Tolerance = DEFAULT_TOL
) -> np.ndarray:
    """Integrals of B / w_{1,+} over cuts 1..upto."""
    config = omega.config

    def h(x):
        return omega.B(x + 0j) / config.boundary_w(x, Side.ABOVE)

    return np.array([integrate_cut(h, config.cut(i), tol) for i in range(1, upto + 1)])


def b_period_offsets(omega: MeromorphicDifferential, k: int, crossing: float) -> float:
    """Half-integer count of residues swept when B_k is collapsed onto the real axis."""
    inside = omega.x[:k] < crossing
    offset = -0.5 + 0.5 * float(inside[k - 1])
    offset += 0.5 * float(np.sum(omega.divisor_sign[:k] * inside))
    return offset


def collapsed_b_period(
    omega: MeromorphicDifferential,
    k: int,
    crossing: float | None = None,
    tol: Tolerance = DEFAULT_TOL,
    cuts: np.ndarray | None = None,
) -> complex:
    if crossing is None:
        crossing = omega.config.b[k - 1] + clearance_delta(omega.config)
    if cuts is None:
        cuts = cut_integrals(omega, k, tol)
    return -2.0 * complex(np.sum(cuts[:k])) + 2j * math.pi * b_period_offsets(
        omega, k, crossing
    )


class DifferentialConstructionError(RuntimeError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition number {condition:.3e})")
        self.condition = condition


class PoleError(ValueError):
    pass


class PoleCollisionError(RuntimeError):
    pass
