"""
The two-sheeted surface w^2 = W(z) = prod_k (z - a_k)(z - b_k), its sheets,
boundary values on the cuts, real ovals and the conjugation involution.

Sheet 1 carries w_1(z) = prod_k sqrt(z - a_k) sqrt(z - b_k) with principal
roots per factor, so that w_1 ~ z^N at infinity and is discontinuous exactly
on the cuts; sheet 2 carries w_2 = -w_1.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .numerics import series_sqrt

THETA_SNAP = 1e-9


class Side(str, Enum):
    ABOVE = "above"
    BELOW = "below"

    def flipped(self) -> "Side":
        return Side.BELOW if self is Side.ABOVE else Side.ABOVE

    @property
    def sign(self) -> int:
        return 1 if self is Side.ABOVE else -1


@dataclass(frozen=True)
class SurfaceConfig:
    cuts: tuple[tuple[float, float], ...]

    def __post_init__(self):
        try:
            cuts = tuple((float(a), float(b)) for a, b in self.cuts)
        except (TypeError, ValueError) as e:
            raise SurfaceConfigError(f"cuts must be a list of [a, b] pairs: {e}")
        object.__setattr__(self, "cuts", cuts)

        if len(cuts) < 1:
            raise SurfaceConfigError("at least one cut is required (N >= 1)")
        for k, (a, b) in enumerate(cuts, start=1):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise SurfaceConfigError(f"cut {k} has a non-finite endpoint")
            if not a < b:
                raise SurfaceConfigError(f"cut {k}: a_k < b_k violated ({a} >= {b})")
        for k in range(1, len(cuts)):
            if not cuts[k - 1][1] < cuts[k][0]:
                raise SurfaceConfigError(
                    f"cuts {k} and {k + 1}: b_k < a_(k+1) violated "
                    f"({cuts[k - 1][1]} >= {cuts[k][0]})"
                )

    @property
    def N(self) -> int:
        return len(self.cuts)

    @property
    def genus(self) -> int:
        return self.N - 1

    @cached_property
    def a(self) -> np.ndarray:
        return np.array([c[0] for c in self.cuts])

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([c[1] for c in self.cuts])

    @cached_property
    def endpoints(self) -> np.ndarray:
        return np.array([e for cut in self.cuts for e in cut])

    @cached_property
    def R0(self) -> float:
        return 2.0 * float(np.max(np.abs(self.endpoints)))

    @property
    def anchor_radius(self) -> float:
        return 2.0 * self.R0

    @cached_property
    def min_gap(self) -> float:
        if self.N == 1:
            return self.b[0] - self.a[0]
        return float(np.min(self.a[1:] - self.b[:-1]))

    # cuts and gaps are numbered from 1 as in the model problem
    def cut(self, k: int) -> tuple[float, float]:
        return self.cuts[k - 1]

    def gap(self, j: int) -> tuple[float, float]:
        if not 1 <= j <= self.genus:
            raise SurfaceConfigError(f"gap index {j} out of range 1..{self.genus}")
        return self.cuts[j - 1][1], self.cuts[j][0]

    def cut_midpoint(self, k: int) -> float:
        a, b = self.cut(k)
        return 0.5 * (a + b)

    def W(self, z):
        z = np.asarray(z, dtype=complex)
        return np.prod(z[..., None] - self.endpoints, axis=-1)

    def log_derivative_W(self, z):
        """W'(z) / W(z) = sum over the endpoints of 1 / (z - e)."""
        z = np.asarray(z, dtype=complex)
        return np.sum(1.0 / (z[..., None] - self.endpoints), axis=-1)

    def infinity_series(self, K: int) -> np.ndarray:
        """Coefficients s_m of w_1(z) = z^N sum_m s_m z^{-m}, m = 0..K-1."""
        return _infinity_series(self, K)

    def polynomial_part_w(self) -> np.ndarray:
        """Polynomial part Q of the sheet-1 expansion of w, highest degree first."""
        return self.infinity_series(self.N + 1)

    def sheet_w(self, z, sheet: int = 1):
        """Vectorised w on a sheet for points off the real axis."""
        z = np.asarray(z, dtype=complex)
        w = np.prod(
            np.sqrt(z[..., None] - self.a) * np.sqrt(z[..., None] - self.b), axis=-1
        )
        return w if sheet == 1 else -w

    def boundary_w(self, x, side: Side, sheet: int = 1):
        """Vectorised one-sided values of w at real points."""
        x = np.asarray(x, dtype=float)
        d = x[..., None] - self.endpoints
        root = np.where(
            d >= 0,
            np.sqrt(np.abs(d)) + 0j,
            side.sign * 1j * np.sqrt(np.abs(d)),
        )
        w = np.prod(root, axis=-1)
        return w if sheet == 1 else -w

    def in_cut(self, x: float) -> int | None:
        """Index of the closed cut containing real x, if any."""
        for k, (a, b) in enumerate(self.cuts, start=1):
            if a <= x <= b:
                return k
        return None

    def is_branch_point(self, z: complex) -> bool:
        return complex(z).imag == 0 and float(complex(z).real) in set(self.endpoints)

    def gap_sign(self, j: int) -> int:
        return -1 if (self.N - j) % 2 else 1


def _infinity_series(config: SurfaceConfig, K: int) -> np.ndarray:
    # prod (1 - e t) as a polynomial in t = 1/z, lowest degree first
    poly = np.array([1.0])
    for e in config.endpoints:
        poly = np.convolve(poly, [1.0, -e])
    return series_sqrt(poly, K)


@dataclass(frozen=True)
class SheetPoint:
    z: complex
    sheet: int = 1
    side: Side | None = None

    def __post_init__(self):
        object.__setattr__(self, "z", complex(self.z))
        if self.sheet not in (1, 2):
            raise SheetPointError(f"sheet must be 1 or 2, got {self.sheet}")
        if self.side is not None:
            object.__setattr__(self, "side", Side(self.side))

    @property
    def is_real(self) -> bool:
        return self.z.imag == 0


@dataclass(frozen=True)
class OvalPoint:
    """Point of the real oval over gap ``gap``, parametrised by theta in [0, 1)."""

    gap: int
    theta: float

    def __post_init__(self):
        theta = float(self.theta) % 1.0
        for snap in (0.0, 0.5, 1.0):
            if abs(theta - snap) <= THETA_SNAP:
                theta = snap % 1.0
        object.__setattr__(self, "theta", theta)

    @property
    def at_branch_point(self) -> bool:
        return self.theta in (0.0, 0.5)


DivisorPoints = tuple[OvalPoint, ...]


def branch_w(config: SurfaceConfig, p: SheetPoint) -> complex:
    """w at a point of the surface; the side tag selects boundary values on cuts."""
    if p.is_real:
        x = p.z.real
        if x in set(config.endpoints):
            return 0j
        side = p.side
        if side is None:
            if config.in_cut(x) is not None:
                raise SheetPointError(
                    f"z = {x} lies on a cut: a side tag (above/below) is mandatory"
                )
            side = Side.ABOVE
        return complex(config.boundary_w(x, side, p.sheet))
    return complex(config.sheet_w(p.z, p.sheet))


def oval_coords(config: SurfaceConfig, q: OvalPoint) -> tuple[float, float, int]:
    """(x, w, sheet) of an oval point; w is real on the gaps."""
    b, a_next = config.gap(q.gap)
    h = 0.5 * (a_next - b)
    theta = q.theta
    sheet = 1 if theta <= 0.5 else 2

    if theta == 0.0:
        return b, 0.0, 1
    if theta == 0.5:
        return a_next, 0.0, 1

    # evaluate the distance to the nearer branch point without cancellation
    if math.cos(2 * math.pi * theta) >= 0:
        x = b + 2 * h * math.sin(math.pi * theta) ** 2
    else:
        x = a_next - 2 * h * math.cos(math.pi * theta) ** 2

    # theta just above the snap can still round onto the branch point
    if x in (b, a_next):
        return x, 0.0, sheet

    others = [e for e in config.endpoints if e not in (b, a_next)]
    rest = math.sqrt(abs(math.prod(x - e for e in others))) if others else 1.0
    w = config.gap_sign(q.gap) * h * math.sin(2 * math.pi * theta) * rest
    return x, w, sheet


def divisor_coords(config: SurfaceConfig, points: DivisorPoints):
    """Arrays x, w and sheets of a divisor, one entry per gap."""
    coords = [oval_coords(config, q) for q in points]
    x = np.array([c[0] for c in coords], dtype=float)
    w = np.array([c[1] for c in coords], dtype=float)
    sheets = tuple(c[2] for c in coords)
    return x, w, sheets


def oval_point_from_coords(
    config: SurfaceConfig, gap: int, x: float, sheet: int
) -> OvalPoint:
    b, a_next = config.gap(gap)
    if not b <= x <= a_next:
        raise SurfaceConfigError(f"x = {x} outside gap {gap} [{b}, {a_next}]")
    m, h = 0.5 * (b + a_next), 0.5 * (a_next - b)
    phi = math.acos(min(1.0, max(-1.0, (m - x) / h)))
    theta = phi / (2 * math.pi)
    return OvalPoint(gap, theta if sheet == 1 else 1.0 - theta)


def midpoint_divisor(config: SurfaceConfig) -> DivisorPoints:
    """Gap midpoints on sheet 1 (theta = 1/4)."""
    return tuple(OvalPoint(j, 0.25) for j in range(1, config.N))


def involution(p: SheetPoint) -> SheetPoint:
    side = p.side.flipped() if p.side is not None else None
    return SheetPoint(p.z.conjugate(), p.sheet, side)


class SurfaceConfigError(ValueError):
    pass


class SheetPointError(ValueError):
    pass
