"""
Second row of M from the first: M_21 = M_11 F_1 and M_22 = M_12 F_2, where F
is the meromorphic function on the surface with poles at most at the nu = 1
divisor points and at infinity on sheet 2, vanishing at infinity on sheet 1
and normalised by lim M_12 F = 1 at infinity on sheet 2.

F is sought as (p(z) + c w) / prod_k (z - x_k) with p = -c Q + r, Q the
polynomial part of w_1 at infinity and deg r <= N - 2.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import lagrange
from scipy.linalg import null_space

from .abelian import AbelianEvaluator
from .surface import DivisorPoints, Side, SurfaceConfig, divisor_coords
from .utils import logger

RICHARDSON_RADII = (1e3, 2e3, 4e3, 8e3)
CANCELLATION_LIMIT = 1e6


@dataclass(frozen=True, eq=False)
class SecondRowFunction:
    config: SurfaceConfig
    divisor: DivisorPoints
    c: complex
    r: np.ndarray  # highest degree first
    Q: np.ndarray  # highest degree first, degree N
    m: complex = 0j  # coefficient of 1/z in M_12 at infinity

    @property
    def x(self) -> np.ndarray:
        return divisor_coords(self.config, self.divisor)[0]

    @property
    def w(self) -> np.ndarray:
        return divisor_coords(self.config, self.divisor)[1]

    def numerator_polynomial(self) -> np.ndarray:
        return np.polyadd(-self.c * self.Q, self.r)

    def __call__(self, z: complex, sheet: int, side: Side | None = None) -> complex:
        z = complex(z)
        if z.imag == 0 and side is not None:
            w = complex(self.config.boundary_w(z.real, Side(side), sheet))
        else:
            w = complex(self.config.sheet_w(z, sheet))
        numerator = np.polyval(self.numerator_polynomial(), z) + self.c * w
        return numerator / math.prod(z - xk for xk in self.x)

    def conjugate_point_residual(self) -> float:
        """Largest |p(x_k) - c w_k|: the numerator must vanish at (x_k, -w_k)."""
        if len(self.x) == 0:
            return 0.0
        p = np.polyval(self.numerator_polynomial(), self.x)
        return float(np.max(np.abs(p - self.c * self.w)))


def _richardson(values, ratio: float = 2.0) -> complex:
    """Richardson sweeps for g(h) = g0 + a_1 h + a_2 h^2 + ... sampled at h, h / ratio, ..."""
    table = list(values)
    for order in range(1, len(table)):
        factor = ratio**order
        table = [(factor * fine - coarse) / (factor - 1) for coarse, fine in zip(table, table[1:])]
    return table[0]


def build_F(row1: AbelianEvaluator) -> SecondRowFunction:
    if row1.nu != 1:
        raise ValueError("the second row is reconstructed from the nu = 1 row")
    config = row1.config
    divisor = row1.omega.points
    x, w, _ = divisor_coords(config, divisor)
    for k, wk in enumerate(w, start=1):
        if wk == 0.0:
            raise DegenerateDivisorError(
                f"P_{k} sits on a branch point; perturb n*alpha slightly to move it"
            )

    Q = config.polynomial_part_w()
    if config.genus:
        r = np.asarray(lagrange(x, np.polyval(Q, x) + w).coef, dtype=float)
    else:
        r = np.zeros(1)

    samples = [R * 1j * row1.v(2, R * 1j) for R in RICHARDSON_RADII]
    m = complex(_richardson(samples))
    if abs(m) < 1e-12:
        raise CancellationError("M_12 has no simple zero at infinity on sheet 2")
    c = -1.0 / (2.0 * m)
    logger.debug(f"second row: m = {m}, c = {c}")
    return SecondRowFunction(config, divisor, c, c * r, Q, m)


class ReconstructedRow:
    """Row 2 of M as the first row times F on each sheet."""

    def __init__(self, F: SecondRowFunction, row1: AbelianEvaluator):
        self.F = F
        self.row1 = row1

    def entries(self, z: complex, side: Side | None = None) -> np.ndarray:
        z = complex(z)
        upper = z.imag > 0 if z.imag != 0 else Side(side) is Side.ABOVE
        m11 = self.row1.v(1, z, side)
        m12 = self.row1.v(2, z, side) * (1 if upper else -1)
        return np.array([m11 * self.F(z, 1, side), m12 * self.F(z, 2, side)])

    def cancellation_bound(self, radii=(1e-3, 1e-4, 1e-5, 1e-6), count: int = 8) -> float:
        """Largest |entry| on small circles around the divisor projections."""
        worst = 0.0
        angles = math.pi / 8 + 2 * math.pi * np.arange(count) / count
        for xk in self.F.x:
            for r in radii:
                for t in angles:
                    worst = max(
                        worst, float(np.max(np.abs(self.entries(xk + r * cmath.exp(1j * t)))))
                    )
        if worst > CANCELLATION_LIMIT:
            raise CancellationError(
                f"row 2 reaches {worst:.3e} near the divisor: poles of F are not "
                f"cancelled, check the sheets of the divisor points"
            )
        return worst


def reconstruct_row2(F: SecondRowFunction, row1: AbelianEvaluator) -> ReconstructedRow:
    row = ReconstructedRow(F, row1)
    if len(F.x):
        row.cancellation_bound(radii=(1e-6,), count=4)
    return row


def function_space_dimension(
    config: SurfaceConfig, divisor: DivisorPoints, rcond: float = 1e-10
) -> int:
    """
    Dimension of the space of functions (p(z) + q w) / prod_k (z - x_k) with
    deg p <= N, regular at infinity on sheet 1 and at the conjugates of the
    divisor points.
    """
    N = config.N
    x, w, _ = divisor_coords(config, divisor)
    # unknowns: p_0..p_N (lowest first), q
    rows = []
    for xk, wk in zip(x, w):
        rows.append(np.concatenate([xk ** np.arange(N + 1), [-wk]]))
    leading = np.zeros(N + 2)
    leading[N] = 1.0
    leading[N + 1] = config.infinity_series(1)[0]
    rows.append(leading)
    A = np.array(rows)
    return int(null_space(A, rcond=rcond).shape[1])


class DegenerateDivisorError(ValueError):
    pass


class CancellationError(RuntimeError):
    pass
