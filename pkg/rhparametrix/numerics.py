"""
Quadrature on top of scipy.integrate: adaptive Gauss-Kronrod panels along
contours (quad_vec), principal values through QUADPACK's Cauchy weight,
inverse square-root endpoint weights by the cosine substitution, and the
series primitive at infinity.

Integrands take a scalar node (and, for contour integrals, the sheet of the
segment) and may return a numpy scalar or 0-d array. End points of segments
and intervals are never sampled.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .utils import logger

# subintervals allowed per unit of max_depth
SUBDIVISIONS_PER_LEVEL = 40

Integrand = Callable[[float], complex]
ContourIntegrand = Callable[[complex, int], complex]


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_depth: int = 50

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if not 1 <= self.max_depth <= 60:
            raise ValueError(f"max_depth must lie in [1, 60], got {self.max_depth}")

    @property
    def limit(self) -> int:
        """Subinterval budget handed to the scipy integrators."""
        return SUBDIVISIONS_PER_LEVEL * self.max_depth

    def target(self, value: complex) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True)
class Segment:
    """A line segment or circular arc, parametrised by t in [0, 1]."""

    kind: str
    start: complex
    end: complex
    sheet: int = 1
    center: complex = 0j
    radius: float = 0.0
    angle0: float = 0.0
    angle1: float = 0.0

    @classmethod
    def line(cls, start: complex, end: complex, sheet: int = 1) -> "Segment":
        return cls("line", complex(start), complex(end), sheet)

    @classmethod
    def arc(
        cls, center: complex, radius: float, angle0: float, angle1: float, sheet: int = 1
    ) -> "Segment":
        center = complex(center)
        start = center + radius * np.exp(1j * angle0)
        end = center + radius * np.exp(1j * angle1)
        return cls("arc", start, end, sheet, center, float(radius), angle0, angle1)

    def point(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "line":
            return self.start + (self.end - self.start) * t
        angle = self.angle0 + (self.angle1 - self.angle0) * t
        return self.center + self.radius * np.exp(1j * angle)

    def derivative(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "line":
            return np.full(np.shape(t), self.end - self.start, dtype=complex)
        return 1j * (self.angle1 - self.angle0) * (self.point(t) - self.center)


@dataclass(frozen=True)
class Path:
    segments: tuple[Segment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for prev, nxt in zip(self.segments, self.segments[1:]):
            scale = max(1.0, abs(prev.end))
            if abs(prev.end - nxt.start) > 1e-13 * scale:
                raise ValueError(
                    f"path segments do not connect: {prev.end} -> {nxt.start}"
                )

    @property
    def start(self) -> complex:
        return self.segments[0].start

    @property
    def end(self) -> complex:
        return self.segments[-1].end

    def points(self, n: int = 64) -> np.ndarray:
        t = np.linspace(0.0, 1.0, n)
        return np.concatenate([s.point(t) for s in self.segments])


def _fsum_complex(values) -> complex:
    values = list(values)
    re = math.fsum(float(np.real(v)) for v in values)
    im = math.fsum(float(np.imag(v)) for v in values)
    return complex(re, im)


def integrate_interval(
    g: Integrand,
    lo: float,
    hi: float,
    tol: Tolerance = DEFAULT_TOL,
    full_output: bool = False,
):
    """
    Adaptive Gauss-Kronrod integral of a complex integrand over [lo, hi].

    Refinement stops at the tolerance or at the rounding floor of the panel
    sums, whichever comes first; running out of subintervals is an error.
    """
    value, err, info = integrate.quad_vec(
        lambda x: complex(g(x)),
        lo,
        hi,
        epsabs=tol.abs_tol,
        epsrel=tol.rel_tol,
        norm="max",
        limit=tol.limit,
        full_output=True,
    )
    if info.status == 3 or not np.isfinite(value):
        raise NonConvergenceError(
            f"non-finite integrand on [{lo}, {hi}]", estimate=float("inf")
        )
    if info.status == 1:
        raise NonConvergenceError(
            f"adaptive quadrature on [{lo}, {hi}] did not converge "
            f"in {len(info.intervals)} subintervals",
            estimate=err,
        )
    if info.status == 2:
        logger.debug(f"quadrature on [{lo}, {hi}] stopped at the rounding floor ({err:.2e})")

    value = complex(value)
    if full_output:
        return value, float(err)
    return value


def _quadpack(f: Integrand, lo: float, hi: float, tol: Tolerance, **weight):
    """Real and imaginary parts of a weighted integral through scipy.integrate.quad."""
    value, error = 0j, 0.0
    for part, unit in ((np.real, 1.0), (np.imag, 1j)):
        out = integrate.quad(
            lambda x: float(part(f(x))),
            lo,
            hi,
            full_output=1,
            epsabs=tol.abs_tol,
            epsrel=tol.rel_tol,
            limit=tol.limit,
            **weight,
        )
        result, abserr = out[0], out[1]
        if not (np.isfinite(result) and np.isfinite(abserr)):
            raise NonConvergenceError(
                f"non-finite integrand on [{lo}, {hi}]", estimate=float("inf")
            )
        # a fourth entry is QUADPACK's message for ier > 0
        if len(out) > 3:
            message = out[3].splitlines()[0].strip()
            if "roundoff" not in message.lower():
                raise NonConvergenceError(
                    f"QUADPACK on [{lo}, {hi}]: {message}", estimate=abserr
                )
            logger.debug(f"QUADPACK on [{lo}, {hi}] limited by roundoff ({abserr:.2e})")
        value += unit * result
        error += abserr
    return value, error


def integrate_path(
    f: ContourIntegrand, path: Path, tol: Tolerance = DEFAULT_TOL, full_output=False
):
    """Line integral of ``f(z, sheet)`` along every segment of ``path``."""
    values, errors = [], []
    for seg in path.segments:

        def g(t, seg=seg):
            return f(seg.point(t), seg.sheet) * seg.derivative(t)

        val, err = integrate_interval(g, 0.0, 1.0, tol, full_output=True)
        values.append(val)
        errors.append(err)

    value = _fsum_complex(values)
    if full_output:
        return value, math.fsum(errors)
    return value


def integrate_pv(
    g: Integrand,
    interval: tuple[float, float],
    pole: float,
    residue_coeff: complex,
    tol: Tolerance = DEFAULT_TOL,
    full_output: bool = False,
):
    """
    Principal value of the integral of ``g`` over ``interval`` where ``g`` has
    a simple pole ``residue_coeff / (x - pole)``.

    On a window centred at the pole, ``g(x) (x - pole)`` goes to QUADPACK with
    the Cauchy weight; at the pole itself that product is ``residue_coeff``.
    The rest of the interval is ordinary quadrature.
    """
    lo, hi = interval
    if not lo < pole < hi:
        raise PoleLocationError(f"pole {pole} not inside ({lo}, {hi})")
    half = 0.5 * min(pole - lo, hi - pole)
    # QUADPACK's window centre and bisection points can sit an ulp off the pole
    near = 8 * np.finfo(float).eps * max(1.0, abs(pole))

    def smooth(x):
        if abs(x - pole) <= near:
            return complex(residue_coeff)
        return complex(g(x)) * (x - pole)

    core, e_core = _quadpack(
        smooth, pole - half, pole + half, tol, weight="cauchy", wvar=pole
    )
    left, e_left = integrate_interval(g, lo, pole - half, tol, full_output=True)
    right, e_right = integrate_interval(g, pole + half, hi, tol, full_output=True)
    value = _fsum_complex([left, core, right])
    if full_output:
        return value, e_left + e_core + e_right
    return value


def _cosine_substituted(h: Integrand, m: float, rho: float) -> Integrand:
    def g(phi):
        return h(m + rho * np.cos(phi)) * (rho * np.sin(phi))

    return g


def integrate_cut(
    h: Integrand,
    interval: tuple[float, float],
    tol: Tolerance = DEFAULT_TOL,
    full_output: bool = False,
):
    """
    Integral over an interval of an integrand with inverse square-root end
    point singularities, via ``x = m + rho cos(phi)``.
    """
    lo, hi = interval
    m, rho = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return integrate_interval(
        _cosine_substituted(h, m, rho), 0.0, math.pi, tol, full_output=full_output
    )


def integrate_cut_pv(
    h: Integrand,
    interval: tuple[float, float],
    pole: float,
    residue_coeff: complex,
    tol: Tolerance = DEFAULT_TOL,
    full_output: bool = False,
):
    """``integrate_cut`` with an interior simple pole taken as principal value."""
    lo, hi = interval
    m, rho = 0.5 * (lo + hi), 0.5 * (hi - lo)
    phi0 = math.acos(min(1.0, max(-1.0, (pole - m) / rho)))
    # x decreases with phi: the pole keeps its PV, the residue flips sign
    return integrate_pv(
        _cosine_substituted(h, m, rho),
        (0.0, math.pi),
        phi0,
        -residue_coeff,
        tol,
        full_output=full_output,
    )


def tail_integral(
    density_series, Z, radius: float = 0.0, full_output: bool = False
):
    """
    Integral from infinity to ``Z`` of ``sum_m c_m z^{-m}``, with the
    coefficients ``c_2, ..., c_K`` given in order. The error estimate is the
    size of the last retained term.
    """
    coeffs = np.asarray(density_series, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    if radius and np.any(np.abs(Z) < radius):
        raise TailRadiusError(f"|Z| below the validated radius {radius}")

    value = np.zeros_like(Z)
    last = np.zeros(Z.shape)
    # Horner in 1/Z on terms c_m / (m - 1) Z^{1-m}, m >= 2
    inv = 1.0 / Z
    for idx in range(len(coeffs) - 1, -1, -1):
        m = idx + 2
        value = value * inv + coeffs[idx] / (m - 1)
    value = -value * inv

    if len(coeffs):
        m_last = len(coeffs) + 1
        last = np.abs(coeffs[-1] / (m_last - 1) * inv ** (m_last - 1))

    if Z.ndim == 0:
        value, last = complex(value), float(last)
    if full_output:
        return value, last
    return value


def series_mul(a, b, n: int) -> np.ndarray:
    return np.convolve(a[:n], b[:n])[:n]


def series_reciprocal(a, n: int) -> np.ndarray:
    """Power series of ``1/a`` to ``n`` terms (Newton iteration, ``a[0] != 0``)."""
    a = np.asarray(a)
    v = np.array([1.0 / a[0]], dtype=np.result_type(a, float))
    k = 1
    while k < n:
        k = min(2 * k, n)
        a_k = np.pad(a[:k], (0, max(0, k - len(a))))
        v = np.pad(v, (0, k - len(v)))
        correction = -series_mul(a_k, v, k)
        correction[0] += 2.0
        v = series_mul(v, correction, k)
    return v[:n]


def series_sqrt(a, n: int) -> np.ndarray:
    """Power series square root with ``s[0] = sqrt(a[0])`` (Newton iteration)."""
    a = np.asarray(a)
    s = np.array([np.sqrt(a[0])], dtype=np.result_type(a, float))
    k = 1
    while k < n:
        k = min(2 * k, n)
        a_k = np.pad(a[:k], (0, max(0, k - len(a))))
        s = np.pad(s, (0, k - len(s)))
        s = 0.5 * (s + series_mul(a_k, series_reciprocal(s, k), k))
    return s[:n]


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (error estimate {estimate:.3e})")
        self.estimate = estimate


class PoleLocationError(ValueError):
    pass


class TailRadiusError(ValueError):
    pass
