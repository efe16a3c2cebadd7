import cmath
import math

import numpy as np
import pytest
import hypothesis.strategies as st
from hypothesis import given

from rhparametrix.numerics import (
    NonConvergenceError,
    Path,
    PoleLocationError,
    Segment,
    TailRadiusError,
    Tolerance,
    integrate_cut,
    integrate_cut_pv,
    integrate_interval,
    integrate_path,
    integrate_pv,
    series_mul,
    series_reciprocal,
    series_sqrt,
    tail_integral,
)


def test_unit_circle_residue():
    path = Path([Segment.arc(0, 1.0, 0.0, 2 * math.pi)])
    value = integrate_path(lambda z, sheet: 1 / z, path)
    assert abs(value - 2j * math.pi) <= 1e-12


def test_constant_on_segment():
    path = Path([Segment.line(0, 1 + 1j)])
    value = integrate_path(lambda z, sheet: np.ones_like(z), path)
    assert abs(value - (1 + 1j)) <= 1e-14


def test_exponential_on_interval():
    value = integrate_interval(np.exp, 0.0, 1.0)
    assert abs(value - (math.e - 1)) <= 1e-13


def test_path_segments_must_connect():
    with pytest.raises(ValueError, match="do not connect"):
        Path([Segment.line(0, 1), Segment.line(2, 3)])


def test_path_sheet_is_passed_to_integrand():
    seen = set()

    def f(z, sheet):
        seen.add(sheet)
        return np.ones_like(z)

    path = Path([Segment.line(0, 1, sheet=1), Segment.line(1, 2, sheet=2)])
    assert abs(integrate_path(f, path) - 2) <= 1e-14
    assert seen == {1, 2}


def test_path_points_sample_every_segment():
    path = Path([Segment.line(0, 1), Segment.arc(0, 1.0, 0.0, math.pi)])
    pts = path.points(5)
    assert len(pts) == 10
    assert abs(pts[-1] + 1) <= 1e-15


def test_tolerance_validation():
    with pytest.raises(ValueError):
        Tolerance(abs_tol=0.0)
    with pytest.raises(ValueError):
        Tolerance(max_depth=0)


def test_divergent_integral_raises():
    with pytest.raises(NonConvergenceError) as err:
        integrate_interval(lambda x: 1 / x, 0.0, 1.0, Tolerance(max_depth=6))
    assert err.value.estimate > 0


@pytest.mark.parametrize("k", range(23))
def test_polynomials_are_integrated_exactly(k):
    value = integrate_interval(lambda x: x**k, -1.0, 1.0)
    expected = (1 + (-1) ** k) / (k + 1)
    assert abs(value - expected) <= 1e-13


def test_non_finite_integrand_raises():
    with pytest.raises(NonConvergenceError, match="non-finite"):
        integrate_interval(lambda x: math.nan, 0.0, 1.0)


@pytest.mark.parametrize("distance", [1e-3, 1e-6])
def test_segment_ending_next_to_a_singularity(distance):
    end = 1 + distance * cmath.exp(1j * math.pi / 4)
    path = Path([Segment.line(2j, end)])
    value = integrate_path(lambda z, sheet: 1 / (z - 1), path)
    expected = cmath.log(end - 1) - cmath.log(2j - 1)
    assert abs(value - expected) <= 1e-8


def test_pv_asymmetric_interval():
    value = integrate_pv(lambda x: 1 / x, (-1.0, 2.0), 0.0, 1.0)
    assert abs(value - math.log(2)) <= 1e-12


def test_pv_symmetric_interval():
    value = integrate_pv(lambda x: 1 / x, (-1.0, 1.0), 0.0, 1.0)
    assert abs(value) <= 1e-12


def test_pv_with_regular_part():
    # PV int_{-1}^{1} e^x / x dx = Shi(1) * 2
    value = integrate_pv(lambda x: np.exp(x) / x, (-1.0, 1.0), 0.0, 1.0)
    assert abs(value - 2 * 1.0572508753757286) <= 1e-12


@given(st.floats(min_value=0.001, max_value=0.999))
def test_pv_of_a_pure_pole_anywhere_in_the_interval(p):
    value = integrate_pv(lambda x: 1 / (x - p), (0.0, 1.0), p, 1.0)
    assert abs(value - math.log((1 - p) / p)) <= 1e-10


def test_pv_pole_outside_interval():
    with pytest.raises(PoleLocationError):
        integrate_pv(lambda x: 1 / (x - 3), (-1.0, 1.0), 3.0, 1.0)


@pytest.mark.parametrize("a,b", [(-1.0, 1.0), (0.0, 3.0), (2.5, 2.75)])
def test_cut_integral_arcsine_weight(a, b):
    value = integrate_cut(lambda x: 1 / np.sqrt((x - a) * (b - x)), (a, b))
    assert abs(value - math.pi) <= 1e-12


def test_cut_integral_odd_weight():
    value = integrate_cut(lambda x: x / np.sqrt(1 - x**2), (-1.0, 1.0))
    assert abs(value) <= 1e-13


@given(st.floats(min_value=-0.999, max_value=0.999))
def test_cut_pv_of_chebyshev_weight_vanishes(t):
    def h(x):
        return 1 / ((x - t) * np.sqrt(1 - x**2))

    value = integrate_cut_pv(h, (-1.0, 1.0), t, 1 / math.sqrt(1 - t**2))
    assert abs(value) <= 1e-9


def test_cut_pv_second_kind():
    # PV int sqrt(1 - x^2) / (x - t) dx = -pi t
    t = 0.3
    value = integrate_cut_pv(
        lambda x: np.sqrt(1 - x**2) / (x - t), (-1.0, 1.0), t, math.sqrt(1 - t**2)
    )
    assert abs(value + math.pi * t) <= 1e-10


def test_tail_integral_inverse_square():
    assert abs(tail_integral([1.0], 10.0) + 0.1) <= 1e-15


def test_tail_integral_zero_series():
    assert tail_integral([0.0, 0.0, 0.0], 5.0 + 1j) == 0


def test_tail_integral_matches_quadrature():
    coeffs = [0.3, -1.2, 0.5]
    Z = 4j

    def density(z, sheet):
        return sum(c * z ** -(m + 2) for m, c in enumerate(coeffs))

    # int_inf^Z = int_inf^R - int_Z^R
    R = 400j
    near = integrate_path(density, Path([Segment.line(Z, R)]))
    far = tail_integral(coeffs, R)
    assert abs(tail_integral(coeffs, Z) - (far - near)) <= 1e-12


def test_tail_integral_error_estimate():
    value, last = tail_integral([1.0, 2.0], 10.0, full_output=True)
    assert abs(value - (-0.1 - 2 / (2 * 100))) <= 1e-15
    assert abs(last - 0.01) <= 1e-15


def test_tail_radius_is_enforced():
    with pytest.raises(TailRadiusError):
        tail_integral([1.0], 0.5, radius=1.0)


def test_series_sqrt_perfect_square():
    s = series_sqrt(np.array([1.0, -2.0, 1.0]), 5)
    np.testing.assert_allclose(s, [1.0, -1.0, 0.0, 0.0, 0.0], atol=1e-14)


def test_series_reciprocal_geometric():
    v = series_reciprocal(np.array([1.0, -1.0]), 8)
    np.testing.assert_allclose(v, np.ones(8), atol=1e-15)


@given(
    st.lists(st.floats(min_value=-1, max_value=1), min_size=1, max_size=6),
    st.floats(min_value=1, max_value=3),
)
def test_series_reciprocal_inverts_product(tail, lead):
    a = np.array([lead, *tail])
    n = 8
    product = series_mul(np.pad(a, (0, n)), series_reciprocal(a, n), n)
    expected = np.zeros(n)
    expected[0] = 1.0
    np.testing.assert_allclose(product, expected, atol=1e-9)
