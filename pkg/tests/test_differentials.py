import math
from fractions import Fraction

import numpy as np
import pytest
import hypothesis.strategies as st
from hypothesis import given

import rhparametrix.differentials as differentials
from rhparametrix.differentials import (
    DifferentialConstructionError,
    PoleError,
    a_cycle,
    b_cycle,
    build_differential,
    eval_density,
    holomorphic_period_matrix,
    laurent_at_infinity,
    period,
    pole_set,
    resolve_cycle,
    residue_at,
    residue_by_quadrature,
)
from rhparametrix.surface import (
    OvalPoint,
    SheetPoint,
    SheetPointError,
    Side,
    SurfaceConfig,
    oval_coords,
)


def divisor(*thetas):
    return tuple(OvalPoint(j, t) for j, t in enumerate(thetas, start=1))


@pytest.fixture
def generic(two_cut_asymmetric):
    return build_differential(two_cut_asymmetric, divisor(0.3), 1)


def test_one_cut_density_in_closed_form(one_cut):
    omega = build_differential(one_cut, (), 1)
    assert omega.gamma.shape == (0,)
    assert abs(omega.A(2.0 + 0j) + 1 / 3) <= 1e-15
    assert abs(eval_density(omega, SheetPoint(2.0, 1)) - (-0.0446582)) <= 1e-7


def test_one_cut_density_on_the_cut(one_cut):
    omega = build_differential(one_cut, (), 1)
    above = eval_density(omega, SheetPoint(0.5, 1, Side.ABOVE))
    below = eval_density(omega, SheetPoint(0.5, 2, Side.BELOW))
    # sheet 1 above continues into sheet 2 below
    assert abs(above - below) <= 1e-14
    with pytest.raises(SheetPointError):
        eval_density(omega, SheetPoint(0.5, 1))


def test_density_rejects_poles(generic):
    with pytest.raises(PoleError):
        eval_density(generic, SheetPoint(1.0, 1))
    x = generic.x[0]
    with pytest.raises(PoleError):
        eval_density(generic, SheetPoint(x, generic.sheets[0]))
    # the conjugate point is regular
    value = eval_density(generic, SheetPoint(x, 3 - generic.sheets[0]))
    assert math.isfinite(abs(value))


def test_invalid_inputs(two_cut_asymmetric):
    with pytest.raises(ValueError, match="nu"):
        build_differential(two_cut_asymmetric, divisor(0.3), 3)
    with pytest.raises(ValueError, match="one oval point per gap"):
        build_differential(two_cut_asymmetric, (OvalPoint(2, 0.3),), 1)


def test_ill_conditioned_basis_is_reported(two_cut_asymmetric, monkeypatch):
    monkeypatch.setattr(differentials, "MAX_CONDITION", 1.0)
    with pytest.raises(DifferentialConstructionError) as err:
        build_differential(two_cut_asymmetric, divisor(0.3), 1)
    assert err.value.condition >= 1.0


def test_period_matrix_is_cached_and_frozen(three_cut):
    H = holomorphic_period_matrix(three_cut)
    assert holomorphic_period_matrix(three_cut) is H
    assert H.shape == (2, 2)
    with pytest.raises(ValueError):
        H[0, 0] = 1.0


@pytest.mark.parametrize("nu", [1, 2])
@pytest.mark.parametrize("theta", [0.0, 0.1, 0.3, 0.5, 0.7, 0.95])
def test_a_periods_vanish(two_cut_asymmetric, nu, theta):
    omega = build_differential(two_cut_asymmetric, divisor(theta), nu)
    assert np.isrealobj(omega.gamma)
    value = period(omega, a_cycle(two_cut_asymmetric, 1), method="direct")
    assert abs(value) <= 1e-9


@pytest.mark.parametrize("nu", [1, 2])
@pytest.mark.parametrize("thetas", [(0.25, 0.25), (0.6, 0.1), (0.0, 0.8)])
def test_periods_collapsed_match_direct(three_cut, nu, thetas):
    omega = build_differential(three_cut, divisor(*thetas), nu)
    for j in (1, 2):
        for cycle in (a_cycle(three_cut, j), b_cycle(three_cut, j)):
            collapsed = period(omega, cycle)
            direct = period(omega, cycle, method="direct")
            assert abs(collapsed - direct) <= 1e-9
            if cycle.kind == "B":
                assert abs(collapsed.real) <= 1e-12


def test_b_cycle_moves_off_a_pole(two_cut_asymmetric):
    # theta = 1/6 puts x_1 on the default crossing b_1 + delta
    omega = build_differential(two_cut_asymmetric, divisor(1 / 6), 2)
    assert abs(omega.x[0] - 1.25) <= 1e-12
    cycle = resolve_cycle(omega, b_cycle(two_cut_asymmetric, 1))
    assert cycle.crossing == pytest.approx(1.75)
    collapsed = period(omega, cycle)
    direct = period(omega, cycle, method="direct")
    assert abs(collapsed - direct) <= 1e-9


def test_residues(three_cut):
    omega = build_differential(three_cut, divisor(0.3, 0.6), 1)
    poles = pole_set(omega)
    assert len(poles) == 9
    assert sum(p.residue for p in poles) == 0
    assert residue_at(omega, ("a", 2)) == Fraction(-1, 2)
    assert residue_at(omega, ("P", 1)) == 1
    assert residue_at(omega, ("inf", 2)) == 1
    with pytest.raises(PoleError):
        residue_at(omega, ("inf", 1))


def test_merged_branch_pole(two_cut_asymmetric):
    omega = build_differential(two_cut_asymmetric, divisor(0.0), 2)
    assert residue_at(omega, ("b", 1)) == Fraction(1, 2)
    assert residue_at(omega, ("P", 1)) == Fraction(1, 2)
    assert sum(p.residue for p in pole_set(omega)) == 0
    assert abs(residue_by_quadrature(omega, ("b", 1)) - 0.5) <= 1e-8


@pytest.mark.parametrize("pole,expected", [(("P", 1), 1.0), (("a", 1), -0.5), (("b", 2), -0.5)])
def test_residues_by_quadrature(generic, pole, expected):
    assert abs(residue_by_quadrature(generic, pole) - expected) <= 1e-8


@pytest.mark.parametrize("nu", [1, 2])
def test_laurent_series_at_infinity(three_cut, nu):
    omega = build_differential(three_cut, divisor(0.4, 0.8), nu)
    z = 60.0 * np.exp(0.7j)
    for sheet in (1, 2):
        d = laurent_at_infinity(omega, sheet, 20)
        assert d[0] == (0.0 if sheet == nu else pytest.approx(-1.0, abs=1e-12))
        series = sum(dm * z ** -(m + 1) for m, dm in enumerate(d))
        assert abs(series - omega.raw_density(z, sheet)) <= 1e-12


def test_far_density_uses_the_series(generic):
    config = generic.config
    z = np.array([2j, 3 * config.anchor_radius * 1j])
    values = generic.density(z, 1)
    np.testing.assert_allclose(values, generic.raw_density(z, 1), atol=1e-13)


@pytest.mark.parametrize("edge", [1e-6, 1 - 1e-6, 0.5 + 1e-6])
def test_coefficients_continuous_through_branch_points(two_cut_asymmetric, edge):
    snapped = round(edge * 2) / 2
    near = build_differential(two_cut_asymmetric, divisor(edge), 1)
    at = build_differential(two_cut_asymmetric, divisor(snapped), 1)
    assert np.max(np.abs(near.gamma - at.gamma)) <= 1e-3


@given(
    z=st.complex_numbers(max_magnitude=8).filter(lambda z: abs(z.imag) > 1e-2),
    sheet=st.sampled_from([1, 2]),
)
def test_density_schwarz_symmetry(z, sheet):
    config = SurfaceConfig(((0.0, 1.0), (2.0, 5.0)))
    omega = build_differential(config, divisor(0.3), 1)
    value = eval_density(omega, SheetPoint(z, sheet))
    mirrored = eval_density(omega, SheetPoint(z.conjugate(), sheet))
    assert abs(mirrored - value.conjugate()) <= 1e-12 * max(1.0, abs(value))


def test_divisor_coordinates(generic):
    x, w, sheet = oval_coords(generic.config, OvalPoint(1, 0.3))
    assert generic.x[0] == x and generic.w[0] == w and generic.sheets == (sheet,)
    np.testing.assert_array_equal(generic.divisor_sign, [1.0])
