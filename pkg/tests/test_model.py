import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqsdecay import BoxSystem, ModelValidityError, TrapezoidSystem, bare_level, kinematics
from sqsdecay.model import (
    UnitsConvention,
    initial_state_overlap_oracle,
    solve_junction,
    validate_box,
    zero_energy_node_count,
)
from sqsdecay.spectral import alpha_box, rho_box

PI2 = math.pi**2


def test_bare_level_values():
    assert bare_level(BoxSystem(20, 0, 1e-4)) == pytest.approx(9.8696044, abs=1e-7)
    assert bare_level(BoxSystem(20, PI2, 1e-4)) == 0.0
    assert bare_level(BoxSystem(20, 8.957335, 1e-4)) == pytest.approx(0.9122694, abs=1e-7)


@given(st.floats(0, 50), st.floats(0, 50))
def test_bare_level_decreasing(a, b):
    lo, hi = sorted((a, b))
    if hi - lo < 1e-9:  # below float resolution of the level
        return
    assert bare_level(BoxSystem(1.0, lo, 1.0)) > bare_level(BoxSystem(1.0, hi, 1.0))


def test_kinematics_threshold():
    k = kinematics(BoxSystem(20, 4, 1e-4), 0.0)
    assert (k.q, k.r) == (0.0, 2.0)


def test_kinematics_matching_point_goes_evanescent():
    sys = BoxSystem(20, 0, 1e-4)
    k = kinematics(sys, sys.G / sys.u)
    assert k.s == 0.0 and k.evanescent


def test_kinematics_barrier_value():
    k = kinematics(BoxSystem(20, 0, 1e-4), 9.87)
    assert k.s == pytest.approx(math.sqrt(200000 - 9.87), rel=1e-15)
    assert k.branch == "evanescent"


def test_kinematics_rejects_negative_energy():
    with pytest.raises(ModelValidityError):
        kinematics(BoxSystem(20, 0, 1e-4), -1.0)


def test_kinematics_continuity_across_barrier_top():
    sys = BoxSystem(2.0, 1.0, 0.5)
    vb = sys.G / sys.u
    below = kinematics(sys, vb * (1 - 1e-12))
    above = kinematics(sys, vb * (1 + 1e-12))
    assert below.evanescent and not above.evanescent
    assert below.s < 1e-5 and above.s < 1e-5


@pytest.mark.parametrize(
    "args", [(-1, 0, 1), (1, -1, 1), (1, 0, 0), (1, 0, -2), (float("nan"), 0, 1), (1, float("inf"), 1), ("1", 0, 1)]
)
def test_box_rejects_invalid(args):
    with pytest.raises(ModelValidityError):
        BoxSystem(*args)


def test_box_accessors():
    sys = BoxSystem(20, 3, 0.5)
    assert (sys.a, sys.b, sys.U, sys.U0) == (1.0, 0.5, 20.0, 3.0)
    assert sys.barrier_height == 40.0
    assert sys.params() == {"model": "box", "G": 20.0, "G0": 3.0, "u": 0.5}


def test_trapezoid_slopes_and_threshold():
    t = TrapezoidSystem(1.2, 1.4, 1.6, 400.0, 7.0)
    assert t.eps_th == 7.0
    assert t.L == pytest.approx(400 / 0.2)
    assert t.R == pytest.approx(393 / 0.2)


@pytest.mark.parametrize("args", [(1.4, 1.2, 1.6, 400, 7), (1.2, 1.4, 1.6, 7, 400), (1.2, 1.4, 1.6, 400, 0)])
def test_trapezoid_rejects_invalid(args):
    with pytest.raises(ModelValidityError):
        TrapezoidSystem(*args)


def test_units_are_pure_scalings():
    e = UnitsConvention.energy_unit(mass=2.0, width=3.0)
    assert e == pytest.approx(1 / (2 * 2.0 * 9.0))
    assert UnitsConvention.to_dimensionless_energy(5 * e, 2.0, 3.0) == pytest.approx(5.0)
    t = UnitsConvention.time_unit(mass=2.0, width=3.0)
    assert UnitsConvention.to_dimensionless_time(7 * t, 2.0, 3.0) == pytest.approx(7.0)


# validation


def test_validate_accepts_both_reference_systems():
    validate_box(BoxSystem(20, 0, 1e-4))
    validate_box(BoxSystem(20, 8.957335, 1e-4))


def test_validate_rejects_level_below_threshold():
    with pytest.raises(ModelValidityError):
        validate_box(BoxSystem(20, 12.0, 1e-4))


def test_bound_state_counting():
    assert zero_energy_node_count(BoxSystem(20, 8.957335, 1e-4)) == 0
    # a thin barrier cannot hold a deep well's level: bound states appear
    assert zero_energy_node_count(BoxSystem(0.5, 30.0, 0.1)) >= 1


# junction oracle


def test_oracle_vanishes_where_sin_r_vanishes():
    sys = BoxSystem(20, 0, 1e-4)
    eps = (2 * math.pi) ** 2
    assert initial_state_overlap_oracle(sys, eps) == pytest.approx(0.0, abs=1e-14)


def test_oracle_matches_rho_at_five():
    sys = BoxSystem(20, 0, 1e-4)
    assert initial_state_overlap_oracle(sys, 5.0) == pytest.approx(rho_box(sys, 5.0), rel=1e-8)


def test_oracle_free_wall_limit_at_r_equal_pi():
    # G = G0 = 0: rho = 2 pi sin^2 q / (q (q^2 - pi^2)^2) with limit 1/(2 pi^2) at q = pi
    sys = BoxSystem(0.0, 0.0, 1e-4)
    assert initial_state_overlap_oracle(sys, PI2) == pytest.approx(1 / (2 * PI2), rel=1e-8)


def test_junction_normalization_implies_alpha():
    sys = BoxSystem(20, 0, 1e-4)
    sol = solve_junction(sys, 9.87)
    assert sol.implied_alpha == pytest.approx(float(alpha_box(sys, 9.87)), rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 500.0))
def test_oracle_nonnegative(eps):
    assert initial_state_overlap_oracle(BoxSystem(20, 8.957335, 1e-4), eps) >= 0


def test_oracle_twenty_random_energies():
    rng = np.random.default_rng(3)
    for sys in (BoxSystem(20, 0, 1e-4), BoxSystem(20, 8.957335, 1e-4)):
        eps = 10 ** rng.uniform(-3, 3, 20)
        ref = np.array([initial_state_overlap_oracle(sys, e) for e in eps])
        assert np.max(np.abs(rho_box(sys, eps) / ref - 1)) < 1e-8
