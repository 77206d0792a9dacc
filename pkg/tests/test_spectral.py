import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqsdecay import BoxSystem, ModelValidityError, NumericalError, TrapezoidSystem
from sqsdecay.model import solve_junction
from sqsdecay.spectral import (
    SpectralTable,
    alpha_box,
    alpha_box_array,
    alpha_box_complex,
    alpha_box_reference,
    build_table,
    overlap_factor,
    rho_box,
    rho_trapezoid,
    threshold_coefficient_box,
    threshold_fit,
)

WIDE = BoxSystem(20.0, 0.0, 1e-4)
NARROW = BoxSystem(20.0, 8.957335, 1e-4)


@pytest.fixture(scope="module")
def tables():
    return {"wide": build_table(WIDE), "narrow": build_table(NARROW)}


@pytest.fixture(scope="module")
def trapezoid_table():
    return build_table(TrapezoidSystem(1.2, 1.4, 1.6, 400.0, 7.0))


# alpha


@pytest.mark.parametrize("eps", [1e-6, 0.3, 9.87, 150.0, 3900.0])
def test_alpha_without_barrier_or_well_is_energy(eps):
    assert float(alpha_box(BoxSystem(0.0, 0.0, 1e-4), eps)) == pytest.approx(eps, rel=1e-12)


@pytest.mark.parametrize("sys", [WIDE, NARROW, BoxSystem(2.0, 1.0, 0.5)])
def test_alpha_continuous_at_barrier_top(sys):
    vb = sys.G / sys.u
    below = alpha_box_reference(sys, vb * (1 - 1e-15))
    above = alpha_box_reference(sys, vb * (1 + 1e-15))
    assert below == pytest.approx(above, rel=1e-12)
    assert float(alpha_box(sys, vb)) == pytest.approx(below, rel=1e-12)


def test_alpha_matches_junction_solution():
    sol = solve_junction(WIDE, 9.87)
    assert float(alpha_box(WIDE, 9.87)) == pytest.approx(sol.implied_alpha, rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 5e5))
def test_transfer_route_matches_closed_form(eps):
    for sys in (WIDE, NARROW):
        assert float(alpha_box(sys, eps)) == pytest.approx(alpha_box_reference(sys, eps), rel=1e-9)


def test_alpha_scaled_form_survives_overflow():
    sys = BoxSystem(5000.0, 0.0, 1.0)  # s u ~ 70 at low energy, cosh^2 ~ 1e60
    a = alpha_box(sys, 3.0)
    assert a.log_scale > 100
    assert math.isfinite(a.mantissa) and a.mantissa > 0


def test_alpha_rejects_negative_energy():
    with pytest.raises(ModelValidityError):
        alpha_box(WIDE, -1e-3)


def test_complex_alpha_on_real_axis_and_conjugation():
    for e in (0.5, 9.87, 300.0):
        assert alpha_box_complex(NARROW, e).real == pytest.approx(float(alpha_box(NARROW, e)), rel=1e-10)
    z = 3.2 - 0.7j
    assert alpha_box_complex(NARROW, z.conjugate()) == pytest.approx(alpha_box_complex(NARROW, z).conjugate(), rel=1e-13)


# rho


def test_rho_zero_at_threshold():
    assert rho_box(WIDE, 0.0) == 0.0
    assert rho_box(NARROW, 0.0) == 0.0


def test_rho_smooth_through_r_equal_pi():
    sys = BoxSystem(20.0, 1.0, 1e-4)
    e_pi = math.pi**2 - 1.0
    d = 1e-7
    left, mid, right = rho_box(sys, np.array([e_pi - d, e_pi, e_pi + d]))
    assert mid == pytest.approx(0.5 * (left + right), rel=1e-9)
    assert overlap_factor(math.pi) == pytest.approx(1 / (4 * math.pi**2), rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1e4))
def test_rho_nonnegative(eps):
    assert rho_box(NARROW, eps) >= 0


def test_rho_rejects_negative():
    with pytest.raises(ModelValidityError):
        rho_box(WIDE, np.array([1.0, -1.0]))


def test_rho_trapezoid_vanishes_toward_threshold():
    sys = TrapezoidSystem(1.2, 1.4, 1.6, 400.0, 7.0)
    v = rho_trapezoid(sys, 7.0 + np.array([1e-8, 4e-8]))
    assert v[1] / v[0] == pytest.approx(2.0, rel=1e-3)


# tables


@pytest.mark.parametrize("which", ["wide", "narrow"])
def test_table_normalized(tables, which):
    t = tables[which]
    assert t.integral + t.tail_estimate == pytest.approx(1.0, abs=1e-3)
    assert 0.99 <= t.trapezoid_integral() <= 1.0 + 1e-4
    assert np.all(t.values >= 0)


@pytest.mark.parametrize("which", ["wide", "narrow"])
def test_table_resolves_threshold_and_peak(tables, which):
    t = tables[which]
    p = t.first_peak
    x = t.grid - t.eps_th
    assert np.count_nonzero(x <= 10 * p.width) >= 200
    assert np.count_nonzero(np.abs(t.grid - p.center) <= 10 * p.width) >= 400


def test_table_converged_in_resolution(tables):
    finer = build_table(NARROW, n_base=4000)
    assert abs(finer.integral - tables["narrow"].integral) < 1e-4


def test_table_peak_positions(tables):
    assert tables["wide"].first_peak.center == pytest.approx(8.9745, abs=1e-3)
    assert tables["narrow"].first_peak.center < 1e-3


def test_build_table_errors():
    with pytest.raises(ModelValidityError):
        build_table(WIDE, eps_max=10.0)
    with pytest.raises(ModelValidityError):
        build_table(WIDE, n_base=10)
    with pytest.raises(NumericalError):
        build_table(NARROW, eps_max=1.0)


def test_trapezoid_table(trapezoid_table):
    t = trapezoid_table
    assert t.integral + t.tail_estimate == pytest.approx(1.0, abs=1e-2)
    p, _ = threshold_fit(t)
    assert p == pytest.approx(0.5, abs=0.02)


@pytest.mark.parametrize("which", ["wide", "narrow"])
def test_threshold_exponent_box(tables, which):
    p, _ = threshold_fit(tables[which])
    assert p == pytest.approx(0.5, abs=0.02)


@pytest.mark.parametrize("which,sys", [("wide", WIDE), ("narrow", NARROW)])
def test_threshold_coefficient_box(tables, which, sys):
    _, c = threshold_fit(tables[which])
    assert c == pytest.approx(threshold_coefficient_box(sys), rel=1e-2)


def test_threshold_coefficient_from_alpha_at_zero():
    a0 = float(alpha_box_array(NARROW, np.array([0.0]))[0])
    expected = 2 * math.pi * float(overlap_factor(math.sqrt(NARROW.G0))) / a0
    assert threshold_coefficient_box(NARROW) == pytest.approx(expected, rel=1e-14)


def test_threshold_fit_rejects_zero_in_window():
    g = np.linspace(0.0, 1.0, 400)
    v = np.sqrt(g)
    v[100] = 0.0
    t = SpectralTable(0.0, g, v)
    with pytest.raises(NumericalError):
        threshold_fit(t, window=0.5)


def test_threshold_fit_needs_points():
    t = SpectralTable(0.0, np.linspace(0, 1, 20), np.linspace(0, 1, 20))
    with pytest.raises(NumericalError):
        threshold_fit(t, window=0.5)


def test_table_invariants_enforced():
    with pytest.raises(ModelValidityError):
        SpectralTable(0.0, [0.0, 1.0, 0.5], [0.0, 1.0, 1.0])
    with pytest.raises(ModelValidityError):
        SpectralTable(0.0, [0.0, 1.0], [0.0, -1.0])
    with pytest.raises(ModelValidityError):
        SpectralTable(0.0, [0.0], [0.0])


def test_csv_round_trip(tables, tmp_path):
    t = tables["narrow"]
    path = tmp_path / "t.csv"
    text = t.to_csv(path)
    lines = text.splitlines()
    assert lines[0].startswith("# ") and "G0=8.957335" in lines[0]
    assert lines[1] == "epsilon,rho"
    back = SpectralTable.from_csv(path)
    assert np.array_equal(back.grid, t.grid) and np.array_equal(back.values, t.values)
    assert back.model_tag == "box" and back.eps_th == t.eps_th
    assert back.tail_estimate == t.tail_estimate
    assert dict(back.params, model="box") == t.params


def test_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("e,r\n0,0\n1,1\n")
    with pytest.raises(ModelValidityError):
        SpectralTable.from_csv(path)
