import json
import math

import numpy as np
import pytest

from sqsdecay import BoxSystem, ModelValidityError, NumericalError
from sqsdecay.harness import (
    PoleCache,
    SweepGrid,
    default_axes,
    evaluate_criteria,
    format_header,
    is_sqs,
    is_sqs_practical,
    pole_report,
    read_pole_json,
    solve_G0_for_Q,
    sqs_criterion,
    sqs_criterion_practical,
    sweep,
    write_pole_json,
)
from sqsdecay.resolvent import ComplexPole, pole_exact_box

U = 1e-4
WIDE = BoxSystem(20.0, 0.0, U)
NARROW = BoxSystem(20.0, 8.957335, U)


@pytest.fixture(scope="module")
def default_sweep():
    """The default 20 x 20 (G, Q) grid with both criteria; shared by the slow tests."""
    G, Q = default_axes()
    return sweep(G, Q, U, practical=True)


# criteria


def test_criterion_arithmetic():
    r = sqs_criterion(ComplexPole(1 - 0.5j, "first_order"), 0.0)
    assert r == 0.5 and not is_sqs(r)


def test_criterion_below_threshold():
    with pytest.raises(ModelValidityError):
        sqs_criterion(ComplexPole(-0.1 - 0.5j, "first_order"), 0.0)


def test_criterion_exponential_case():
    assert not is_sqs(sqs_criterion(pole_exact_box(WIDE), 0.0))


def test_criterion_sqs_case():
    assert is_sqs(sqs_criterion(pole_exact_box(NARROW), 0.0))


def test_practical_boundary_and_zero():
    r = sqs_criterion_practical(2.0, 1.0, 0.0)
    assert r == 2.0 and is_sqs_practical(r)
    r = sqs_criterion_practical(0.0, 1.0, 0.0)
    assert r == 0.0 and not is_sqs_practical(r)


def test_practical_errors():
    with pytest.raises(ModelValidityError):
        sqs_criterion_practical(1.0, 0.0, 0.0)
    with pytest.raises(ModelValidityError):
        sqs_criterion_practical(-1.0, 1.0, 0.0)


def test_report_for_exponential_case():
    rep = evaluate_criteria(WIDE)
    assert rep.ok and rep.ratio < 1
    assert rep.ratio2_pole is not None and rep.ratio2_bare is not None
    text = rep.lines()
    assert text[0].startswith("# model=box G=20.0 G0=0.0 u=0.0001")
    assert any("sqs=False" in ln for ln in text)


def test_report_records_missing_pieces():
    rep = evaluate_criteria(NARROW)
    # the bare-level practical form is always available
    assert rep.ratio2_bare is not None
    if rep.pole is None:
        assert rep.notes and any(ln.startswith("unavailable:") for ln in rep.lines())


# Q -> G0


def test_solve_G0_exponential_point():
    assert solve_G0_for_Q(20.0, U, 8.97365) == pytest.approx(0.0, abs=1e-3)


def test_solve_G0_sqs_point():
    assert solve_G0_for_Q(20.0, U, 6.55445e-4) == pytest.approx(8.957335, abs=1e-4)


def test_solve_G0_hits_target():
    G0 = solve_G0_for_Q(20.0, U, 0.1)
    assert abs(pole_exact_box(BoxSystem(20.0, G0, U)).z.real - 0.1) < 1e-6 * 0.1


def test_solve_G0_decreasing_in_Q():
    cache = PoleCache()
    targets = [0.01, 0.1, 1.0, 3.0, 8.0]
    g0 = [solve_G0_for_Q(20.0, U, q, cache) for q in targets]
    assert all(a > b for a, b in zip(g0, g0[1:]))


def test_solve_G0_unattainable():
    with pytest.raises(ModelValidityError):
        solve_G0_for_Q(20.0, U, 10.0)
    with pytest.raises(ModelValidityError):
        solve_G0_for_Q(20.0, U, -1.0)


def test_pole_cache_reuses_and_remembers_failures():
    c = PoleCache()
    a = c.pole(20.0, 0.0, U)
    b = c.pole(20.0 * (1 + 1e-14), 0.0, U)
    assert a is b and c.hits == 1
    with pytest.raises(ModelValidityError):
        c.pole(20.0, 12.0, U)
    with pytest.raises(ModelValidityError):
        c.pole(20.0, 12.0, U)
    assert c.hits == 2


# sweeps


def test_fig2_points_on_opposite_sides():
    g = sweep([20.0], [6.55445e-4, 8.97365], U)
    assert g.ratio[0, 0] >= 1.0 > g.ratio[1, 0]


def test_single_cell_matches_direct_call():
    g = sweep([20.0], [0.1], U)
    G0 = solve_G0_for_Q(20.0, U, 0.1)
    direct = sqs_criterion(pole_exact_box(BoxSystem(20.0, G0, U)), 0.0)
    assert g.g0[0, 0] == G0
    assert g.ratio[0, 0] == direct


def test_parallel_equals_serial():
    G, Q = [10.0, 30.0], [0.01, 1.0]
    a = sweep(G, Q, U, workers=1)
    b = sweep(G, Q, U, workers=2)
    for m in ("ratio", "g0", "re_z", "im_z"):
        assert np.array_equal(getattr(a, m), getattr(b, m), equal_nan=True)


def test_failed_cells_are_recorded():
    g = sweep([20.0], [0.1, 10.0], U)
    assert np.isfinite(g.ratio[0, 0]) and np.isnan(g.ratio[1, 0])
    assert (1, 0) in g.failures


def test_sweep_rejects_bad_axes():
    with pytest.raises(ModelValidityError):
        sweep([], [1.0], U)
    with pytest.raises(ModelValidityError):
        sweep([-1.0], [1.0], U)


def test_grid_shape_invariant():
    z = np.zeros((2, 3))
    with pytest.raises(ValueError):
        SweepGrid(np.arange(2.0), np.arange(2.0), U, z, z, z, z)


@pytest.mark.slow
def test_practical_agrees_with_exact_on_default_grid(default_sweep):
    g = default_sweep
    both = np.isfinite(g.ratio) & np.isfinite(g.ratio2)
    assert both.sum() >= 300
    agree = (g.ratio[both] >= 1.0) == (g.ratio2[both] >= 2.0)
    assert agree.mean() >= 0.9


@pytest.mark.slow
def test_ratio_grows_as_Q_falls(default_sweep):
    g = default_sweep
    sub = g.ratio[::2, ::2]  # 10 x 10
    for col in sub.T:
        vals = col[np.isfinite(col)]
        assert vals.size >= 8
        assert np.all(np.diff(vals) < 0)  # rows run toward larger Q


@pytest.mark.slow
def test_default_grid_entries_positive(default_sweep):
    r = default_sweep.ratio
    assert np.all(r[np.isfinite(r)] > 0)


def test_scan_csv(tmp_path):
    g = sweep([10.0, 20.0], [0.1, 10.0], U)
    text = g.to_csv(tmp_path / "scan.csv")
    lines = text.splitlines()
    assert lines[0] == "# G_min=10.0 G_max=20.0 G_n=2 Q_min=0.1 Q_max=10.0 Q_n=2 u=0.0001"
    assert lines[1] == "G,Q,G0,re_z,im_z,ratio"
    assert len(lines) == 6
    last = lines[-1].split(",")
    assert last[:2] == ["20", "10"] and last[2:] == ["", "", "", ""]
    assert (tmp_path / "scan.csv").read_text() == text


# pole JSON


def test_pole_json_round_trip(tmp_path):
    pole = pole_exact_box(WIDE)
    rep = pole_report(WIDE.params(), pole)
    text = write_pole_json(rep, tmp_path / "p.json")
    assert text.startswith("# model=box G=20.0 G0=0.0 u=0.0001 method=exact_box\n")
    back = read_pole_json(tmp_path / "p.json")
    assert set(back) == {"model", "params", "method", "re_z", "im_z", "residual", "Q", "gamma_p", "criterion_ratio"}
    assert back["re_z"] == pole.z.real and back["im_z"] == pole.z.imag
    assert back["criterion_ratio"] == pytest.approx(abs(pole.z.imag) / pole.z.real, rel=1e-15)
    assert back["gamma_p"] == pytest.approx(-2 * pole.z.imag)


def test_first_order_report_has_null_residual():
    rep = pole_report({"model": "trapezoid"}, ComplexPole(3 - 1j, "first_order"))
    assert rep["residual"] is None
    json.loads(write_pole_json(rep).split("\n", 1)[1])


def test_header_float_text_round_trips():
    head = format_header({"a": 0.1, "b": 1e-4, "c": 8.957335, "name": "x y"})
    assert head == "# a=0.1 b=0.0001 c=8.957335 name=x_y"
    assert float(head.split()[3].split("=")[1]) == 8.957335
    assert math.isfinite(float("0.0001"))
