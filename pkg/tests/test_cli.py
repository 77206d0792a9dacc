import json

import numpy as np
import pytest

from sqsdecay.cli import main
from sqsdecay.harness import read_pole_json
from sqsdecay.spectral import SpectralTable

BOX = ["--model=box", "--G=20", "--G0=0", "--u=1e-4"]


@pytest.fixture(scope="module")
def table_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "rho.csv"
    assert main(["spectral", *BOX, "--n=500", f"--out={path}"]) == 0
    return path


def header(path):
    first = path.read_text().splitlines()[0]
    assert first.startswith("# ")
    return dict(tok.split("=", 1) for tok in first[2:].split())


def test_spectral_writes_table_with_header(table_file):
    h = header(table_file)
    assert h["model"] == "box" and h["G"] == "20.0" and h["G0"] == "0.0" and h["u"] == "0.0001"
    assert h["emax"] == "4000.0" and h["n"] == "500"
    assert "tail_estimate" in h and "eps_th" in h
    assert table_file.read_text().splitlines()[1] == "epsilon,rho"
    t = SpectralTable.from_csv(table_file)
    assert abs(t.integral - 1) < 1e-3


def test_spectral_is_deterministic(table_file, tmp_path):
    again = tmp_path / "again.csv"
    assert main(["spectral", *BOX, "--n=500", f"--out={again}"]) == 0
    assert again.read_bytes() == table_file.read_bytes()


def test_spectral_to_stdout(capsys):
    assert main(["spectral", "--G=20", "--G0=0", "--n=200", "--emax=500"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("# model=box") and out[1] == "epsilon,rho"


def test_spectral_trapezoid(tmp_path):
    out = tmp_path / "trap.csv"
    args = ["spectral", "--model=trapezoid", "--b=1.2", "--c=1.4", "--d=1.6", "--h1=400", "--h2=7", "--n=500"]
    assert main([*args, f"--out={out}"]) == 0
    h = header(out)
    assert h["model"] == "trapezoid" and h["h2"] == "7.0" and h["eps_th"] == "7.0"


def test_invalid_model_parameters_exit_2(capsys):
    assert main(["spectral", "--G=-1"]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["spectral", "--bogus=1"])
    assert exc.value.code == 2


def test_evolve_quadrature(table_file, tmp_path):
    out = tmp_path / "decay.csv"
    rc = main(["evolve", f"--table={table_file}", "--tmax=20", "--dt=0.5", "--window=5", f"--out={out}"])
    assert rc == 0
    lines = out.read_text().splitlines()
    h = header(out)
    assert h["method"] == "quadrature" and h["tmax"] == "20.0" and h["window"] == "5.0"
    assert h["table"] == "rho.csv" and h["G"] == "20.0"
    assert lines[1] == "tau,re_a,im_a,P,Gamma,err"
    rows = [ln.split(",") for ln in lines[2:]]
    assert len(rows) == 41
    assert float(rows[0][3]) == pytest.approx(1.0, abs=1e-3)
    assert all(r[4] != "" for r in rows)


def test_evolve_volterra_agrees(table_file, tmp_path):
    q, v = tmp_path / "q.csv", tmp_path / "v.csv"
    common = [f"--table={table_file}", "--tmax=10", "--dt=0.5"]
    assert main(["evolve", *common, f"--out={q}"]) == 0
    assert main(["evolve", *common, "--method=volterra", f"--out={v}"]) == 0
    a = np.loadtxt(q, delimiter=",", skiprows=2, usecols=(1, 2))
    b = np.loadtxt(v, delimiter=",", skiprows=2, usecols=(1, 2))
    assert a.shape == b.shape
    assert np.max(np.abs(a - b)) < 1e-3


def test_evolve_rejects_inconsistent_times(table_file):
    assert main(["evolve", f"--table={table_file}", "--tmax=10.3", "--dt=0.5"]) == 2


def test_evolve_missing_table(tmp_path):
    assert main(["evolve", f"--table={tmp_path / 'nope.csv'}"]) == 2


def test_pole_exact(tmp_path):
    out = tmp_path / "pole.json"
    assert main(["pole", *BOX, "--method=exact", f"--out={out}"]) == 0
    h = header(out)
    assert h["method"] == "exact" and h["G"] == "20.0"
    rep = read_pole_json(out)
    assert rep["model"] == "box" and rep["method"] == "exact_box"
    assert rep["re_z"] == pytest.approx(8.97365, abs=0.01)
    assert rep["criterion_ratio"] < 1


def test_pole_first_order_trapezoid(capsys):
    args = ["pole", "--model=trapezoid", "--h2=7", "--method=first_order", "--n=500"]
    assert main(args) == 0
    text = capsys.readouterr().out
    assert text.startswith("# model=trapezoid")
    rep = json.loads(text.split("\n", 1)[1])
    assert rep["residual"] is None and rep["im_z"] < 0


def test_pole_exact_trapezoid_is_validation_error():
    assert main(["pole", "--model=trapezoid", "--method=exact"]) == 2


def test_stalled_pole_continuation_exits_3(capsys):
    # at this depth the resonance pair has merged into virtual states
    rc = main(["pole", "--model=box", "--G=20", "--G0=8.957335", "--u=1e-4", "--method=exact"])
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err


def test_criterion_prints_both_forms(capsys):
    assert main(["criterion", *BOX]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("# model=box G=20.0 G0=0.0 u=0.0001")
    assert any(ln.startswith("exact") for ln in out)
    assert any(ln.startswith("practical") for ln in out)


def test_scan(tmp_path):
    out = tmp_path / "scan.csv"
    args = ["scan", "--G-min=10", "--G-max=20", "--G-n=2", "--Q-min=0.1", "--Q-max=1", "--Q-n=2", "--u=1e-4"]
    assert main([*args, f"--out={out}"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# G_min=10.0 G_max=20.0 G_n=2 Q_min=0.1 Q_max=1.0 Q_n=2 u=0.0001"
    assert lines[1] == "G,Q,G0,re_z,im_z,ratio"
    assert len(lines) == 6


def test_scan_rejects_empty_axis():
    assert main(["scan", "--G-n=0"]) == 2
