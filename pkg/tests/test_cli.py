import json
import os

import pytest

from kinklab import cli


def test_params_csv(tmp_path, capsys):
    assert cli.main(["params", "--eps-grid", "0.05,0.1", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "params.csv").read_text().splitlines()
    assert lines[0].startswith("# kinklab params config=")
    assert lines[1].split(",")[:4] == ["eps", "delta", "Omega", "omega"]
    assert len(lines) == 4
    assert len(capsys.readouterr().out.strip().splitlines()) == 2


def test_json_format(tmp_path):
    assert cli.main(["params", "--eps", "0.1", "--format", "json", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "params.json").read_text())
    assert doc["fields"][0] == "eps" and doc["rows"][0][0] == 0.1


def test_rerun_is_byte_identical_and_run_json_round_trips(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    args = ["melnikov", "--eps-grid", "0.1,0.2", "--method", "both"]
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert (a / "melnikov.csv").read_bytes() == (b / "melnikov.csv").read_bytes()
    assert cli.main(["melnikov", "--config", str(a / "run.json"), "--out", str(c)]) == 0
    assert (a / "melnikov.csv").read_bytes() == (c / "melnikov.csv").read_bytes()
    assert not [f for f in os.listdir(a) if f.startswith(".tmp-")]


def test_melnikov_both_methods_agree(tmp_path):
    assert cli.main(["melnikov", "--eps", "0.1", "--method", "both", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "melnikov.csv").read_text().splitlines()[2:]
    assert len(rows) == 2
    im = [float(r.split(",")[3]) for r in rows]
    assert abs(im[0] - im[1]) / abs(im[0]) <= 1e-8


def test_config_file_with_comments_and_override(tmp_path):
    conf = tmp_path / "k.conf"
    conf.write_text("# sweep\neps = 0.2   # defect strength\n\nformat = csv\n")
    out = tmp_path / "o"
    assert cli.main(["params", "--config", str(conf), "--eps", "0.1", "--out", str(out)]) == 0
    row = (out / "params.csv").read_text().splitlines()[2]
    assert row.startswith("0.1,")
    assert json.loads((out / "run.json").read_text())["eps"] == 0.1


@pytest.mark.parametrize("text", ["eps = 0.1\nspeed = 3\n", "eps 0.1\n"])
def test_bad_config_file_is_usage_error(tmp_path, text):
    conf = tmp_path / "k.conf"
    conf.write_text(text)
    assert cli.main(["params", "--config", str(conf), "--out", str(tmp_path)]) == cli.EXIT_USAGE


@pytest.mark.parametrize("args", [
    ["params", "--eps", "0.1", "--precision", "dd"],
    ["params", "--eps-grid", "0.2,0.1"],
    ["params"],
    ["params", "--eps", "0.9"],
    ["params", "--eps", "0.1", "--format", "xml"],
    ["melnikov", "--eps", "0.1", "--method", "filon"],
])
def test_usage_errors(tmp_path, args):
    assert cli.main(args + ["--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_argparse_errors_exit_with_one():
    with pytest.raises(SystemExit) as exc:
        cli.main(["params", "--nonsense"])
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == cli.EXIT_USAGE


def test_integration_failure_exit_code(tmp_path):
    code = cli.main(["simulate", "--eps", "0.1", "--h", "0.01", "--t-end", "10",
                     "--max-time", "1", "--out", str(tmp_path)])
    assert code == cli.EXIT_ACCURACY
    assert not (tmp_path / "trajectory.csv").exists()


def test_bracket_error_exit_code(tmp_path):
    code = cli.main(["critical", "--eps", "0.1", "--coupling-scale", "0", "--which", "hc",
                     "--X-max", "3", "--n-tau", "16", "--out", str(tmp_path)])
    assert code == cli.EXIT_BRACKET


def test_simulate_writes_trajectory(tmp_path):
    assert cli.main(["simulate", "--eps", "0.1", "--h", "1e-3", "--X-max", "8",
                     "--t-end", "20", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[1] == "t,X,Z,b,B,H"
    H = [float(l.split(",")[-1]) for l in lines[2:]]
    assert max(abs(h - 1e-3) for h in H) < 1e-12
    assert (tmp_path / "plot_trajectory.py").exists()


def test_curves_command(tmp_path, capsys):
    assert cli.main(["curves", "--eps", "0.1", "--h", "2.6e-4", "--X-max", "8",
                     "--n-tau", "16", "--out", str(tmp_path)]) == 0
    for name in ("curve_stable.csv", "curve_unstable.csv", "points.csv", "plot_curves.py"):
        assert (tmp_path / name).exists()
    assert (tmp_path / "curve_stable.csv").read_text().splitlines()[1] == "tau,b,B"
    assert (tmp_path / "points.csv").read_text().splitlines()[1] == "h,side,b,B"
    assert "inside=" in capsys.readouterr().out


def test_curves_rejects_kappa1_above_h(tmp_path):
    assert cli.main(["curves", "--eps", "0.1", "--h", "1e-4", "--kappa1", "2e-4",
                     "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_splitting_command(tmp_path):
    assert cli.main(["splitting", "--eps", "0.1", "--X-max", "10", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "splitting.csv").read_text().splitlines()
    assert lines[1] == "eps,d_meas,d_pred,ratio,melnikov_abs"
    ratio = float(lines[2].split(",")[3])
    assert abs(ratio - 1) <= 0.3


def test_vout_command(tmp_path):
    assert cli.main(["vout", "--eps", "0.1", "--points", "12", "--X-max", "10",
                     "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "vout.csv").read_text().splitlines()[2:]
    assert len(rows) == 12
    vf = [float(r.split(",")[6]) for r in rows]
    assert all(b > a for a, b in zip(vf, vf[1:]))
