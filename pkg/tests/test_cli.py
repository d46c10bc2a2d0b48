import csv
import io
import json
import subprocess
import sys

import pytest

from exchgmech.cli import main
from exchgmech.core import parse_instance
from exchgmech.figures import FIG1, FIG2


@pytest.fixture
def fig_files(tmp_path):
    paths = {}
    for name, inst in (("fig1", FIG1), ("fig2", FIG2)):
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(inst.to_dict()))
        paths[name] = str(path)
    return paths


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


@pytest.mark.parametrize("figure", ["fig1", "fig2"])
def test_replay(capsys, figure):
    code, report = run_json(capsys, ["replay", "--figure", figure, "--format", "json"])
    assert code == 0 and report["ok"]
    assert all(c["ok"] for c in report["checks"])


def test_replay_table(capsys):
    assert main(["replay", "--figure", "fig2"]) == 0
    out = capsys.readouterr().out
    assert "not truthful" in out and "all numbers reproduced" in out


def test_replay_unknown_figure():
    with pytest.raises(SystemExit) as exc:
        main(["replay", "--figure", "fig3"])
    assert exc.value.code == 2


def test_run_central_opt(capsys, fig_files):
    code, report = run_json(capsys, ["run", "--mechanism", "central-opt", "--instance", fig_files["fig1"], "--format", "json"])
    assert code == 0
    assert report["facility"] == 8.0 and report["welfare"] == 35.0
    assert report["post_ttc_trades"] == []


def test_run_random_endpoints(capsys, fig_files):
    code, report = run_json(
        capsys, ["run", "--mechanism", "random-endpoints", "--instance", fig_files["fig1"], "--format", "json"]
    )
    assert code == 0
    assert report["expected_pre_exchange_welfare"] == 20.0
    assert [p["probability"] for p in report["support"]] == [0.5, 0.5]
    assert report["expected_post_ttc_welfare"] >= 20.0


def test_run_opt_ttc(capsys, fig_files):
    code, report = run_json(capsys, ["run", "--mechanism", "opt-ttc", "--instance", fig_files["fig2"], "--format", "json"])
    assert code == 0
    assert report["facility"] == 0.0 and report["trades"] == []
    assert report["utilities"][3] == 6.5


def test_run_facility_override(capsys, fig_files):
    code, report = run_json(
        capsys, ["run", "--mechanism", "naive-opt", "--instance", fig_files["fig2"], "--facility", "8", "--format", "json"]
    )
    assert code == 0 and report["utilities"][3] == 7.0
    assert main(["run", "--mechanism", "naive-opt", "--instance", fig_files["fig2"], "--facility", "9"]) == 2


def test_run_table(capsys, fig_files):
    assert main(["run", "--mechanism", "random-endpoints", "--instance", fig_files["fig1"]]) == 0
    assert "expected pre-exchange welfare: 20" in capsys.readouterr().out


def test_run_error_codes(tmp_path, capsys):
    assert main(["run", "--mechanism", "opt-ttc", "--instance", str(tmp_path / "missing.json")]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["run", "--mechanism", "opt-ttc", "--instance", str(bad)]) == 4
    bad.write_text('{"d": 8, "agents": [{"x": 10, "type": "L"}]}')
    assert main(["run", "--mechanism", "opt-ttc", "--instance", str(bad)]) == 5
    err = capsys.readouterr().err
    assert "cannot read" in err and "malformed JSON" in err and "invalid instance" in err


def test_generate_round_trip(tmp_path):
    out = tmp_path / "inst.json"
    assert main(["generate", "--n", "5", "--d", "8", "--seed", "42", "--out", str(out)]) == 0
    first = out.read_text()
    inst = parse_instance(first)
    assert inst.n == 5 and inst.d == 8.0
    assert main(["generate", "--n", "5", "--d", "8", "--seed", "42", "--out", str(out)]) == 0
    assert out.read_text() == first


def test_generate_edge_cases(tmp_path):
    out = tmp_path / "one.json"
    assert main(["generate", "--n", "1", "--d", "1.0", "--seed", "3", "--out", str(out)]) == 0
    inst = parse_instance(out.read_text())
    assert inst.n == 1 and 0.0 <= inst.positions[0] <= 1.0
    assert main(["generate", "--n", "0", "--out", str(out)]) == 2
    assert main(["generate", "--n", "2", "--out", str(tmp_path / "no" / "dir.json")]) == 3


def test_audit_truthful_campaign(capsys):
    code, report = run_json(
        capsys,
        ["audit", "--mechanism", "central-opt", "--trials", "200", "--seed", "1", "--format", "json",
         "--workers", "1", "--expect", "truthful"],
    )
    assert code == 0
    assert report["truthful"] and report["max_gain"] == 0.0
    assert report["config"] == {
        "generator": "uniform positions, fair-coin types", "n_min": 1, "n_max": 7, "d": 8.0, "seed": 1, "grid": None,
    }


def test_audit_injected_figure(capsys):
    argv = ["audit", "--mechanism", "opt-ttc", "--trials", "5", "--n-max", "3", "--inject", "fig2",
            "--format", "json", "--workers", "1"]
    code, report = run_json(capsys, argv)
    assert code == 0 and not report["truthful"]
    assert main(argv + ["--expect", "truthful"]) == 1


def test_audit_ratio_formats(tmp_path):
    base = ["audit", "--mechanism", "random-endpoints", "--trials", "40", "--seed", "4", "--ratio", "--workers", "1"]
    paths = {}
    for fmt_ in ("json", "csv", "table"):
        paths[fmt_] = tmp_path / f"r.{fmt_}"
        assert main(base + ["--format", fmt_, "--out", str(paths[fmt_]), "--max-ratio", "2"]) == 0
    report = json.loads(paths["json"].read_text())
    lines = [ln for ln in paths["csv"].read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(lines))))
    assert len(rows) == len(report["rows"]) == 40
    for row, ref in zip(rows, report["rows"]):
        for key in ("opt_welfare", "achieved_welfare", "ratio"):
            assert float(row[key]) == ref[key]
    assert "worst_ratio" in paths["table"].read_text()
    assert main(base + ["--max-ratio", "1.0", "--out", str(tmp_path / "x")]) == 1


def test_audit_usage_errors():
    assert main(["audit", "--mechanism", "central-opt", "--trials", "0"]) == 2
    assert main(["audit", "--mechanism", "central-opt", "--trials", "3", "--n-min", "4", "--n-max", "2"]) == 2


def test_audit_json_deterministic(tmp_path):
    outs = []
    for workers in ("1", "2"):
        out = tmp_path / f"a{workers}.json"
        main(["audit", "--mechanism", "naive-opt", "--trials", "80", "--seed", "5", "--format", "json",
              "--workers", workers, "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "exchgmech", "replay", "--figure", "fig1"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "all numbers reproduced" in proc.stdout
