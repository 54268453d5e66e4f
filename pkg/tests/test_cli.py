import csv
import json
import subprocess
import sys

import pytest

from pursuitlab.cli import EXIT_RUNTIME, EXIT_USAGE, build_parser, main
from pursuitlab.problems import RngStream, build_instance, load_instance, save_instance


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.bin"
    save_instance(build_instance(40, 100, 6, "gaussian", 0.0, RngStream(42, 1)), path)
    return path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


SWEEP = ["--m", "30", "--n", "60", "--signal", "cars", "--algos", "sp,stp:mu=2",
         "--smin", "2", "--smax", "8", "--step", "3", "--trials", "4", "--seed", "42", "--workers", "1"]


def test_theory_boundary(capsys):
    code, out, err = run(capsys, "theory", "--mu", "1", "--delta", "0.5340")
    assert code == 0
    doc = json.loads(out)
    assert doc["rho"] == pytest.approx(1.0, abs=2e-3)
    assert doc["delta_max"] == pytest.approx(0.5340, abs=5e-4)
    assert set(doc) == {"mu", "delta3s", "rho", "tau", "mu_range", "delta_max"}
    assert err.startswith("plan ")


def test_theory_admissible_point(capsys, tmp_path):
    grid = tmp_path / "grid.csv"
    code, out, _ = run(capsys, "theory", "--mu", "1", "--delta", "0.3", "--grid-out", str(grid),
                       "--grid", "0.5:1.5:0.5")
    doc = json.loads(out)
    assert code == 0 and doc["tau"] > 0 and doc["mu_range"][1][1] == pytest.approx(1.8432, abs=1e-4)
    rows = list(csv.DictReader(grid.open()))
    assert [float(r["mu"]) for r in rows] == [0.5, 1.0, 1.5]


def test_theory_bad_delta(capsys):
    code, _, err = run(capsys, "theory", "--mu", "1", "--delta", "1.2")
    assert code == EXIT_USAGE and "--delta" in err


def test_rate_smax_too_large(capsys):
    argv = [a if a != "8" else "30" for a in SWEEP]
    code, _, err = run(capsys, "rate", *argv)
    assert code == EXIT_USAGE and "--smax" in err and "--m" in err


def test_rate_requires_seed(capsys):
    i = SWEEP.index("--seed")
    code, _, err = run(capsys, "rate", *(SWEEP[:i] + SWEEP[i + 2:]))
    assert code == EXIT_USAGE and "--seed" in err


def test_unknown_flag_rejected(capsys):
    code, _, _ = run(capsys, "theory", "--mu", "1", "--delta", "0.3", "--bogus", "1")
    assert code == EXIT_USAGE


def test_bad_algorithm_is_usage_error(capsys):
    argv = list(SWEEP)
    argv[argv.index("sp,stp:mu=2")] = "sp,warp"
    code, _, err = run(capsys, "rate", *argv)
    assert code == EXIT_USAGE and "warp" in err


def test_rate_outputs_are_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "rate", *SWEEP, "--out", str(a))[0] == 0
    code, _, err = run(capsys, "rate", *SWEEP, "--out", str(b))
    assert code == 0
    strip = lambda p: [r[:-1] for r in csv.reader(p.open())]  # drop wall time
    assert strip(a) == strip(b)
    plan = json.loads(err.splitlines()[0][len("plan "):])
    assert plan["master_seed"] == 42 and plan["sweep"] == [2, 5, 8]


def test_critical_prints_reports(capsys, tmp_path):
    out_json = tmp_path / "r.json"
    code, out, _ = run(capsys, "critical", *SWEEP, "--out", str(out_json))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("sp\tcritical_s=") and lines[1].startswith("stp:mu=2\tcritical_s=")
    doc = json.loads(out_json.read_text())
    assert len(doc["reports"]) == 2 and doc["plan"]["trials"] == 4


def test_plan_file(capsys, tmp_path):
    plan = {"m": 30, "n": 60, "signal_kind": "gaussian", "sweep": [2, 4], "trials": 2,
            "algorithms": ["sp", "htp"], "master_seed": 5}
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan))
    code, out, _ = run(capsys, "critical", "--plan", str(path), "--workers", "1")
    assert code == 0 and "htp" in out
    del plan["master_seed"]
    path.write_text(json.dumps(plan))
    assert run(capsys, "critical", "--plan", str(path))[0] == EXIT_USAGE


def test_recover(capsys, tmp_path, instance_file):
    trace = tmp_path / "t.jsonl"
    code, out, err = run(capsys, "recover", "--instance", str(instance_file), "--algo", "stp",
                         "--mu", "2.5", "--s", "6", "--trace", str(trace))
    doc = json.loads(out)
    assert code == 0 and doc["algorithm"] == "stp:mu=2.5"
    assert doc["relative_error"] < 1e-10 and doc["iterations"] >= 1
    assert len(trace.read_text().splitlines()) == doc["iterations"]
    assert '"seed": 42' in err


def test_recover_runtime_failure(capsys, tmp_path):
    code, _, err = run(capsys, "recover", "--instance", str(tmp_path / "missing.bin"), "--algo", "sp")
    assert code == EXIT_RUNTIME and "missing.bin" in err


def test_ric(capsys, instance_file):
    code, out, _ = run(capsys, "ric", "--instance", str(instance_file), "--order", "2", "--exhaustive")
    doc = json.loads(out)
    assert code == 0 and doc["order"] == 2 and doc["method"] == "exhaustive"
    assert doc["supports_examined"] == 4950 and 0 < doc["delta"] < 2
    code, _, err = run(capsys, "ric", "--instance", str(instance_file), "--order", "6")
    assert code == EXIT_USAGE and "sampled" in err


def test_generate_round_trip(capsys, tmp_path):
    path = tmp_path / "g.bin"
    code, out, _ = run(capsys, "generate", "--m", "20", "--n", "50", "--s", "3", "--seed", "9",
                       "--stream", "4", "--out", str(path))
    assert code == 0
    want = build_instance(20, 50, 3, "gaussian", 0.0, RngStream(9, 4))
    assert load_instance(path).digest() == want.digest()
    assert want.digest()[:16] in out


def test_help_lists_every_flag(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    sub = next(a for a in build_parser()._actions if a.dest == "command")
    for name, parser in sub.choices.items():
        assert name in out
        for action in parser._actions:
            for flag in action.option_strings:
                assert flag in out, (name, flag)


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "pursuitlab", "theory", "--mu", "1", "--delta", "0.2"],
                         capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0 and json.loads(res.stdout)["rho"] < 1
    res = subprocess.run([sys.executable, "-m", "pursuitlab", "rate", "--m", "10"],
                         capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == EXIT_USAGE
