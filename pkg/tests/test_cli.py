import json
import subprocess
import sys

import pytest

from flexline import instance as im
from flexline.cli import run
from flexline.env import check_constraints, schedule_from_json


@pytest.fixture
def work(tmp_path, tiny, monkeypatch):
    im.write(tiny, tmp_path / "tiny1.json")
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_pdr(work, tiny, capsys):
    assert run(["pdr", "--rule", "SCT", "--instance", "tiny1.json", "--out", "s.json"]) == 0
    sched = schedule_from_json((work / "s.json").read_text(), tiny)
    assert check_constraints(tiny, sched).ok
    assert "dcl=1.000" in capsys.readouterr().out


def test_solve_exact(work, capsys):
    assert run(["solve-exact", "--instance", "tiny1.json", "--out", "opt.json"]) == 0
    assert capsys.readouterr().out.strip() == "obj1=4.000 obj2=0.000"
    assert len(json.loads((work / "opt.json").read_text())) == 3


def test_gen_then_validate(work):
    assert run(["gen", "--jobs", "61", "--lines", "4", "--days", "7", "--seed", "7", "--out", "inst01.json"]) == 0
    assert run(["validate", "inst01.json"]) == 0
    inst = im.read(work / "inst01.json")
    assert (inst.num_jobs, inst.num_lines, inst.horizon_days) == (61, 4, 7)


def test_gen_spec_file_with_override(work):
    (work / "spec.json").write_text(json.dumps({"num_jobs": 5, "num_lines": 2, "horizon_days": 3,
                                                "lot_range": [10, 20]}))
    assert run(["gen", "--spec", "spec.json", "--jobs", "7", "--seed", "1", "--out", "g.json"]) == 0
    inst = im.read(work / "g.json")
    assert inst.num_jobs == 7 and max(j.demand_lot for j in inst.jobs) <= 20


def test_validate_reports_violations(work, tiny, capsys):
    d = im.to_dict(tiny)
    d["jobs"][2]["demand_day"] = 5
    (work / "bad.json").write_text(json.dumps(d))
    assert run(["validate", "bad.json"]) == 1
    assert "demand_day" in capsys.readouterr().out


def test_usage_errors(work, capsys):
    assert run(["frobnicate"]) == 2
    assert run(["pdr", "--rule", "SCT"]) == 2
    assert run(["gen", "--jobs", "3", "--lines", "2", "--days", "2", "--out", "x.json"]) == 2  # no seed
    assert run(["pdr", "--instance", "tiny1.json", "--out", "s.json", "--rule", "SCT", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_domain_errors(work, capsys):
    assert run(["pdr", "--rule", "FIFO", "--instance", "tiny1.json", "--out", "s.json"]) == 1
    assert run(["pdr", "--rule", "SCT", "--instance", "missing.json", "--out", "s.json"]) == 1
    assert run(["gen", "--jobs", "3", "--lines", "2", "--days", "2", "--flexibility", "3", "3",
                "--seed", "1", "--out", "x.json"]) == 1
    assert run(["export-lp", "--instance", "tiny1.json", "--objective", "lex2", "--out", "x.lp"]) == 1
    assert "error:" in capsys.readouterr().err


def test_train_dispatch_shield_gantt(work, tiny):
    assert run(["train", "--instance", "tiny1.json", "--episodes", "20", "--seed", "3",
                "--out", "ck.json", "--log", "log.csv"]) == 0
    assert (work / "log.csv").read_text().count("\n") == 21
    assert run(["dispatch", "--checkpoint", "ck.json", "--instance", "tiny1.json", "--out", "d.json"]) == 0
    assert run(["shield", "--checkpoint", "ck.json", "--instance", "tiny1.json", "--k", "40", "--seed", "2",
                "--trace", "tr.csv", "--out", "sh.json"]) == 0
    assert (work / "tr.csv").read_text().startswith("step,action,n,sum_u,v_next,prior,G,chosen\n")
    assert run(["gantt", "--schedule", "sh.json", "--instance", "tiny1.json", "--out", "g.svg"]) == 0
    assert (work / "g.svg").read_text().startswith("<svg")


def test_train_config_file(work):
    (work / "train.json").write_text(json.dumps({"instance": "tiny1.json", "episodes": 4, "lam": 0.5}))
    assert run(["train", "--config", "train.json", "--episodes", "2", "--seed", "1", "--out", "ck.json",
                "--log", "l.csv"]) == 0
    assert (work / "l.csv").read_text().count("\n") == 3
    (work / "bad.json").write_text(json.dumps({"instance": "tiny1.json", "gamma": 1}))
    assert run(["train", "--config", "bad.json", "--seed", "1", "--out", "ck.json"]) == 1


def test_export_lp_modes(work):
    assert run(["export-lp", "--instance", "tiny1.json", "--out", "w.lp"]) == 0
    assert run(["export-lp", "--instance", "tiny1.json", "--objective", "lex1", "--out", "s1.lp"]) == 0
    assert run(["export-lp", "--instance", "tiny1.json", "--objective", "lex2", "--obj1-bound", "4",
                "--out", "s2.lp"]) == 0
    assert "obj1_bound" in (work / "s2.lp").read_text()


def test_bench(work):
    (work / "suite.json").write_text(json.dumps({"instances": ["tiny1.json"], "methods": ["SCT", "EDD"]}))
    assert run(["bench", "--suite", "suite.json", "--seed", "0", "--out-dir", "out", "--gantt"]) == 0
    assert sorted(p.name for p in (work / "out").iterdir()) == [
        "reports.csv", "reports.json", "reports.txt", "tiny1__EDD.svg", "tiny1__SCT.svg"]


def test_console_entry_point(work):
    r = subprocess.run([sys.executable, "-m", "flexline", "solve-exact", "--instance", "tiny1.json"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "obj1=4.000 obj2=0.000"
    r = subprocess.run([sys.executable, "-m", "flexline", "nope"], capture_output=True, text=True)
    assert r.returncode == 2 and r.stdout == "" and "usage" in r.stderr
