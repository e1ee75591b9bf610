import csv
import io
import json
from pathlib import Path

import pytest

from otscuts.cli import geometric_mean, main
from otscuts.milp import RESULT_SCHEMA

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def fake_result(path, name, opt_time, unsolved=False):
    stats = {"unsolved": unsolved, "sep_time_s": 0.0, "cuts_added": 0, "opt_time_s": opt_time,
             "nodes": 1, "total_time_s": opt_time}
    path.write_text(json.dumps({"schema": RESULT_SCHEMA, "instance": name,
                                "setting": "plain", "stats": stats}))
    return path


def test_solve_writes_result_and_csv(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, stdout, stderr = run(["solve", FIXTURES / "triangle.json", "--setting",
                                "cuts-partition", "--rounds", "5", "--out", out], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(stdout)))
    assert list(rows[0]) == ["Instance", "Setting", "Unsolved", "SepTime", "#Cuts", "OptTime",
                             "#Nodes", "TotalTime"]
    assert rows[0]["Unsolved"] == "0"
    doc = json.loads(out.read_text())
    assert doc["schema"] == RESULT_SCHEMA
    assert doc["incumbent"]["objective"] == pytest.approx(100)
    assert "separation is root-only" in stderr
    assert "gap closed" in stderr


def test_solve_exit_codes(tmp_path, capsys):
    assert run(["solve", tmp_path / "missing.json"], capsys)[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"buses": [], "generators": [], "lines": [{"id": 1}]}')
    code, _, err = run(["solve", bad], capsys)
    assert code == 1 and "lines[0]" in err
    inf = tmp_path / "inf.json"
    inf.write_text(json.dumps({
        "buses": [{"id": 1, "load": "0"}, {"id": 2, "load": "50"}],
        "generators": [{"bus": 1, "pmin": "0", "pmax": "100"}],
        "lines": [{"id": 1, "from": 1, "to": 2, "susceptance": "100", "limit": "10"}]}))
    assert run(["solve", inf, "--out", tmp_path / "i.json"], capsys)[0] == 3
    code = run(["solve", FIXTURES / "net118.json", "--node-limit", "1", "--gap", "0",
                "--out", tmp_path / "n.json"], capsys)[0]
    assert code == 2


def test_report_ga_and_aa(tmp_path, capsys):
    a = fake_result(tmp_path / "a.json", "a", 4.0)
    b = fake_result(tmp_path / "b.json", "b", 9.0)
    code, stdout, _ = run(["report", a, b, "--csv", tmp_path / "t.csv"], capsys)
    assert code == 0
    rows = {r["Instance"]: r for r in csv.DictReader(io.StringIO((tmp_path / "t.csv").read_text()))}
    assert float(rows["GA (all)"]["OptTime"]) == pytest.approx(6.0)
    assert float(rows["AA (all)"]["OptTime"]) == pytest.approx(6.5)
    assert float(rows["GA (solved)"]["OptTime"]) == pytest.approx(6.0)
    assert "max(value, 0.01)" in stdout


def test_report_counts_unsolved(tmp_path, capsys):
    a = fake_result(tmp_path / "a.json", "a", 4.0)
    b = fake_result(tmp_path / "b.json", "b", 100.0, unsolved=True)
    run(["report", a, b, "--csv", tmp_path / "t.csv"], capsys)
    rows = {r["Instance"]: r for r in csv.DictReader(io.StringIO((tmp_path / "t.csv").read_text()))}
    assert rows["GA (all)"]["Unsolved"] == "1"
    assert rows["AA (solved)"]["OptTime"] == "4.000"


def test_report_errors(tmp_path, capsys):
    assert run(["report"], capsys)[0] == 1
    other = tmp_path / "o.json"
    other.write_text('{"schema": "v0"}')
    assert run(["report", other], capsys)[0] == 1


def test_report_round_trips_solve_output(tmp_path, capsys):
    out = tmp_path / "r.json"
    run(["solve", FIXTURES / "radial.json", "--out", out], capsys)
    code, stdout, _ = run(["report", out], capsys)
    assert code == 0 and "radial" in stdout


def test_geometric_mean_floor():
    assert geometric_mean([0.0, 1.0]) == pytest.approx(0.1)


@pytest.mark.parametrize("argv", [
    ["--kind", "random-net", "--buses", "7", "--seed", "5"],
    ["--kind", "uniform-spec", "--n", "3", "--d", "1/2", "--fbar", "2"],
])
def test_gen_is_byte_deterministic(argv, tmp_path, capsys):
    outs = []
    for k in range(2):
        p = tmp_path / f"g{k}.json"
        assert run(["gen", *argv, "--out", p], capsys)[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_gen_subset_sum_then_enumerate(tmp_path, capsys):
    stem = tmp_path / "ss"
    assert run(["gen", "--kind", "subset-sum", "--a", "3,5,7", "--b", "8", "--out", stem],
               capsys)[0] == 0
    obj = json.loads(Path(f"{stem}.objective.json").read_text())
    assert obj["threshold"] == "0" and obj["x"] == ["3", "5", "7"]
    code, stdout, _ = run(["enumerate", f"{stem}.spec.json"], capsys)
    assert code == 0 and stdout.count("x=(") > 0
    assert run(["gen", "--kind", "subset-sum", "--a", "3,0", "--b", "1"], capsys)[0] == 1


def test_hull_and_separate(tmp_path, capsys):
    spec = tmp_path / "u.json"
    run(["gen", "--kind", "uniform-spec", "--n", "3", "--d", "1/2", "--fbar", "2",
         "--out", spec], capsys)
    code, stdout, _ = run(["hull", spec, "--dot", tmp_path / "g.dot", "--lp",
                           tmp_path / "g.lp", "--out", tmp_path / "h.json"], capsys)
    assert code == 0 and "12 nodes" in stdout
    assert (tmp_path / "g.dot").read_text().startswith("digraph")
    assert json.loads((tmp_path / "h.json").read_text())["arcs"] == 26
    code, stdout, _ = run(["separate", spec, "--x", "0.5,0.5,0.5", "--f", "0,1,0.5,-0.5"],
                          capsys)
    assert code == 0 and "violation=0.125" in stdout
    code, stdout, _ = run(["separate", spec, "--x", "0.5,0.5,0.5", "--f", "0,1,0.5,-0.5",
                           "--family", "cglp"], capsys)
    assert code == 0 and stdout.startswith("hull cut")
    assert run(["separate", spec, "--x", "0.5", "--f", "0"], capsys)[0] == 1


def test_verify_exit_status(capsys):
    code, stdout, _ = run(["verify", "--suite", "separation", "--trials", "10"], capsys)
    assert code == 0 and stdout.startswith("PASS separation")
    code, stdout, _ = run(["verify", "--suite", "prop8", "--trials", "3",
                           "--inject-nonuniform"], capsys)
    assert code == 0 and "skipped" in stdout


def test_unknown_setting_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", str(FIXTURES / "triangle.json"), "--setting", "gomory"])
    assert exc.value.code == 1


def test_every_command_writes_a_result(tmp_path, capsys):
    run(["gen", "--kind", "uniform-spec", "--n", "4", "--d", "0.3", "--out", "u.json"], capsys)
    run(["enumerate", "u.json"], capsys)
    run(["hull", "u.json"], capsys)
    run(["separate", "u.json", "--x", "0.5,0.5,0.5,0.5", "--f", "0.3,0,0,0"], capsys)
    run(["verify", "--suite", "lemma7", "--trials", "2"], capsys)
    run(["solve", FIXTURES / "radial.json"], capsys)
    run(["report", "radial.plain.result.json"], capsys)
    for name in ("u.points.json", "u.hull.json", "u.separate.json", "verify.result.json",
                 "radial.plain.result.json", "report.csv"):
        assert (tmp_path / name).exists(), name
    assert json.loads((tmp_path / "u.points.json").read_text())["count"] > 0
