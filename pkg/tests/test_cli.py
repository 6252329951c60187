import csv
import json

import pytest

from tpossp.cli import EXIT_INVALID, EXIT_OK, EXIT_USAGE, run
from tpossp.generate import micro3
from tpossp.model import compute_metrics, add_dummy_schedules, read_instance, read_solution, validate_solution, \
    write_instance


@pytest.fixture
def m3file(tmp_path):
    p = tmp_path / "m3.json"
    p.write_bytes(write_instance(micro3()))
    return p


def _solve(m3file, out, *extra):
    assert run(["solve", str(m3file), "--out", str(out), *extra]) == EXIT_OK
    return out


def test_generate(tmp_path):
    out = tmp_path / "g.json"
    assert run(["generate", "--hubs", "6", "--schedules", "4", "--requests", "2", "--seed", "3",
                "--out", str(out)]) == EXIT_OK
    assert len(read_instance(out.read_bytes()).requests) == 2


def test_solve_cg(m3file, tmp_path):
    out = _solve(m3file, tmp_path / "o")
    inst = add_dummy_schedules(micro3())
    sol = read_solution(inst, (out / "solution.json").read_bytes())
    assert sol.objective == 130_000 and validate_solution(inst, sol) == []
    rep = json.loads((out / "report.json").read_text())
    assert rep["lp_objective"] == pytest.approx(130_000) and "timings" not in rep
    assert rep["schema_version"] == 1 and rep["metrics"]["objective"] == 130_000


def test_solve_deterministic(m3file, tmp_path):
    a = _solve(m3file, tmp_path / "a")
    b = _solve(m3file, tmp_path / "b")
    for name in ("solution.json", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_timings_opt_in(m3file, tmp_path):
    out = _solve(m3file, tmp_path / "t", "--timings")
    assert "timings" in json.loads((out / "report.json").read_text())


def test_solve_exact_and_bound(m3file, tmp_path):
    out = _solve(m3file, tmp_path / "e", "--engine", "exact")
    assert json.loads((out / "report.json").read_text())["integer_objective"] == 130_000
    assert run(["bound", str(m3file), "--out", str(tmp_path / "b")]) == EXIT_OK
    trace = json.loads((tmp_path / "b" / "bound_trace.json").read_text())
    assert trace["best_bound"] <= 130_000 and trace["trace"][0]["iteration"] == 0


def test_csv(m3file, tmp_path):
    out = _solve(m3file, tmp_path / "c", "--format", "csv")
    rows = list(csv.reader((out / "report.csv").read_text().splitlines()))
    assert rows[0] == ["schema_version", "section", "key", "value"]
    assert ["1", "cost", "objective", "130000"] in rows


def test_reduce(m3file, tmp_path):
    assert run(["reduce", str(m3file), "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "reduce.json").read_text())
    assert doc["subnetworks"][0]["legs"] == [0, 1, 2, 3]


def test_insert(m3file, tmp_path):
    base = _solve(m3file, tmp_path / "base")
    new = tmp_path / "new.json"
    new.write_text(json.dumps([{"origin": 0, "dest": 2, "earliest": 0, "latest": 250, "volume": 10}]))
    out = tmp_path / "ins"
    assert run(["insert", str(m3file), "--base", str(base / "solution.json"), "--new", str(new),
                "--out", str(out)]) == EXIT_OK
    inst = read_instance((out / "instance.json").read_bytes())
    sol = read_solution(inst, (out / "solution.json").read_bytes())
    assert len(inst.requests) == 2 and validate_solution(inst, sol) == []
    assert json.loads((out / "report.json").read_text())["marginal_cost"] == 90_000


def test_validate_and_report(m3file, tmp_path, capsys):
    out = _solve(m3file, tmp_path / "v")
    assert run(["validate", str(m3file), str(out / "solution.json")]) == EXIT_OK
    assert run(["solve", str(m3file), "--engine", "bound", "--out", str(out)]) == EXIT_OK
    assert run(["report", str(m3file), str(out / "solution.json"), "--cg-report", str(out / "report.json"),
                "--bound-trace", str(out / "bound_trace.json"), "--out", str(tmp_path / "r")]) == EXIT_OK
    rep = json.loads((tmp_path / "r" / "report.json").read_text())
    inst = add_dummy_schedules(micro3())
    sol = read_solution(inst, (out / "solution.json").read_bytes())
    assert rep["metrics"] == compute_metrics(inst, sol).as_dict()
    assert rep["gap_vs_lp_bound"] == pytest.approx(0, abs=1e-9)


def test_validate_rejects(m3file, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"paths": [[1]]}))
    assert run(["validate", str(m3file), str(bad)]) != EXIT_OK
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert run(["validate", str(junk)]) == EXIT_INVALID
    assert run(["solve", str(junk)]) == EXIT_INVALID


@pytest.mark.parametrize("argv", [[], ["solve"], ["solve", "x.json", "--paths", "many"], ["frobnicate"],
                                  ["solve", "x.json", "--engine", "magic"]])
def test_usage_errors(argv):
    assert run(argv) == EXIT_USAGE
