import csv
import io
import json
from pathlib import Path

import jsonschema
import pytest

from scadsched import cli
from scadsched.machine import reference_eval
from scadsched.model import parse_block

from conftest import EXAMPLE, MOVES_1, SOLUTION_1, SOLUTION_2

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def json_lines(out):
    return [json.loads(line) for line in out.splitlines() if line.strip()]


@pytest.fixture
def sched_file(tmp_path):
    def write(pus, name="s.json"):
        p = tmp_path / name
        p.write_text(json.dumps({"pus": pus}))
        return p
    return write


def test_schemas_are_valid_documents():
    for p in SCHEMAS.glob("*.schema.json"):
        jsonschema.Draft202012Validator.check_schema(json.loads(p.read_text()))


def test_solve_lex_pu_time(capsys, example_file):
    code, out, _ = run(capsys, "solve", example_file, "--objective", "lex-pu-time")
    assert code == 0
    d = json.loads(out)
    jsonschema.validate(d, schema("solve"))
    assert (d["pus"], d["cost"], d["count"], d["canonical"]) == (2, 5, 520, 260)
    for s in d["schedules"]:
        jsonschema.validate(s, schema("schedule"))


def test_solve_count_only(capsys, example_file):
    code, out, _ = run(capsys, "solve", example_file, "--objective", "lex-time-pu", "--count-only")
    d = json.loads(out)
    jsonschema.validate(d, schema("solve-count"))
    assert code == 0
    assert d == {"pus": 4, "cost": 3, "count": 6912, "canonical": 288}


def test_solve_text_format(capsys, example_file):
    code, out, _ = run(capsys, "solve", example_file, "--objective", "min-pus", "--format", "text")
    assert code == 0
    assert out.startswith("pus 2")


def test_solve_infeasible_exit_code(capsys, example_file):
    code, out, _ = run(capsys, "solve", example_file, "--objective", "min-time", "--pus", "1")
    assert code == 1
    d = json.loads(out)
    jsonschema.validate(d, schema("solve"))
    assert d["feasible"] is False


def test_min_time_without_pus_is_usage_error(capsys, example_file):
    code, _, err = run(capsys, "solve", example_file, "--objective", "min-time")
    assert code == 2
    assert "error" in err


def test_count(capsys, example_file):
    code, out, _ = run(capsys, "count", example_file, "--pus", "2", "--time-bound", "5")
    d = json.loads(out)
    jsonschema.validate(d, schema("count"))
    assert code == 0
    assert d == {"total": 520, "canonical": 260}


def test_count_pus_out_of_range(capsys, example_file):
    assert run(capsys, "count", example_file, "--pus", "10")[0] == 2


def test_enumerate_with_cost(capsys, example_file):
    code, out, _ = run(capsys, "enumerate", example_file, "--pus", "4", "--time-bound", "3",
                       "--canonical-only", "--cost")
    assert code == 0
    rows = json_lines(out)
    assert len(rows) == 288
    for r in rows:
        jsonschema.validate(r, schema("enumerate"))
        assert r["cost"] == 3


def test_enumerate_limit(capsys, example_file):
    code, out, _ = run(capsys, "enumerate", example_file, "--pus", "2", "--limit", "3")
    assert code == 0
    assert len(json_lines(out)) == 3


def test_enumerate_nothing_is_infeasible(capsys, example_file):
    code, out, _ = run(capsys, "enumerate", example_file, "--pus", "1")
    assert code == 1
    assert out == ""


def test_codegen_json(capsys, example_file, sched_file):
    code, out, _ = run(capsys, "codegen", example_file, sched_file(SOLUTION_1), "--format", "json")
    assert code == 0
    moves = json.loads(out)
    jsonschema.validate(moves, schema("moves"))
    assert sum(m["kind"] == "Data" for m in moves) == 12
    assert sum(m["kind"] == "LoadAddress" for m in moves) == 3


def test_codegen_text(capsys, example_file, sched_file):
    code, out, _ = run(capsys, "codegen", example_file, sched_file(SOLUTION_1))
    assert code == 0
    assert "x0 -> PU0.L" in out


def test_codegen_invalid_schedule(capsys, example_file, sched_file):
    bad = [["x1", "x0", "x4", "x5", "x6"], ["x2", "x3", "x7", "x8"]]
    code, _, err = run(capsys, "codegen", example_file, sched_file(bad))
    assert code in (1, 2)
    assert err


@pytest.mark.parametrize("pus, rounds", [(SOLUTION_1, 5), (SOLUTION_2, 6)])
def test_simulate(capsys, example_file, sched_file, pus, rounds):
    code, out, _ = run(capsys, "simulate", example_file, sched_file(pus))
    assert code == 0
    d = json.loads(out)
    jsonschema.validate(d, schema("simresult"))
    assert d["status"] == "Completed"
    assert d["rounds"] == rounds
    assert d["correct"] is True
    ref = reference_eval(parse_block(EXAMPLE))
    assert set(d["outputs"]) == {"x5", "x6", "x7", "x8"} == set(parse_block(EXAMPLE).names[v] for v in ref)


def test_simulate_with_move_file(capsys, example_file, sched_file, tmp_path):
    moves = tmp_path / "m.txt"
    moves.write_text(MOVES_1)
    code, out, _ = run(capsys, "simulate", example_file, sched_file(SOLUTION_1), "--moves", moves)
    assert code == 0
    assert json.loads(out)["correct"] is True


def test_simulate_deadlock_exit_code(capsys, example_file, sched_file):
    code, out, _ = run(capsys, "simulate", example_file, sched_file(SOLUTION_1), "--capacity", "1",
                       "--issue-mode", "OnePerCycle")
    d = json.loads(out)
    jsonschema.validate(d, schema("simresult"))
    assert code == 1
    assert d["status"] == "Deadlock"


def test_simulate_trace_goes_to_stderr(capsys, example_file, sched_file):
    code, out, err = run(capsys, "simulate", example_file, sched_file(SOLUTION_1), "--trace")
    assert code == 0
    json.loads(out)
    assert err.strip()


def test_missing_block_is_usage_error(capsys, tmp_path):
    assert run(capsys, "solve", tmp_path / "nope.bb")[0] == 2


def test_malformed_block_is_usage_error(capsys, tmp_path):
    p = tmp_path / "bad.bb"
    p.write_text("operand(x1, x0).\n")
    assert run(capsys, "solve", p)[0] == 2


def test_unknown_command_is_usage_error(capsys):
    assert run(capsys, "frobnicate")[0] == 2


def test_gen_is_seeded(capsys, tmp_path):
    code, first, _ = run(capsys, "gen", "--n", 8, "--levels", 3, "--count", 2, "--seed", 5)
    assert code == 0
    _, again, _ = run(capsys, "gen", "--n", 8, "--levels", 3, "--count", 2, "--seed", 5)
    assert first == again
    code, _, _ = run(capsys, "gen", "--n", 8, "--levels", 3, "--count", 2, "--seed", 5, "--out", tmp_path)
    files = sorted(tmp_path.glob("*.bb"))
    assert code == 0 and len(files) == 2
    bb = parse_block(files[0].read_text())
    assert bb.n_vars == 8


def test_gen_impossible_parameters(capsys):
    assert run(capsys, "gen", "--n", 3, "--levels", 5)[0] == 2


def test_dot(capsys, example_file, sched_file):
    code, out, _ = run(capsys, "dot", example_file)
    assert code == 0
    assert out.startswith("digraph")
    assert out.count("->") == 12
    code, out2, _ = run(capsys, "dot", example_file, "--schedule", sched_file(SOLUTION_1))
    assert code == 0
    assert out2.count("->") > 12


def test_emit_asp(capsys, example_file, tmp_path):
    code, out, _ = run(capsys, "emit-asp", example_file, "--objective", "lex-pu-time", "--symmetry")
    assert code == 0
    assert "#const max_pus=9." in out
    assert "operand(x3,x0,x1)." in out
    target = tmp_path / "p.lp"
    assert run(capsys, "emit-asp", example_file, "-o", target)[0] == 0
    assert target.read_text().startswith("#const")


def test_emit_asp_run_without_clingo(capsys, example_file, monkeypatch):
    monkeypatch.delenv(cli.CLINGO_ENV, raising=False)
    monkeypatch.setattr("shutil.which", lambda name: None)
    assert run(capsys, "emit-asp", example_file, "--run")[0] == 2


def test_verify_listed_block(capsys, example_file, tmp_path):
    small = tmp_path / "small.bb"
    small.write_text("operand(x2, x0, x1).\noperand(x3, x2, x0).\noperand(x4, x2, x3).\n")
    code, out, _ = run(capsys, "verify", small)
    assert code == 0
    rows = json_lines(out)
    for r in rows:
        jsonschema.validate(r, schema("verify"))
    assert rows[0]["status"] == "ok"


def test_verify_refuses_oversized_block(capsys, tmp_path):
    p = tmp_path / "big.bb"
    lines = ["operand(x2, x0, x1)."] + [f"operand(x{i}, x{i - 1}, x{i - 2})." for i in range(3, 16)]
    p.write_text("\n".join(lines) + "\n")
    assert run(capsys, "verify", p)[0] == 2


@pytest.mark.slow
def test_verify_random(capsys):
    code, out, _ = run(capsys, "verify", "--random", 50)
    rows = json_lines(out)
    assert code == 0
    assert len(rows) == 50
    assert all(r["status"] == "ok" for r in rows)


def bench_csv(out):
    return list(csv.DictReader(io.StringIO(out)))


def test_bench_single_block(capsys, example_file):
    code, out, _ = run(capsys, "bench", "--block", example_file, "--objective", "lex-pu-time")
    assert code == 0
    rows = bench_csv(out)
    assert list(rows[0]) == cli.BENCH_FIELDS
    inst = [r for r in rows if r["row"] == "instance"]
    assert len(inst) == 1
    assert (inst[0]["status"], inst[0]["best_pus"], inst[0]["best_cost"]) == ("ok", "2", "5")
    assert inst[0]["count_canonical"] == "260"
    assert float(inst[0]["wall_time"]) >= 0


def test_bench_grid_aggregates(capsys):
    code, out, _ = run(capsys, "bench", "--n", "6..12", "--levels", "4", "--count", 25,
                       "--objective", "lex-pu-time")
    assert code == 0
    rows = bench_csv(out)
    agg = [r for r in rows if r["row"] == "aggregate"]
    assert [int(r["n"]) for r in agg] == list(range(6, 13))
    assert all(r["levels"] == "4" for r in agg)
    assert sum(r["row"] == "instance" for r in rows) == 7 * 25
    for r in agg:
        assert float(r["avg_time"]) <= float(r["max_time"])


def test_bench_is_deterministic_apart_from_timing(capsys, tmp_path):
    argv = ["bench", "--n", "7,9", "--levels", "3", "--count", 4, "--seed", 3]
    timing = {"wall_time", "avg_time", "max_time"}

    def stable(out):
        return [{k: v for k, v in r.items() if k not in timing} for r in bench_csv(out)]

    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv, "--jobs", 2)
    assert stable(a) == stable(b)


def test_bench_writes_file(capsys, example_file, tmp_path):
    target = tmp_path / "b.csv"
    assert run(capsys, "bench", "--block", example_file, "-o", target)[0] == 0
    assert target.read_text().startswith("row,")


def test_bench_empty_corpus(capsys, tmp_path):
    assert run(capsys, "bench", "--corpus", tmp_path)[0] == 2


def test_config_supplies_defaults(capsys, example_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"jobs": 2}))
    code, out, _ = run(capsys, "--config", cfg, "count", example_file, "--pus", "2", "--time-bound", "5")
    assert code == 0
    assert json.loads(out)["total"] == 520


def test_bad_config_is_usage_error(capsys, example_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert run(capsys, "--config", cfg, "count", example_file, "--pus", "2")[0] == 2
