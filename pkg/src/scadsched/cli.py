"""Command line entry point: ``scadsched <command> ...``.

Exit codes: 0 success (feasible), 1 infeasible, 2 usage or input error,
3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import csv
import json
import multiprocessing as mp
import os
import re
import sys
import time
from pathlib import Path

from . import aspgen, blockgen, codegen, machine, model, oracle, solver
from .schedule import Schedule, SolverBounds, schedule_cost, validate

OK, INFEASIBLE, USAGE, BREACH = 0, 1, 2, 3
CLINGO_ENV = "SCADSCHED_CLINGO"


class UsageError(Exception):
    pass


class InvariantBreach(Exception):
    pass


def _load_block(path: str) -> model.BasicBlock:
    try:
        return model.read_block(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    except model.BlockError as e:
        raise UsageError(f"{path}: {e}") from None


def _load_schedule(bb, path: str) -> Schedule:
    try:
        with open(path) as f:
            return Schedule.from_json(bb, f.read())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"{path}: not a schedule ({e})") from None


def _emit(obj, out=None) -> None:
    (out or sys.stdout).write(json.dumps(obj) + "\n")


def _bounds(a) -> SolverBounds:
    try:
        return SolverBounds(a.max_pus, a.time_bound, a.pu_bound)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _objective(a) -> solver.Objective:
    try:
        return solver.Objective(a.objective, a.pus, _bounds(a))
    except solver.InvalidObjective as e:
        raise UsageError(str(e)) from None


# -- commands ---------------------------------------------------------------

def cmd_solve(a) -> int:
    bb = _load_block(a.block)
    if a.count_only:
        collect = "none"
    elif a.all:
        collect = "all"
    elif a.canonical_only:
        collect = "canonical"
    else:
        collect = "first"
    try:
        res = solver.solve(bb, _objective(a), collect=collect, acyclic=a.acyclic, jobs=a.jobs,
                           method=a.method)
    except solver.InvalidObjective as e:
        raise UsageError(str(e)) from None
    if a.count_only:
        d = {"pus": res.best_pus, "cost": res.best_cost, "count": res.count_total,
             "canonical": res.count_canonical}
    else:
        d = res.to_dict(bb)
    if a.format == "json":
        _emit(d)
    else:
        if not res.feasible:
            print("infeasible")
        else:
            print(f"pus {res.best_pus}  cost {res.best_cost}  count {res.count_total}"
                  f"  canonical {res.count_canonical}")
            for s in res.schedules or ():
                print(s.format(bb))
                print()
    return OK if res.feasible else INFEASIBLE


def cmd_count(a) -> int:
    bb = _load_block(a.block)
    if not 1 <= a.pus <= bb.n_vars:
        raise UsageError(f"--pus must be in 1..{bb.n_vars}")
    total, canon = solver.count_valid(bb, a.pus, acyclic=a.acyclic, time_bound=a.time_bound, jobs=a.jobs)
    _emit({"total": total, "canonical": canon})
    return OK if total else INFEASIBLE


def cmd_enumerate(a) -> int:
    bb = _load_block(a.block)
    if not 1 <= a.pus <= bb.n_vars:
        raise UsageError(f"--pus must be in 1..{bb.n_vars}")
    found = solver.enumerate_valid(bb, a.pus, a.canonical_only, acyclic=a.acyclic, time_bound=a.time_bound)
    for i, s in enumerate(found):
        if a.limit is not None and i >= a.limit:
            break
        entry = {"pus": s.to_names(bb)}
        if a.cost:
            c = schedule_cost(bb, s)
            entry["cost"] = c if isinstance(c, int) else None
        _emit(entry)
    return OK if found else INFEASIBLE


def cmd_emit_asp(a) -> int:
    bb = _load_block(a.block)
    prog = aspgen.emit_program(bb, _objective(a), symmetry=a.symmetry)
    if a.run:
        exe = a.clingo or os.environ.get(CLINGO_ENV) or a.config.get("clingo")
        exe = aspgen.find_clingo(exe)
        if exe is None:
            raise UsageError(f"no clingo executable (use --clingo or ${CLINGO_ENV})")
        res = aspgen.run_clingo(prog, exe, timeout=a.timeout)
        _emit({"models": len(res.models), "optimization": res.optimum, "optimal": res.optimal})
        return OK if res.models else INFEASIBLE
    if a.output:
        prog.write(a.output)
    else:
        sys.stdout.write(prog.text())
    return OK


def cmd_codegen(a) -> int:
    bb = _load_block(a.block)
    s = _load_schedule(bb, a.schedule)
    try:
        p = codegen.move_program(bb, s, stores=a.stores)
    except codegen.InvalidSchedule as e:
        print(f"error: {e}", file=sys.stderr)
        return INFEASIBLE
    except codegen.CyclicPrecedence as e:
        print(f"error: {e}", file=sys.stderr)
        return INFEASIBLE
    if a.format == "json":
        sys.stdout.write(p.to_json(bb) + "\n")
    else:
        sys.stdout.write(p.format(bb))
    return OK


def cmd_simulate(a) -> int:
    bb = _load_block(a.block)
    s = _load_schedule(bb, a.schedule)
    if a.moves:
        try:
            text = Path(a.moves).read_text()
            p = codegen.parse_moves(bb, text, s)
        except OSError as e:
            raise UsageError(f"cannot read {a.moves}: {e.strerror}") from None
        except (ValueError, KeyError) as e:
            raise UsageError(str(e)) from None
    else:
        try:
            p = codegen.move_program(bb, s)
        except (codegen.InvalidSchedule, codegen.CyclicPrecedence) as e:
            print(f"error: {e}", file=sys.stderr)
            return INFEASIBLE
    cin = a.in_capacity if a.in_capacity is not None else a.capacity
    cout = a.out_capacity if a.out_capacity is not None else a.capacity
    try:
        cfg = machine.MachineConfig(a.pu_count or s.pu_count, cin, cout, a.issue_mode, a.trace)
        res = machine.simulate(bb, p, cfg)
    except (ValueError, machine.MalformedProgram) as e:
        raise UsageError(str(e)) from None
    if a.trace:
        for line in res.trace:
            print(line, file=sys.stderr)
    d = res.to_dict(bb)
    if res.completed:
        d["correct"] = res.outputs == machine.reference_eval(bb)
    _emit(d)
    return OK if res.completed else INFEASIBLE


def cmd_gen(a) -> int:
    try:
        blocks = blockgen.corpus(a.n, a.levels, a.count, a.seed)
    except blockgen.InfeasibleParams as e:
        raise UsageError(str(e)) from None
    if a.out:
        os.makedirs(a.out, exist_ok=True)
    for name, bb in blocks:
        text = aspgen.emit_facts(bb)
        if a.out:
            Path(a.out, name + ".bb").write_text(text)
        else:
            sys.stdout.write(f"% {name}\n{text}")
    return OK


def cmd_dot(a) -> int:
    bb = _load_block(a.block)
    s = _load_schedule(bb, a.schedule) if a.schedule else None
    sys.stdout.write(model.to_dot(bb, s))
    return OK


def _verify_block(bb, max_k: int) -> list[str]:
    """Mismatches between solver, oracle and the simulator on one block."""
    problems = []
    for k in range(1, min(max_k, bb.n_vars) + 1):
        want = set(oracle.brute_force_schedules(bb, k))
        got = solver.enumerate_valid(bb, k)
        if len(got) != len(set(got)):
            problems.append(f"k={k}: solver emitted duplicates")
        if set(got) != want:
            problems.append(f"k={k}: solver {len(set(got))} schedules, oracle {len(want)}")
        for s in want:
            if not validate(bb, s, acyclic=False).valid:
                problems.append(f"k={k}: oracle schedule rejected by validate: {s.to_names(bb)}")
                break
        for s in sorted(want, key=lambda s: s.sequences):
            if not validate(bb, s).valid:
                continue
            try:
                p = codegen.move_program(bb, s)
            except codegen.CyclicPrecedence:
                continue  # acyclic but not registrable; reported by the acceptance suite
            res = machine.simulate(bb, p, machine.MachineConfig(k))
            if not res.completed or res.outputs != machine.reference_eval(bb):
                problems.append(f"k={k}: simulation failed for {s.to_names(bb)}")
                break
            if res.rounds != schedule_cost(bb, s):
                problems.append(f"k={k}: rounds {res.rounds} != cost for {s.to_names(bb)}")
                break
    return problems


def cmd_verify(a) -> int:
    if a.blocks:
        blocks = [(p, _load_block(p)) for p in a.blocks]
    else:
        blocks = []
        for i in range(a.random):
            n = 3 + i % (a.max_n - 2)
            levels = 2 + i % 2
            blocks.append(blockgen.corpus(n, min(levels, n), 1, a.seed + i)[0])
    failed = 0
    for name, bb in blocks:
        try:
            problems = _verify_block(bb, a.max_pus)
        except oracle.TooLarge as e:
            raise UsageError(f"{name}: {e}") from None
        status = "ok" if not problems else "FAIL"
        failed += bool(problems)
        _emit({"block": name, "status": status, "problems": problems})
    return OK if not failed else BREACH


# -- bench ------------------------------------------------------------------

BENCH_FIELDS = ["row", "n", "levels", "instance", "objective", "status", "wall_time",
                "avg_time", "max_time", "best_pus", "best_cost", "count_canonical"]


def _bench_child(conn, facts, objective, bounds):
    bb = model.BasicBlock.from_facts(facts)
    t0 = time.perf_counter()
    res = solver.solve(bb, solver.Objective(objective, bounds=bounds))
    dt = time.perf_counter() - t0
    conn.send((dt, res.feasible, res.best_pus, res.best_cost, res.count_canonical))
    conn.close()


def _bench_one(facts, objective, bounds, timeout):
    ctx = mp.get_context("fork" if "fork" in mp.get_all_start_methods() else "spawn")
    recv, send = ctx.Pipe(duplex=False)
    proc = ctx.Process(target=_bench_child, args=(send, facts, objective, bounds), daemon=True)
    proc.start()
    send.close()
    ready = recv.poll(timeout)
    if not ready:
        proc.kill()
        proc.join()
        return None
    try:
        out = recv.recv()
    except EOFError:
        out = "error"
    proc.join()
    return out


def bench_rows(instances, objective: str, bounds: SolverBounds, timeout: float, jobs: int = 1):
    """Per-instance rows followed by one avg/max aggregate row per (n, levels) cell."""
    from concurrent.futures import ThreadPoolExecutor

    def run(item):
        _, bb = item
        return _bench_one(bb.facts, objective, bounds, timeout)

    # load the compiled counter once so forked children do not pay for it
    from .layered import LayerCounter

    LayerCounter(model.parse_block("operand(c,a,b)."), 1).count(2)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
        results = list(ex.map(run, instances))
    rows = []
    cells: dict = {}
    for (name, bb), out in zip(instances, results):
        n, levels = bb.n_vars, _levels(name, bb)
        row = {"row": "instance", "n": n, "levels": levels, "instance": name, "objective": objective}
        if out is None:
            row.update(status="timeout", wall_time=f"{timeout:.3f}")
            t = timeout
        elif out == "error":
            row.update(status="error", wall_time="")
            t = None
        else:
            dt, feasible, pus, cost, canon = out
            row.update(status="ok" if feasible else "infeasible", wall_time=f"{dt:.6f}",
                       best_pus=pus, best_cost=cost, count_canonical=canon)
            t = dt
        rows.append(row)
        cell = cells.setdefault((n, levels), {"times": [], "timeouts": 0})
        if t is not None:
            cell["times"].append(t)
        cell["timeouts"] += row["status"] == "timeout"
    for (n, levels), cell in sorted(cells.items()):
        times = cell["times"] or [0.0]
        rows.append({
            "row": "aggregate", "n": n, "levels": levels, "instance": f"{len(cell['times'])} runs",
            "objective": objective, "status": "timeout" if cell["timeouts"] else "ok",
            "avg_time": f"{sum(times) / len(times):.6f}", "max_time": f"{max(times):.6f}",
        })
    return rows


def _levels(name: str, bb) -> int:
    # generated names carry the requested level count; otherwise use the depth
    m = re.search(r"_l(\d+)_", name)
    return int(m.group(1)) if m else model.depth(bb)


def _parse_grid(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def cmd_bench(a) -> int:
    instances = []
    if a.corpus:
        paths = sorted(Path(a.corpus).glob("*.bb"))
        if not paths:
            raise UsageError(f"no .bb files in {a.corpus}")
        instances = [(p.stem, _load_block(str(p))) for p in paths]
    elif a.block:
        instances = [(Path(a.block).stem, _load_block(a.block))]
    else:
        try:
            for n in _parse_grid(a.n):
                for levels in _parse_grid(a.levels):
                    instances.extend(blockgen.corpus(n, levels, a.count, a.seed))
        except (ValueError, blockgen.InfeasibleParams) as e:
            raise UsageError(str(e)) from None
    rows = bench_rows(instances, a.objective, _bounds(a), a.timeout, a.jobs)
    out = open(a.output, "w", newline="") if a.output else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=BENCH_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if a.output:
            out.close()
    return OK


# -- argument parsing -------------------------------------------------------

def _objective_flags(p, default="min-pus"):
    p.add_argument("--objective", choices=solver.VARIANTS, default=default)
    p.add_argument("--pus", type=int, help="PU count for min-time")
    p.add_argument("--max-pus", type=int)
    p.add_argument("--time-bound", type=int)
    p.add_argument("--pu-bound", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scadsched", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON file with defaults (jobs, timeout, clingo)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="optimal schedules for an objective")
    p.add_argument("block")
    _objective_flags(p)
    p.add_argument("--all", action="store_true", help="list every optimal schedule")
    p.add_argument("--canonical-only", action="store_true", help="list one schedule per PU permutation")
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--acyclic", action="store_true", help="min-pus: also reject cyclic combined graphs")
    p.add_argument("--method", choices=solver.METHODS, default="auto",
                   help="counting engine for time-bounded objectives")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_solve)

    for name, func in (("count", cmd_count), ("enumerate", cmd_enumerate)):
        p = sub.add_parser(name, help=f"{name} valid schedules on exactly --pus PUs")
        p.add_argument("block")
        p.add_argument("--pus", type=int, required=True)
        p.add_argument("--acyclic", action="store_true")
        p.add_argument("--time-bound", type=int)
        if name == "count":
            p.add_argument("--jobs", type=int)
        else:
            p.add_argument("--canonical-only", action="store_true")
            p.add_argument("--limit", type=int)
            p.add_argument("--cost", action="store_true", help="add each schedule's cost")
        p.set_defaults(func=func)

    p = sub.add_parser("emit-asp", help="write the ASP encoding")
    p.add_argument("block")
    _objective_flags(p)
    p.add_argument("--symmetry", action="store_true", help="add PU symmetry breaking")
    p.add_argument("-o", "--output")
    p.add_argument("--run", action="store_true", help=f"solve with clingo (--clingo or ${CLINGO_ENV})")
    p.add_argument("--clingo")
    p.add_argument("--timeout", type=float)
    p.set_defaults(func=cmd_emit_asp)

    p = sub.add_parser("codegen", help="move code for a schedule")
    p.add_argument("block")
    p.add_argument("schedule", help='JSON {"pus": [[...], ...]}')
    p.add_argument("--stores", action="store_true", help="store results through the LSU")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_codegen)

    p = sub.add_parser("simulate", help="run move code on the machine model")
    p.add_argument("block")
    p.add_argument("schedule")
    p.add_argument("--moves", help="move file; generated from the schedule if omitted")
    p.add_argument("--pu-count", type=int)
    p.add_argument("--capacity", type=int, help="capacity of every buffer")
    p.add_argument("--in-capacity", type=int)
    p.add_argument("--out-capacity", type=int)
    p.add_argument("--issue-mode", choices=(machine.PREREGISTERED, machine.ONE_PER_CYCLE),
                   default=machine.PREREGISTERED)
    p.add_argument("--trace", action="store_true", help="per-round trace on stderr")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen", help="seeded random blocks")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--levels", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for <name>.bb files")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="time solve over a corpus, CSV out")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--corpus", help="directory of .bb files")
    src.add_argument("--block")
    p.add_argument("--n", default="6..12", help="grid, e.g. 6..12 or 10,15,20")
    p.add_argument("--levels", default="4")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _objective_flags(p, default="lex-pu-time")
    p.add_argument("--timeout", type=float)
    p.add_argument("--jobs", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dot", help="Graphviz drawing of a block")
    p.add_argument("block")
    p.add_argument("--schedule")
    p.set_defaults(func=cmd_dot)

    p = sub.add_parser("verify", help="cross-check solver, oracle and simulator")
    p.add_argument("blocks", nargs="*")
    p.add_argument("--random", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-n", type=int, default=7)
    p.add_argument("--max-pus", type=int, default=3)
    p.set_defaults(func=cmd_verify)
    return ap


_DEFAULTS = {"jobs": 1, "timeout": 120.0}


def _apply_config(a) -> None:
    cfg = {}
    if a.config:
        try:
            cfg = json.loads(Path(a.config).read_text())
        except (OSError, ValueError) as e:
            raise UsageError(f"config {a.config}: {e}") from None
    a.config = cfg
    for key, default in _DEFAULTS.items():
        if hasattr(a, key) and getattr(a, key) is None and a.command != "emit-asp":
            setattr(a, key, cfg.get(key, default))


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else USAGE
    try:
        _apply_config(a)
        return a.func(a)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    except (InvariantBreach, codegen.CyclicPrecedence) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return BREACH
    except BrokenPipeError:
        return OK
    except Exception as e:  # noqa: BLE001 - last resort, keep the exit code contract
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return BREACH


if __name__ == "__main__":
    sys.exit(main())
