"""Command-line front end.

Exit codes: 0 success, 1 internal error, 2 bad usage, 3 invalid instance or solution.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Sequence

from . import bounds, colgen, oracle
from .generate import GeneratorConfig, generate
from .model import (InstanceFormatError, Request, add_dummy_schedules, compute_metrics, dumps, read_instance,
                    read_solution, validate_instance, validate_solution, write_instance, write_solution)
from .reduction import reduce_all, summary

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_INVALID = 0, 1, 2, 3
CSV_COLUMNS = ("schema_version", "section", "key", "value")

log = logging.getLogger("tpossp")


def _read(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _emit(data: bytes, out: str | None, name: str) -> None:
    if out is None:
        sys.stdout.buffer.write(data)
        return
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, name), "wb") as fh:
        fh.write(data)


def _load_instance(path: str):
    inst = read_instance(_read(path))
    errs = validate_instance(inst)
    if errs:
        raise InstanceFormatError("; ".join(errs), path)
    return inst


def _doc(obj: dict) -> bytes:
    return dumps(obj).encode("utf-8")


def report_rows(metrics: dict, extra: dict | None = None) -> list[tuple[str, str, object]]:
    rows = [("cost", k, v) for k, v in metrics.items()]
    for k, v in sorted((extra or {}).items()):
        if not isinstance(v, (list, dict)):
            rows.append(("run", k, v))
    return rows


def to_csv(rows: Sequence[tuple[str, str, object]]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for section, key, value in rows:
        w.writerow((SCHEMA_VERSION, section, key, "" if value is None else value))
    return buf.getvalue().encode("utf-8")


def _cg_params(a: argparse.Namespace) -> colgen.CgParams:
    return colgen.CgParams(paths=a.paths, iterations=a.iterations, max_cost=a.max_cost, mode=a.mode,
                           reduce=not a.no_reduce, seed=a.seed, node_budget=a.node_budget,
                           time_limit=a.time_limit, branch_columns=not a.y_only_branching)


def _write_report(a: argparse.Namespace, doc: dict, metrics: dict | None, name: str = "report") -> None:
    if a.format == "csv":
        _emit(to_csv(report_rows(metrics or {}, doc)), a.out, name + ".csv")
    else:
        _emit(_doc(dict(doc, schema_version=SCHEMA_VERSION, metrics=metrics)), a.out, name + ".json")


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(a: argparse.Namespace) -> int:
    cfg = GeneratorConfig(hubs=a.hubs, schedules=a.schedules, legs_per_schedule=a.legs_per_schedule,
                          requests=a.requests, window_slack=a.window_slack, seed=a.seed)
    data = write_instance(generate(cfg))
    if a.out:
        with open(a.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
    return EXIT_OK


def cmd_reduce(a: argparse.Namespace) -> int:
    inst = add_dummy_schedules(_load_instance(a.instance))
    subs = reduce_all(inst)
    doc = {"summary": summary(inst, subs),
           "subnetworks": [{"request": r, "legs": sorted(s.legs)} for r, s in sorted(subs.items())]}
    _emit(_doc(doc), a.out, "reduce.json")
    return EXIT_OK


def _bound_doc(best: float, kappa: bounds.LagrangeMultipliers, trace: list) -> dict:
    return {"schema_version": SCHEMA_VERSION, "best_bound": best, "multipliers": kappa.as_dict(), "trace": trace}


def cmd_solve(a: argparse.Namespace) -> int:
    inst = add_dummy_schedules(_load_instance(a.instance))
    if a.engine == "bound":
        subs = reduce_all(inst, reduce=not a.no_reduce)
        best, kappa, trace = bounds.solve_dual(inst, subs, bounds.DualSchedule(iterations=a.iterations))
        _emit(_doc(_bound_doc(best, kappa, trace)), a.out, "bound_trace.json")
        return EXIT_OK
    if a.engine == "exact":
        sol = oracle.solve_exact(inst)
        doc = {"engine": "exact", "integer_objective": sol.objective}
    else:
        sol, rep = colgen.solve_cg(inst, _cg_params(a))
        doc = dict(rep.as_dict(timings=a.timings), engine="cg")
    _emit(write_solution(sol), a.out, "solution.json")
    _write_report(a, doc, compute_metrics(inst, sol).as_dict())
    return EXIT_OK


def cmd_bound(a: argparse.Namespace) -> int:
    inst = add_dummy_schedules(_load_instance(a.instance))
    subs = reduce_all(inst, reduce=not a.no_reduce)
    sch = bounds.DualSchedule(iterations=a.iterations, patience=a.patience, target=a.target)
    best, kappa, trace = bounds.solve_dual(inst, subs, sch)
    _emit(_doc(_bound_doc(best, kappa, trace)), a.out, "bound_trace.json")
    return EXIT_OK


def _read_requests(path: str) -> list[Request]:
    doc = json.loads(_read(path))
    items = doc.get("requests", doc) if isinstance(doc, dict) else doc
    if not isinstance(items, list):
        raise InstanceFormatError("expected a list of requests", path)
    out = []
    for i, r in enumerate(items):
        try:
            out.append(Request(i, int(r["origin"]), int(r["dest"]), int(r["earliest"]), int(r["latest"]),
                               int(r["volume"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceFormatError(f"bad request: {exc}", f"$.requests[{i}]") from exc
    return out


def cmd_insert(a: argparse.Namespace) -> int:
    inst = add_dummy_schedules(_load_instance(a.instance))
    base = read_solution(inst, _read(a.base))
    new = _read_requests(a.new)
    res = colgen.insert_realtime(inst, base, new, _cg_params(a))
    combined = replace(res.instance, base_paths=())
    _emit(write_instance(combined), a.out, "instance.json")
    _emit(write_solution(res.solution), a.out, "solution.json")
    doc = res.report.as_dict(timings=a.timings) if res.report else {}
    doc.update(engine="insert", marginal_cost=res.marginal_cost)
    _write_report(a, doc, compute_metrics(res.instance, res.solution).as_dict())
    return EXIT_OK


def cmd_validate(a: argparse.Namespace) -> int:
    inst = read_instance(_read(a.instance))
    errs = validate_instance(inst)
    if not errs and a.solution:
        inst = add_dummy_schedules(inst)
        errs = validate_solution(inst, read_solution(inst, _read(a.solution)))
    for e in errs:
        print(e)
    if errs:
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_report(a: argparse.Namespace) -> int:
    inst = add_dummy_schedules(_load_instance(a.instance))
    sol = read_solution(inst, _read(a.solution))
    metrics = compute_metrics(inst, sol).as_dict()
    doc: dict = {}
    if a.cg_report:
        prev = json.loads(_read(a.cg_report))
        for k in ("lp_objective", "lp_bound", "lagrangian_bound", "mip_objective"):
            if prev.get(k) is not None:
                doc[k] = prev[k]
    if a.bound_trace:
        doc["lagrangian_bound"] = json.loads(_read(a.bound_trace))["best_bound"]
    for k in ("lp_bound", "lagrangian_bound"):
        if doc.get(k):
            doc["gap_vs_" + k] = colgen.gap(metrics["objective"], doc[k])
    _write_report(a, doc, metrics)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _cg_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=(colgen.STANDARD, colgen.STABILIZED), default=colgen.STANDARD)
    p.add_argument("--paths", type=int, default=50)
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--max-cost", type=float, default=0.0)
    p.add_argument("--no-reduce", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--node-budget", type=int, default=100_000)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--y-only-branching", action="store_true", help="branch on schedule activations only")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")


def _out_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output directory (stdout when omitted)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tpossp", description="Trailer routing over scheduled services.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random instance")
    p.add_argument("--hubs", type=int, default=8)
    p.add_argument("--schedules", type=int, default=6)
    p.add_argument("--legs-per-schedule", type=int, default=3)
    p.add_argument("--requests", type=int, default=3)
    p.add_argument("--window-slack", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (stdout when omitted)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("reduce", help="per-request sub-networks")
    p.add_argument("instance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("solve", help="solve an instance")
    p.add_argument("instance")
    p.add_argument("--engine", choices=("cg", "exact", "bound"), default="cg")
    _cg_flags(p)
    _out_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bound", help="Lagrangian lower bound by dual ascent")
    p.add_argument("instance")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--target", type=float, default=None)
    p.add_argument("--no-reduce", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("insert", help="add requests to an existing plan")
    p.add_argument("instance")
    p.add_argument("--base", required=True, help="solution JSON of the base plan")
    p.add_argument("--new", required=True, help="JSON list of new requests")
    _cg_flags(p)
    _out_flags(p)
    p.set_defaults(func=cmd_insert)

    p = sub.add_parser("validate", help="check an instance and optionally a solution")
    p.add_argument("instance")
    p.add_argument("solution", nargs="?")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="cost breakdown and gaps for a solution")
    p.add_argument("instance")
    p.add_argument("solution")
    p.add_argument("--cg-report", default=None)
    p.add_argument("--bound-trace", default=None)
    _out_flags(p)
    p.set_defaults(func=cmd_report)
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return a.func(a)
    except InstanceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError, oracle.OracleTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())
