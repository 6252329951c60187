"""Restricted master, column generation driver, dual stabilization and integer finishing."""

from __future__ import annotations

import heapq
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .model import (Instance, Path, Request, Solution, add_dummy_schedules, dummy_path, make_solution,
                    validate_path, validate_solution)
from .pricing import INF, DualPrices, PricingResult, price_request, reduced_cost
from .reduction import SubNetwork, default_workers, reduce_all
from .simplex import EQ, LE, Basis, LinearProgram, LpSolution, solve_lp

log = logging.getLogger(__name__)

STANDARD, STABILIZED = "standard", "stabilized"
# relative reduced-cost threshold for an improving column
RC_REL_TOL = 1e-8
FRAC_TOL = 1e-6


@dataclass(frozen=True)
class Column:
    request: int
    path: Path

    @property
    def key(self) -> tuple[int, tuple[int, ...]]:
        return (self.request, self.path.legs)

    @property
    def cost(self) -> int:
        return self.path.mile_cost


@dataclass
class CgParams:
    paths: int = 50
    iterations: int = 50
    max_cost: float = 0.0
    mode: str = STANDARD
    max_weight: int = 10
    reduce: bool = True
    seed: int = 0
    node_budget: int = 100_000
    time_limit: float | None = None
    workers: int | None = None
    branch_columns: bool = True

    def check(self) -> None:
        if self.mode not in (STANDARD, STABILIZED):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.paths < 1 or self.iterations < 0 or self.max_cost < 0 or self.max_weight < 1:
            raise ValueError("invalid column generation parameters")


@dataclass
class StabilizationState:
    best_adjusted: DualPrices | None = None
    best_bound: float | None = None
    streak: int = 0
    weight: float = 1.0
    max_weight: float = 10.0
    last: DualPrices | None = None


@dataclass
class CgReport:
    log: list[dict] = field(default_factory=list)
    lp_objective: float | None = None
    lp_bound: float | None = None
    converged: bool = False
    columns: int = 0
    integer_objective: int | None = None
    mip_objective: float | None = None
    gap: float | None = None
    lagrangian_bound: float | None = None
    nodes: int = 0
    flagged: str = ""
    status: str = "ok"
    timings: dict[str, float] = field(default_factory=dict)

    def as_dict(self, timings: bool = False) -> dict:
        out = {
            "schema_version": 1,
            "log": self.log,
            "lp_objective": self.lp_objective,
            "lp_bound": self.lp_bound,
            "converged": self.converged,
            "columns": self.columns,
            "integer_objective": self.integer_objective,
            "mip_objective": self.mip_objective,
            "gap": self.gap,
            "lagrangian_bound": self.lagrangian_bound,
            "nodes": self.nodes,
            "flagged": self.flagged,
            "status": self.status,
        }
        if timings:
            out["timings"] = self.timings
        return out


# ---------------------------------------------------------------------------
# restricted master


@dataclass
class Rmp:
    lp: LinearProgram
    lam: dict[tuple, int]
    y: dict[int, int]
    cap_rows: dict[int, int]
    link_rows: dict[tuple[int, int], int]
    conv_rows: dict[int, int]


def build_rmp(instance: Instance, columns: Sequence[Column], y_bounds: Mapping[int, tuple[float, float]] | None = None,
              lam_bounds: Mapping[tuple, tuple[float, float]] | None = None) -> Rmp:
    """Path-based restricted master.

    Variables: one weight per column and one activation per schedule touched
    by a column. Rows: leg capacity, (leg, request) linking for pairs that
    occur in some column, and one convexity row per request.
    """
    y_bounds = y_bounds or {}
    lam_bounds = lam_bounds or {}
    have = {c.request for c in columns}
    for r in instance.requests:
        if r.id not in have:
            raise ValueError(f"request {r.id} has no column")
    lp = LinearProgram()
    lam = {}
    for c in columns:
        lo, hi = lam_bounds.get(c.key, (0.0, INF))
        lam[c.key] = lp.add_var(("lam",) + c.key, c.cost, lo, hi)
    scheds = sorted({instance.legs[l].schedule for c in columns for l in c.path.legs})
    y = {}
    for s in scheds:
        lo, hi = y_bounds.get(s, (0.0, 1.0))
        y[s] = lp.add_var(("y", s), instance.schedules[s].fixed_cost, lo, hi)
    cap_terms: dict[int, dict[int, float]] = {}
    link_terms: dict[tuple[int, int], dict[int, float]] = {}
    conv_terms: dict[int, dict[int, float]] = {}
    for c in columns:
        j = lam[c.key]
        v = instance.requests[c.request].volume
        for l in c.path.legs:
            cap_terms.setdefault(l, {})[j] = cap_terms.get(l, {}).get(j, 0.0) + v
            link_terms.setdefault((l, c.request), {})[j] = 1.0
        conv_terms.setdefault(c.request, {})[j] = 1.0
    cap_rows, link_rows, conv_rows = {}, {}, {}
    for l in sorted(cap_terms):
        leg = instance.legs[l]
        row = dict(cap_terms[l])
        row[y[leg.schedule]] = -float(leg.capacity)
        cap_rows[l] = lp.add_row(row, LE, 0.0, ("cap", l))
    for l, r in sorted(link_terms):
        row = dict(link_terms[(l, r)])
        row[y[instance.legs[l].schedule]] = -1.0
        link_rows[(l, r)] = lp.add_row(row, LE, 0.0, ("link", l, r))
    for r in sorted(conv_terms):
        conv_rows[r] = lp.add_row(conv_terms[r], EQ, 1.0, ("conv", r))
    return Rmp(lp, lam, y, cap_rows, link_rows, conv_rows)


def extract_duals(rmp: Rmp, sol: LpSolution, snapshot: int = 0) -> DualPrices:
    d = sol.duals
    return DualPrices(
        {l: min(0.0, float(d[i])) for l, i in rmp.cap_rows.items()},
        {k: min(0.0, float(d[i])) for k, i in rmp.link_rows.items()},
        {r: float(d[i]) for r, i in rmp.conv_rows.items()},
        snapshot,
    )


def lagrangian_value(instance: Instance, duals: DualPrices, results: Mapping[int, PricingResult]) -> float:
    """Lower bound implied by ``duals``: best path costs plus negative schedule terms."""
    total = sum(res.best_cost for res in results.values())
    sched: dict[int, float] = {}
    for l, pc in duals.pi_c.items():
        s = instance.legs[l].schedule
        sched[s] = sched.get(s, 0.0) + instance.legs[l].capacity * pc
    for (l, _r), ps in duals.pi_s.items():
        s = instance.legs[l].schedule
        sched[s] = sched.get(s, 0.0) + ps
    for s, t in sched.items():
        total += min(0.0, instance.schedules[s].fixed_cost + t)
    return total


# ---------------------------------------------------------------------------
# stabilization


def adjust_duals(state: StabilizationState, new_duals: DualPrices, new_dual_bound: float | None = None) -> DualPrices:
    """Pricing duals as a convex combination of ``new_duals`` and the best duals so far.

    ``new_dual_bound`` is the bound obtained by pricing with the duals this
    function returned last time. An improvement of the best bound extends
    the streak (weight ``1 + streak``, capped); anything else resets it.
    """
    if new_dual_bound is not None and state.last is not None:
        if state.best_bound is None or new_dual_bound > state.best_bound + 1e-9 * max(1.0, abs(state.best_bound)):
            state.best_bound = new_dual_bound
            state.best_adjusted = state.last
            state.streak += 1
        else:
            state.streak = 0
        state.weight = float(min(1 + state.streak, state.max_weight))
    if state.best_adjusted is None or state.weight == 1.0:
        adjusted = new_duals
    else:
        adjusted = new_duals.combine(state.best_adjusted, state.weight, new_duals.snapshot)
    state.last = adjusted
    return adjusted


# ---------------------------------------------------------------------------
# driver


def initial_columns(instance: Instance) -> list[Column]:
    cols = [Column(r.id, dummy_path(instance, r.id)) for r in instance.requests]
    for r, legs in instance.base_paths:
        p = instance.make_path(r, legs)
        if not validate_path(instance, p):
            cols.append(Column(r, p))
    return cols


def _price_all(instance, subnetworks, duals, actual, params, tol) -> dict[int, PricingResult]:
    def job(rid: int) -> PricingResult:
        return price_request(instance, subnetworks[rid], rid, duals, params.paths, params.max_cost,
                             improve_tol=tol, actual=actual)

    ids = sorted(subnetworks)
    workers = default_workers() if params.workers is None else params.workers
    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(job, ids))
    else:
        res = [job(rid) for rid in ids]
    return dict(zip(ids, res))


def run_colgen(instance: Instance, subnetworks: Mapping[int, SubNetwork], params: CgParams | None = None,
               columns: Iterable[Column] | None = None) -> tuple[list[Column], DualPrices | None, CgReport]:
    """Column generation on the path-based master.

    Stops after ``params.iterations`` pricing rounds or when no column with
    negative reduced cost exists. In stabilized mode pricing uses smoothed
    duals; candidates are kept only if improving under the actual duals, and
    a failed smoothed round is retried with the actual duals before the run
    is declared converged.
    """
    params = params or CgParams()
    params.check()
    t0 = time.perf_counter()
    cols = list(columns) if columns is not None else initial_columns(instance)
    pool = {c.key for c in cols}
    report = CgReport()
    state = StabilizationState(max_weight=params.max_weight) if params.mode == STABILIZED else None
    mode = params.mode
    basis: Basis | None = None
    duals: DualPrices | None = None
    last_bound: float | None = None
    t_lp = t_price = 0.0
    for it in range(params.iterations + 1):
        ts = time.perf_counter()
        rmp = build_rmp(instance, cols)
        sol = solve_lp(rmp.lp, basis)
        t_lp += time.perf_counter() - ts
        if not sol.optimal:
            report.status = f"lp {sol.status}: {sol.message}"
            log.error("restricted master failed: %s", report.status)
            break
        basis = sol.basis
        duals = extract_duals(rmp, sol, it)
        report.lp_objective = sol.objective
        if it == params.iterations:
            break
        if params.time_limit is not None and time.perf_counter() - t0 > params.time_limit:
            report.flagged = "time limit"
            break
        tol = RC_REL_TOL * max(1.0, abs(sol.objective))
        ts = time.perf_counter()
        price_duals = duals
        if mode == STABILIZED:
            price_duals = adjust_duals(state, duals, last_bound)
        results = _price_all(instance, subnetworks, price_duals, duals, params, tol)
        bound = lagrangian_value(instance, price_duals, results)
        last_bound = bound
        entry_mode = mode
        new = _new_columns(results, pool)
        if not new and mode == STABILIZED and price_duals is not duals:
            # smoothed duals found nothing: fall back to plain pricing for good
            mode = STANDARD
            entry_mode = "stabilized->standard"
            results = _price_all(instance, subnetworks, duals, duals, params, tol)
            bound = max(bound, lagrangian_value(instance, duals, results))
            new = _new_columns(results, pool)
        t_price += time.perf_counter() - ts
        report.lp_bound = bound if report.lp_bound is None else max(report.lp_bound, bound)
        finite = [res.best_reduced_cost for res in results.values() if res.best_reduced_cost < INF]
        report.log.append({
            "iteration": it,
            "lp_objective": sol.objective,
            "columns_added": len(new),
            "pricing_min": min(finite) if finite else None,
            "bound": bound,
            "weight": state.weight if entry_mode == STABILIZED else 1.0,
            "mode": entry_mode,
        })
        if not new:
            report.converged = True
            break
        for c in new:
            pool.add(c.key)
        cols.extend(new)
    report.columns = len(cols)
    report.timings.update({"lp": t_lp, "pricing": t_price, "colgen": time.perf_counter() - t0})
    return cols, duals, report


def _new_columns(results: Mapping[int, PricingResult], pool: set) -> list[Column]:
    out = []
    for rid in sorted(results):
        for p, _rc in results[rid].paths:
            c = Column(rid, p)
            if c.key not in pool and all(c.key != o.key for o in out):
                out.append(c)
    return out


# ---------------------------------------------------------------------------
# integer finishing


@dataclass
class FinishResult:
    solution: Solution
    mip_objective: float | None
    lp_bound: float | None
    gap: float | None
    nodes: int
    flagged: str = ""
    branched: int = 0

    @property
    def rounding_delta(self) -> float | None:
        if self.mip_objective is None:
            return None
        return self.solution.objective - self.mip_objective


def dummy_solution(instance: Instance) -> Solution:
    return make_solution(instance, [dummy_path(instance, r.id) for r in instance.requests])


def gap(objective: float, bound: float | None) -> float | None:
    if bound is None or bound <= 0:
        return None
    return (objective - bound) / bound


def round_solution(instance: Instance, columns: Sequence[Column], lam: Mapping[tuple, float],
                   active: Iterable[int]) -> Solution:
    """One path per request from fractional column weights.

    Each request takes its heaviest column among those whose schedules are
    all active. Capacity violations are then repaired by moving the
    smallest-volume request on an overloaded leg to its cheapest column that
    fits, counting the fixed cost of schedules it would switch on.
    """
    active = set(active)
    by_req: dict[int, list[Column]] = {}
    for c in columns:
        by_req.setdefault(c.request, []).append(c)
    chosen: dict[int, Column] = {}
    for r in instance.requests:
        cands = sorted(by_req[r.id], key=lambda c: (-lam.get(c.key, 0.0), c.cost, c.path.legs))
        pick = next((c for c in cands if all(instance.legs[l].schedule in active for l in c.path.legs)), None)
        if pick is None:
            pick = Column(r.id, dummy_path(instance, r.id))
        chosen[r.id] = pick
    load = [0] * len(instance.legs)
    users: dict[int, set[int]] = {}
    for rid, c in chosen.items():
        for l in c.path.legs:
            load[l] += instance.requests[rid].volume
            users.setdefault(l, set()).add(rid)
    while True:
        over = [l for l in sorted(users) if load[l] > instance.legs[l].capacity]
        if not over:
            break
        l = over[0]
        rid = min(users[l], key=lambda k: (instance.requests[k].volume, k))
        v = instance.requests[rid].volume
        cur = chosen[rid]
        for x in cur.path.legs:
            load[x] -= v
            users[x].discard(rid)
        used = {instance.legs[x].schedule for c in chosen.values() if c is not cur for x in c.path.legs}

        def extra(c: Column) -> float:
            new_s = {instance.legs[x].schedule for x in c.path.legs} - used
            return c.cost + sum(instance.schedules[s].fixed_cost for s in new_s)

        fits = [c for c in by_req[rid] + [Column(rid, dummy_path(instance, rid))]
                if c.key != cur.key and all(load[x] + v <= instance.legs[x].capacity for x in c.path.legs)]
        nxt = min(fits, key=lambda c: (extra(c), c.path.legs))
        chosen[rid] = nxt
        for x in nxt.path.legs:
            load[x] += v
            users.setdefault(x, set()).add(rid)
    return make_solution(instance, [c.path for c in chosen.values()])


def finish_integer(instance: Instance, columns: Sequence[Column], lp_bound: float | None = None,
                   node_budget: int = 100_000, time_limit: float | None = None,
                   branch_columns: bool = True) -> FinishResult:
    """Integer restricted master by best-bound branch and bound.

    Branches on the most fractional schedule activation first and, once all
    activations are integral, on the most fractional column weight (unless
    ``branch_columns`` is off, in which case such nodes are only rounded). Every
    node is also rounded to a feasible plan, which supplies incumbents early
    and the answer when the node budget or time limit cuts the search short.
    Objectives are integral, so nodes are pruned on the ceiling of their LP.
    """
    t0 = time.perf_counter()
    if node_budget <= 0:
        sol = dummy_solution(instance)
        return FinishResult(sol, None, lp_bound, gap(sol.objective, lp_bound), 0, "node budget exhausted")
    best_sol: Solution | None = None
    best_lp: float | None = None
    nodes = 0
    branched = 0
    flagged = ""

    def dead(bound: float) -> bool:
        return best_sol is not None and math.ceil(bound - 1e-6) >= best_sol.objective

    heap: list = [(-INF, 0, (), None)]
    counter = 1
    while heap:
        parent_bound, _, fix, basis = heapq.heappop(heap)
        if dead(parent_bound):
            continue
        if nodes >= node_budget:
            flagged = "node budget exhausted"
            break
        if time_limit is not None and time.perf_counter() - t0 > time_limit:
            flagged = "time limit"
            break
        nodes += 1
        ybounds = {k[1]: (float(v), float(v)) for k, v in fix if k[0] == "y"}
        lbounds = {k[1]: (float(v), float(v)) for k, v in fix if k[0] == "lam"}
        rmp = build_rmp(instance, columns, ybounds, lbounds)
        sol = solve_lp(rmp.lp, basis)
        if not sol.optimal or dead(sol.objective):
            continue
        yv = {s: float(sol.x[j]) for s, j in rmp.y.items()}
        lam = {k: float(sol.x[j]) for k, j in rmp.lam.items()}
        cand = round_solution(instance, columns, lam, [s for s, v in yv.items() if v > 0.5])
        if best_sol is None or cand.objective < best_sol.objective:
            best_sol, best_lp = cand, sol.objective
        frac = [(abs(v - 0.5), ("y", s)) for s, v in yv.items() if FRAC_TOL < v < 1 - FRAC_TOL]
        if not frac and branch_columns:
            frac = [(abs(v - 0.5), ("lam", k)) for k, v in lam.items() if FRAC_TOL < v < 1 - FRAC_TOL]
        if not frac or dead(sol.objective):
            continue
        _, var = min(frac)
        branched += 1
        for v in (1, 0):
            heapq.heappush(heap, (sol.objective, counter, fix + ((var, v),), sol.basis))
            counter += 1
    if best_sol is None:
        best_sol = dummy_solution(instance)
        flagged = flagged or "no feasible node"
    return FinishResult(best_sol, best_lp, lp_bound, gap(best_sol.objective, lp_bound), nodes, flagged, branched)


# ---------------------------------------------------------------------------
# pipeline and real-time insertion


def solve_cg(instance: Instance, params: CgParams | None = None) -> tuple[Solution, CgReport]:
    """Dummies, reduction, column generation and integer finishing in one call."""
    params = params or CgParams()
    t0 = time.perf_counter()
    inst = add_dummy_schedules(instance)
    subs = reduce_all(inst, params.workers, params.reduce)
    t_red = time.perf_counter() - t0
    cols, _duals, report = run_colgen(inst, subs, params)
    ts = time.perf_counter()
    fin = finish_integer(inst, cols, report.lp_bound, params.node_budget,
                         None if params.time_limit is None else max(1.0, params.time_limit), params.branch_columns)
    report.timings.update({"reduction": t_red, "finish": time.perf_counter() - ts,
                           "total": time.perf_counter() - t0})
    report.integer_objective = fin.solution.objective
    report.mip_objective = fin.mip_objective
    report.gap = fin.gap
    report.nodes = fin.nodes
    report.flagged = report.flagged or fin.flagged
    return fin.solution, report


@dataclass
class InsertResult:
    instance: Instance
    solution: Solution
    report: CgReport | None
    marginal_cost: int


def residual_instance(instance: Instance, base: Solution, new_requests: Sequence[Request]) -> Instance:
    """Capacity left by the base plan, already-active schedules free, only the new requests.

    Dummy legs of existing requests get zero capacity so new requests cannot use them.
    """
    load = [0] * len(instance.legs)
    for p in base.paths:
        v = instance.requests[p.request].volume
        for l in p.legs:
            load[l] += v
    offset = len(instance.requests) - len(new_requests)
    new_ids = {r.id for r in new_requests}
    legs = []
    for leg in instance.legs:
        s = instance.schedules[leg.schedule]
        cap = leg.capacity - load[leg.id]
        if s.is_dummy and s.request not in new_ids:
            cap = 0
        legs.append(replace(leg, capacity=max(0, cap)))
    schedules = []
    for s in instance.schedules:
        cost = 0 if base.active[s.id] else s.fixed_cost
        req = s.request - offset if s.is_dummy and s.request in new_ids else None
        schedules.append(replace(s, fixed_cost=cost, request=req))
    requests = tuple(replace(r, id=r.id - offset) for r in new_requests)
    return Instance(instance.hubs, tuple(schedules), tuple(legs), requests)


def insert_realtime(instance: Instance, base_solution: Solution, new_requests: Sequence[Request],
                    params: CgParams | None = None) -> InsertResult:
    """Route new requests around a fixed base plan.

    ``instance`` is the instance ``base_solution`` was computed on. The
    returned instance contains the old and new requests plus dummies for the
    new ones; the merged solution validates against it.
    """
    params = params or CgParams()
    base_errs = validate_solution(instance, base_solution)
    if base_errs:
        raise ValueError("base solution invalid: " + "; ".join(base_errs))
    if not new_requests:
        return InsertResult(instance, base_solution, None, 0)
    n0 = len(instance.requests)
    added = tuple(replace(r, id=n0 + k) for k, r in enumerate(new_requests))
    combined = add_dummy_schedules(replace(instance, requests=instance.requests + added, base_paths=()))
    combined = replace(combined, base_paths=instance.base_paths)
    base = replace(base_solution, active=base_solution.active + (False,) * (len(combined.schedules) - len(instance.schedules)))
    resid = residual_instance(combined, base, added)
    subs = reduce_all(resid, params.workers, params.reduce)
    cols, _duals, report = run_colgen(resid, subs, params)
    fin = finish_integer(resid, cols, report.lp_bound, params.node_budget, params.time_limit, params.branch_columns)
    report.integer_objective = fin.solution.objective
    report.mip_objective = fin.mip_objective
    report.gap = fin.gap
    report.nodes = fin.nodes
    new_paths = [combined.make_path(p.request + n0, p.legs) for p in fin.solution.paths]
    active = [a or b for a, b in zip(base.active, fin.solution.active)]
    merged = make_solution(combined, list(base.paths) + new_paths, active)
    errs = validate_solution(combined, merged)
    if errs:
        raise RuntimeError("merged solution invalid: " + "; ".join(errs))
    return InsertResult(combined, merged, report, merged.objective - base_solution.objective)
