"""Lagrangian lower bound with capacity and linking constraints relaxed, and its dual ascent."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

from .model import Instance, Path, dummy_path
from .pricing import INF, DualPrices, PricingCosts, leg_costs, tdspp, usable_legs
from .reduction import SubNetwork, default_workers


@dataclass
class LagrangeMultipliers:
    """Non-negative multipliers: ``kappa_c`` per leg, ``kappa_s`` per (leg, request)."""

    kappa_c: dict[int, float] = field(default_factory=dict)
    kappa_s: dict[tuple[int, int], float] = field(default_factory=dict)

    def check(self) -> None:
        if any(v < 0 for v in self.kappa_c.values()) or any(v < 0 for v in self.kappa_s.values()):
            raise ValueError("Lagrange multipliers must be non-negative")

    def as_duals(self) -> DualPrices:
        return DualPrices({l: -v for l, v in self.kappa_c.items() if v},
                          {k: -v for k, v in self.kappa_s.items() if v})

    def as_dict(self) -> dict:
        return {"kappa_c": {str(l): v for l, v in sorted(self.kappa_c.items()) if v},
                "kappa_s": {f"{l},{r}": v for (l, r), v in sorted(self.kappa_s.items()) if v}}


@dataclass
class LrSolution:
    bound: float
    paths: dict[int, Path]
    path_costs: dict[int, float]
    active: tuple[bool, ...]
    schedule_terms: tuple[float, ...]


def schedule_terms(instance: Instance, kappa: LagrangeMultipliers) -> tuple[float, ...]:
    """Coefficient of each activation variable after relaxation."""
    coef = [float(s.fixed_cost) for s in instance.schedules]
    for l, k in kappa.kappa_c.items():
        coef[instance.legs[l].schedule] -= k * instance.legs[l].capacity
    for (l, _r), k in kappa.kappa_s.items():
        coef[instance.legs[l].schedule] -= k
    return tuple(coef)


def _path_part(instance: Instance, sub: SubNetwork, request: int, duals: DualPrices) -> tuple[Path, float]:
    costs = leg_costs(instance, request, duals, usable_legs(instance, sub))
    res = tdspp(instance, sub, request, costs)
    if res.best_cost == INF:
        # the reduced network lost every path; the dummy is always there
        p = dummy_path(instance, request)
        return p, float(sum(leg_costs(instance, request, duals, p.legs).alpha.values()))
    return res.paths[0][0], res.best_cost


def eval_lr(instance: Instance, subnetworks: Mapping[int, SubNetwork], kappa: LagrangeMultipliers,
            workers: int | None = None) -> LrSolution:
    """Lagrangian relaxation value at ``kappa``; a lower bound on the optimum.

    The path part splits into one shortest path per request under the
    penalized leg costs. An activation is switched on exactly when its
    relaxed coefficient is negative.
    """
    kappa.check()
    duals = kappa.as_duals()
    ids = sorted(subnetworks)
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda r: _path_part(instance, subnetworks[r], r, duals), ids))
    else:
        parts = [_path_part(instance, subnetworks[r], r, duals) for r in ids]
    paths = {r: p for r, (p, _c) in zip(ids, parts)}
    costs = {r: c for r, (_p, c) in zip(ids, parts)}
    coef = schedule_terms(instance, kappa)
    active = tuple(c < 0 for c in coef)
    bound = sum(costs.values()) + sum(min(0.0, c) for c in coef)
    return LrSolution(bound, paths, costs, active, coef)


def subgradient(instance: Instance, subnetworks: Mapping[int, SubNetwork], paths: Mapping[int, Path],
                active: tuple[bool, ...]) -> tuple[dict[int, float], dict[tuple[int, int], float]]:
    """Residuals of the relaxed capacity and linking rows at a relaxed solution."""
    load: dict[int, float] = {}
    on: set[tuple[int, int]] = set()
    for r, p in paths.items():
        v = instance.requests[r].volume
        for l in p.legs:
            load[l] = load.get(l, 0.0) + v
            on.add((l, r))
    g_c: dict[int, float] = {}
    g_s: dict[tuple[int, int], float] = {}
    for r, sub in subnetworks.items():
        for l in sub.legs:
            y = 1.0 if active[instance.legs[l].schedule] else 0.0
            g_c[l] = load.get(l, 0.0) - instance.legs[l].capacity * y
            g_s[(l, r)] = (1.0 if (l, r) in on else 0.0) - y
    return g_c, g_s


def dummy_objective(instance: Instance) -> float:
    total = 0.0
    for r in instance.requests:
        p = dummy_path(instance, r.id)
        total += p.mile_cost + instance.schedules[instance.legs[p.legs[0]].schedule].fixed_cost
    return total


def default_target(instance: Instance, bound: float) -> float:
    owners = instance.dummy_schedule_of()
    if all(r.id in owners for r in instance.requests):
        return dummy_objective(instance)
    return 2 * abs(bound) + 1


@dataclass
class DualSchedule:
    iterations: int = 1000
    patience: int = 50
    beta: float = 1.0
    halve_after: int = 5
    full_every: int = 20
    target: float | None = None
    workers: int | None = None


def solve_dual(instance: Instance, subnetworks: Mapping[int, SubNetwork],
               schedule: DualSchedule | None = None) -> tuple[float, LagrangeMultipliers, list[dict]]:
    """Surrogate subgradient ascent on the Lagrangian dual.

    Each iteration re-solves the path part of one request (round robin) and
    takes a Polyak step toward ``target`` along the resulting surrogate
    subgradient. A full evaluation runs every ``full_every`` iterations and
    whenever the re-solved block fails to strictly lower the surrogate value;
    only full evaluations produce bounds. The step factor halves after
    ``halve_after`` full evaluations without a better bound, and the run
    stops after ``patience`` such evaluations or at the iteration cap.
    """
    sch = schedule or DualSchedule()
    kappa = LagrangeMultipliers()
    cur = eval_lr(instance, subnetworks, kappa, sch.workers)
    target = sch.target if sch.target is not None else default_target(instance, cur.bound)
    best, best_kappa = cur.bound, LagrangeMultipliers()
    paths, costs = dict(cur.paths), dict(cur.path_costs)
    trace = [{"iteration": 0, "bound": cur.bound, "best_bound": best, "surrogate": cur.bound,
              "step": 0.0, "beta": sch.beta, "full": True}]
    beta = sch.beta
    stale = 0
    ids = sorted(subnetworks)
    active = cur.active
    for it in range(1, sch.iterations + 1):
        surrogate = sum(costs.values()) + sum(min(0.0, c) for c in schedule_terms(instance, kappa))
        g_c, g_s = subgradient(instance, subnetworks, paths, active)
        # capacity rows divided by leg capacity so both row families share a scale
        g_c = {l: g / instance.legs[l].capacity for l, g in g_c.items()}
        norm = sum(v * v for v in g_c.values()) + sum(v * v for v in g_s.values())
        if norm == 0:
            break
        # the surrogate value may overshoot the target; keep a minimal step
        gap = max(target - surrogate, 0.01 * max(1.0, abs(target)))
        step = beta * gap / norm
        kc = dict(kappa.kappa_c)
        ks = dict(kappa.kappa_s)
        for l, g in g_c.items():
            kc[l] = max(0.0, kc.get(l, 0.0) + step * g / instance.legs[l].capacity)
        for k, g in g_s.items():
            ks[k] = max(0.0, ks.get(k, 0.0) + step * g)
        kappa = LagrangeMultipliers({l: v for l, v in kc.items() if v}, {k: v for k, v in ks.items() if v})
        duals = kappa.as_duals()
        coef = schedule_terms(instance, kappa)
        active = tuple(c < 0 for c in coef)
        r = ids[(it - 1) % len(ids)] if ids else None
        full = it % sch.full_every == 0 or r is None
        if r is not None and not full:
            # surrogate condition: the re-solved block must beat the stale one at the new multipliers
            old = paths[r]
            old_cost = sum(leg_costs(instance, r, duals, old.legs).alpha.values())
            p, c = _path_part(instance, subnetworks[r], r, duals)
            for q in ids:
                if q != r:
                    costs[q] = sum(leg_costs(instance, q, duals, paths[q].legs).alpha.values())
            if c < old_cost:
                paths[r], costs[r] = p, c
            else:
                full = True
        bound = None
        if full:
            cur = eval_lr(instance, subnetworks, kappa, sch.workers)
            paths, costs, active = dict(cur.paths), dict(cur.path_costs), cur.active
            bound = cur.bound
        if bound is not None:
            if bound > best:
                best, best_kappa = bound, kappa
                stale = 0
            else:
                stale += 1
                if stale % sch.halve_after == 0:
                    beta /= 2
        trace.append({"iteration": it, "bound": bound, "best_bound": best, "surrogate": surrogate,
                      "step": step, "beta": beta, "full": full})
        if stale >= sch.patience:
            break
    return best, best_kappa, trace
