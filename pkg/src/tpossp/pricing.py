"""Pricing subproblem: time-dependent shortest paths under dual-adjusted leg costs.

For every usable leg ``l`` the backward pass computes ``zeta[l]``, the cost of
the cheapest feasible continuation that starts with ``l`` and ends at the
request's destination. Legs are processed in decreasing departure order, so
each successor's label is final before it is read.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Mapping

from .model import Instance, Path, leg_mile_cost
from .reduction import SubNetwork

INF = math.inf
# duals above this are treated as sign violations rather than round-off
DUAL_SIGN_TOL = 1e-6


class DualSignError(ValueError):
    pass


@dataclass
class DualPrices:
    """Duals of the restricted master.

    ``pi_c`` belongs to the per-leg capacity rows, ``pi_s`` to the
    (leg, request) linking rows and ``pi_r`` to the per-request convexity
    rows. Missing entries are zero.
    """

    pi_c: dict[int, float] = field(default_factory=dict)
    pi_s: dict[tuple[int, int], float] = field(default_factory=dict)
    pi_r: dict[int, float] = field(default_factory=dict)
    snapshot: int = 0

    def combine(self, other: "DualPrices", w: float, snapshot: int | None = None) -> "DualPrices":
        """``self / w + other * (w - 1) / w``, component-wise."""
        a, b = 1.0 / w, (w - 1.0) / w

        def mix(x: Mapping, y: Mapping) -> dict:
            return {k: a * x.get(k, 0.0) + b * y.get(k, 0.0) for k in set(x) | set(y)}

        return DualPrices(mix(self.pi_c, other.pi_c), mix(self.pi_s, other.pi_s), mix(self.pi_r, other.pi_r),
                          self.snapshot if snapshot is None else snapshot)


@dataclass
class PricingCosts:
    request: int
    alpha: dict[int, float]
    snapshot: int = 0


@dataclass
class PricingResult:
    request: int
    paths: list[tuple[Path, float]]
    best_reduced_cost: float
    zeta: dict[int, float]
    best_cost: float = INF  # min over paths of sum(alpha), without the convexity dual


def leg_costs(instance: Instance, request: int, duals: DualPrices, legs=None) -> PricingCosts:
    """Dual-adjusted cost of each leg for ``request``.

    ``alpha = mile cost - (pi_c * volume + pi_s)``. Raises DualSignError when
    a capacity or linking dual is positive beyond round-off.
    """
    v = instance.requests[request].volume
    alpha = {}
    for lid in (range(len(instance.legs)) if legs is None else legs):
        pc = duals.pi_c.get(lid, 0.0)
        ps = duals.pi_s.get((lid, request), 0.0)
        if pc > DUAL_SIGN_TOL or ps > DUAL_SIGN_TOL:
            raise DualSignError("duals not from a ≤-constraint system")
        a = leg_mile_cost(instance.legs[lid], v) - (min(pc, 0) * v + min(ps, 0))
        if a < 0:
            raise DualSignError(f"negative leg cost on leg {lid}")
        alpha[lid] = a
    return PricingCosts(request, alpha, duals.snapshot)


def usable_legs(instance: Instance, sub: SubNetwork) -> list[int]:
    """Legs of ``sub`` that satisfy the request's feasibility rules."""
    r = instance.requests[sub.request]
    owner = instance.dummy_leg_owner()
    out = []
    for lid in sub.legs:
        leg = instance.legs[lid]
        if (leg.capacity >= r.volume and leg.dest != r.origin and leg.origin != r.dest
                and leg.depart >= r.earliest and leg.arrive <= r.latest and owner.get(lid, r.id) == r.id):
            out.append(lid)
    return out


def _zeta(instance: Instance, request: int, legs: list[int], alpha: Mapping[int, float], prune: bool):
    """Backward recursion. With ``prune`` only critical legs are kept per hub."""
    q = instance.requests[request].dest
    order = sorted(legs, key=lambda l: (-instance.legs[l].depart, l))
    zeta: dict[int, float] = {}
    # per hub: departures (negated, ascending) and matching zeta, strictly decreasing
    keys: dict[int, list[int]] = {}
    vals: dict[int, list[float]] = {}
    ids: dict[int, list[int]] = {}
    outs: dict[int, list[int]] = {}
    for lid in order:
        leg = instance.legs[lid]
        if leg.dest == q:
            z = alpha[lid]
        elif prune:
            k = keys.get(leg.dest)
            i = bisect_right(k, -leg.arrive) - 1 if k else -1
            z = alpha[lid] + vals[leg.dest][i] if i >= 0 else INF
        else:
            best = INF
            for nxt in outs.get(leg.dest, ()):
                if instance.legs[nxt].depart >= leg.arrive and zeta[nxt] < best:
                    best = zeta[nxt]
            z = alpha[lid] + best
        zeta[lid] = z
        if z == INF:
            continue
        h = leg.origin
        if prune:
            k = keys.setdefault(h, [])
            if not k or z < vals[h][-1]:
                k.append(-leg.depart)
                vals.setdefault(h, []).append(z)
                ids.setdefault(h, []).append(lid)
        else:
            outs.setdefault(h, []).append(lid)
    return zeta, keys, vals, ids


def _shortcut(instance: Instance, legs: list[int]) -> list[int]:
    """Remove hub revisits; never increases cost when leg costs are non-negative."""
    out: list[int] = []
    pos = {instance.legs[legs[0]].origin: 0}
    for lid in legs:
        d = instance.legs[lid].dest
        if d in pos:
            k = pos[d]
            del out[k:]
            pos = {h: i for h, i in pos.items() if i <= k}
        else:
            out.append(lid)
            pos[d] = len(out)
    return out


def tdspp(instance: Instance, sub: SubNetwork, request: int, costs: PricingCosts, pi_r: float = 0.0,
          prune: bool = True) -> PricingResult:
    """Minimum-cost feasible path of ``request`` inside ``sub``.

    ``prune=False`` runs the plain recursion that scans every successor;
    ``prune=True`` keeps only critical legs per hub and finds successors by
    binary search. Both return the same optimum.
    """
    r = instance.requests[request]
    legs = usable_legs(instance, sub)
    zeta, keys, vals, ids = _zeta(instance, request, legs, costs.alpha, prune)
    starts = [l for l in legs if instance.legs[l].origin == r.origin and zeta[l] < INF]
    if not starts:
        return PricingResult(request, [], INF, zeta)
    first = min(starts, key=lambda l: (zeta[l], instance.legs[l].depart, l))
    path = [first]
    while instance.legs[path[-1]].dest != r.dest:
        leg = instance.legs[path[-1]]
        target = zeta[path[-1]] - costs.alpha[path[-1]]
        if prune:
            i = bisect_right(keys[leg.dest], -leg.arrive) - 1
            path.append(ids[leg.dest][i])
        else:
            cands = [l for l in legs if instance.legs[l].origin == leg.dest
                     and instance.legs[l].depart >= leg.arrive and zeta[l] == target]
            path.append(min(cands, key=lambda l: (instance.legs[l].depart, l)))
    path = _shortcut(instance, path)
    p = instance.make_path(request, path)
    cost = sum(costs.alpha[l] for l in path)
    return PricingResult(request, [(p, cost - pi_r)], cost - pi_r, zeta, cost)


def critical_legs(instance: Instance, sub: SubNetwork, request: int, zeta: Mapping[int, float]) -> dict[int, set[int]]:
    """Legs at which each hub's arrival-time cost function jumps.

    The function at hub ``h`` maps a ready time ``t`` to the cheapest label of
    a leg leaving ``h`` at or after ``t``. A leg is critical when its label is
    strictly below every later departure and minimal among legs departing at
    the same time.
    """
    by_hub: dict[int, list[int]] = {}
    for lid, z in zeta.items():
        if z < INF:
            by_hub.setdefault(instance.legs[lid].origin, []).append(lid)
    out: dict[int, set[int]] = {}
    for h, lids in by_hub.items():
        lids.sort(key=lambda l: -instance.legs[l].depart)
        crit: set[int] = set()
        later = INF
        i = 0
        while i < len(lids):
            dep = instance.legs[lids[i]].depart
            j = i
            while j < len(lids) and instance.legs[lids[j]].depart == dep:
                j += 1
            group = lids[i:j]
            low = min(zeta[l] for l in group)
            if low < later:
                crit.update(l for l in group if zeta[l] == low)
                later = low
            i = j
        out[h] = crit
    return out


def envelopes(instance: Instance, sub: SubNetwork, request: int, zeta: Mapping[int, float]) -> dict[str, list]:
    """Jump points ``[departure, value, leg]`` of every hub's cost function, for debugging dumps."""
    crit = critical_legs(instance, sub, request, zeta)
    return {
        str(h): sorted([instance.legs[l].depart, zeta[l], l] for l in legs)
        for h, legs in sorted(crit.items())
    }


def reduced_cost(instance: Instance, path: Path, duals: DualPrices) -> float:
    v = instance.requests[path.request].volume
    rc = path.mile_cost - duals.pi_r.get(path.request, 0.0)
    for lid in path.legs:
        rc -= duals.pi_c.get(lid, 0.0) * v + duals.pi_s.get((lid, path.request), 0.0)
    return rc


def price_request(instance: Instance, sub: SubNetwork, request: int, duals: DualPrices, paths_limit: int = 1,
                  max_cost_slack: float = INF, improve_tol: float = 1.0, only_improving: bool = True,
                  actual: DualPrices | None = None) -> PricingResult:
    """Up to ``paths_limit`` distinct cheap paths for ``request``.

    Paths are produced in increasing cost order by a best-first search whose
    completion bound is the exact label of the last leg, so the first path
    found is optimal. Only paths within ``max_cost_slack`` of the optimum are
    kept. With ``only_improving`` a path must have reduced cost
    ``<= -improve_tol``, measured under ``actual`` when given (paths are
    still searched under ``duals``).
    """
    if paths_limit < 1 or max_cost_slack < 0:
        raise ValueError("paths_limit must be >= 1 and max_cost_slack >= 0")
    r = instance.requests[request]
    legs = usable_legs(instance, sub)
    costs = leg_costs(instance, request, duals, legs)
    pi_r = duals.pi_r.get(request, 0.0)
    base = tdspp(instance, sub, request, costs, pi_r, prune=True)
    if base.best_cost == INF:
        return base
    zeta, alpha = base.zeta, costs.alpha
    limit = base.best_cost + max_cost_slack
    # tolerate float noise when comparing against the optimum
    limit += 1e-9 * max(1.0, abs(limit)) if limit < INF else 0.0

    outs: dict[int, list[int]] = {}
    for lid in legs:
        if zeta[lid] < INF:
            outs.setdefault(instance.legs[lid].origin, []).append(lid)
    for h in outs:
        outs[h].sort(key=lambda l: instance.legs[l].depart)
    deps = {h: [instance.legs[l].depart for l in v] for h, v in outs.items()}

    heap: list = []
    for lid in outs.get(r.origin, ()):
        if zeta[lid] <= limit:
            heapq.heappush(heap, (zeta[lid], (lid,), 0.0))
    found: list[tuple[Path, float]] = []
    seen: set[tuple[int, ...]] = set()
    candidates = 0
    pops = 0
    max_pops = 2000 + 200 * paths_limit
    while heap and len(found) < paths_limit and candidates < 4 * paths_limit and pops < max_pops:
        key, path, prefix = heapq.heappop(heap)
        pops += 1
        last = instance.legs[path[-1]]
        prefix += alpha[path[-1]]
        if last.dest == r.dest:
            candidates += 1
            if path in seen:
                continue
            seen.add(path)
            p = instance.make_path(request, path)
            rc = prefix - pi_r if actual is None else reduced_cost(instance, p, actual)
            if not only_improving or rc <= -improve_tol:
                found.append((p, rc))
            continue
        visited = {instance.legs[path[0]].origin} | {instance.legs[l].dest for l in path}
        succ = []
        hub_legs = outs.get(last.dest, ())
        start = bisect_right(deps.get(last.dest, []), last.arrive - 1)
        for nxt in hub_legs[start:]:
            if instance.legs[nxt].dest in visited:
                continue
            k = prefix + zeta[nxt]
            if k <= limit:
                succ.append((k, nxt))
        succ.sort()
        for k, nxt in succ[:paths_limit]:
            heapq.heappush(heap, (k, path + (nxt,), prefix))
    if not found and not only_improving and base.paths:
        found = list(base.paths)
    return PricingResult(request, found, base.best_reduced_cost, zeta, base.best_cost)
