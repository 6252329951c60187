"""Brute-force exact solver for desk-scale instances.

Enumerates every feasible path of every request by depth-first search over
time-chainable legs, then searches one-path-per-request assignments with
capacity tracking and a simple additive lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Instance, Path, Solution, make_solution


class OracleTooLarge(RuntimeError):
    """The instance exceeds the oracle's path or node budget."""


@dataclass
class PathCatalog:
    paths: dict[int, list[Path]]

    def legs_of(self, request: int) -> set[int]:
        return {lid for p in self.paths[request] for lid in p.legs}


def enumerate_paths(instance: Instance, request: int, cap: int = 100_000, simple: bool = True,
                    legs: set[int] | None = None) -> list[Path]:
    """All feasible paths of ``request``, sorted by (mile cost, leg ids).

    ``simple=False`` also enumerates time-feasible walks that revisit a hub.
    ``legs`` optionally restricts the search to a leg subset.
    Raises OracleTooLarge when more than ``cap`` paths exist.
    """
    r = instance.requests[request]
    owner = instance.dummy_leg_owner()

    def usable(lid: int) -> bool:
        leg = instance.legs[lid]
        return (leg.capacity >= r.volume and leg.arrive <= r.latest and leg.dest != r.origin
                and owner.get(lid, request) == request and (legs is None or lid in legs))

    found: list[tuple[int, ...]] = []
    stack: list[int] = []
    visited = {r.origin}

    def dfs(hub: int, t: int) -> None:
        for lid in instance.out_legs[hub]:
            leg = instance.legs[lid]
            if leg.depart < t or not usable(lid):
                continue
            if simple and leg.dest in visited:
                continue
            stack.append(lid)
            if leg.dest == r.dest:
                found.append(tuple(stack))
                if len(found) > cap:
                    raise OracleTooLarge("instance too large for oracle")
            else:
                fresh = leg.dest not in visited
                visited.add(leg.dest)
                dfs(leg.dest, leg.arrive)
                if fresh:
                    visited.discard(leg.dest)
            stack.pop()

    dfs(r.origin, r.earliest)
    paths = [instance.make_path(request, p) for p in found]
    paths.sort(key=lambda p: (p.mile_cost, p.legs))
    return paths


def catalog(instance: Instance, cap: int = 100_000, simple: bool = True) -> PathCatalog:
    return PathCatalog({r.id: enumerate_paths(instance, r.id, cap, simple) for r in instance.requests})


def solve_exact(instance: Instance, cap: int = 1_000_000, node_budget: int | None = None) -> Solution:
    """Globally optimal solution by exhaustive search over path combinations.

    Requests are assigned in decreasing volume order. A branch is cut when the
    committed cost plus every remaining request's cheapest path reaches the
    incumbent. Raises OracleTooLarge when the combination count exceeds
    ``cap`` and no ``node_budget`` is given, or when the budget runs out.
    """
    cat = catalog(instance, cap=cap)
    nr = len(instance.requests)
    if any(not cat.paths[r] for r in range(nr)):
        raise ValueError("a request has no feasible path")
    combos = 1
    for r in range(nr):
        combos *= len(cat.paths[r])
    if node_budget is None:
        if combos > cap:
            raise OracleTooLarge("instance too large for oracle")
        node_budget = (nr + 1) * combos + 16
    order = sorted(range(nr), key=lambda r: (-instance.requests[r].volume, r))
    cheapest = [cat.paths[r][0].mile_cost for r in range(nr)]
    rest = [0] * (nr + 1)
    for k in range(nr - 1, -1, -1):
        rest[k] = rest[k + 1] + cheapest[order[k]]

    load = [0] * len(instance.legs)
    used = [0] * len(instance.schedules)  # number of chosen legs per schedule
    choice: list[int] = [0] * nr
    best_obj: int | None = None
    best_choice: tuple[int, ...] | None = None
    nodes = 0

    def dfs(k: int, cost: int) -> None:
        nonlocal best_obj, best_choice, nodes
        nodes += 1
        if nodes > node_budget:
            raise OracleTooLarge("oracle node budget exceeded")
        if best_obj is not None and cost + rest[k] > best_obj:
            return
        if k == nr:
            key = tuple(cat.paths[r][choice[r]].legs for r in range(nr))
            if best_obj is None or cost < best_obj or (cost == best_obj and key < best_choice):
                best_obj, best_choice = cost, key
            return
        r = order[k]
        v = instance.requests[r].volume
        for i, p in enumerate(cat.paths[r]):
            if best_obj is not None and cost + p.mile_cost + rest[k + 1] > best_obj:
                break  # paths are sorted by mile cost
            if any(load[lid] + v > instance.legs[lid].capacity for lid in p.legs):
                continue
            extra = p.mile_cost
            for lid in p.legs:
                s = instance.legs[lid].schedule
                if used[s] == 0:
                    extra += instance.schedules[s].fixed_cost
                used[s] += 1
                load[lid] += v
            choice[r] = i
            dfs(k + 1, cost + extra)
            for lid in p.legs:
                used[instance.legs[lid].schedule] -= 1
                load[lid] -= v

    dfs(0, 0)
    if best_choice is None:
        raise ValueError("no capacity-feasible assignment exists")
    paths = [instance.make_path(r, best_choice[r]) for r in range(nr)]
    return make_solution(instance, paths)
