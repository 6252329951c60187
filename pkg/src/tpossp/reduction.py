"""Per-request optimal sub-networks via earliest-arrival / latest-start labels.

Hub labels use ``None`` for the unreachable sentinels (+inf for ``eat``,
-inf for ``lst``) so that comparisons never depend on magic numbers.
"""

from __future__ import annotations

import heapq
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import Instance, Request


@dataclass(frozen=True)
class SubNetwork:
    request: int
    eat: tuple[int | None, ...]
    lst: tuple[int | None, ...]
    legs: frozenset[int]
    hubs: frozenset[int]

    @property
    def empty(self) -> bool:
        return not self.legs


def _request(instance: Instance, request: int | Request) -> Request:
    return instance.requests[request] if isinstance(request, int) else request


def preprocess(instance: Instance, request: int | Request) -> set[int]:
    """Legs usable by ``request`` before any labeling.

    Drops legs that are too small, enter the origin or leave the destination,
    fall outside the time window, or are another request's dummy leg.
    """
    r = _request(instance, request)
    owner = instance.dummy_leg_owner()
    keep = set()
    for leg in instance.legs:
        if r.volume > leg.capacity:
            continue
        if leg.dest == r.origin or leg.origin == r.dest:
            continue
        if leg.depart < r.earliest or leg.arrive > r.latest:
            continue
        if owner.get(leg.id, r.id) != r.id:
            continue
        keep.add(leg.id)
    return keep


def lsp(instance: Instance, request: int | Request, legs: Iterable[int]) -> list[int | None]:
    """Latest start time from every hub that still reaches the destination on time.

    Hubs are finalized in decreasing label order; a label below the request's
    earliest start is recorded but never expanded.
    """
    r = _request(instance, request)
    legs = set(legs)
    incoming: dict[int, list[int]] = {}
    for lid in legs:
        incoming.setdefault(instance.legs[lid].dest, []).append(lid)
    lst: list[int | None] = [None] * len(instance.hubs)
    lst[r.dest] = r.latest
    heap = [(-r.latest, r.dest)]
    done = set()
    while heap:
        neg, h = heapq.heappop(heap)
        if h in done:
            continue
        done.add(h)
        if -neg < r.earliest:
            break
        for lid in incoming.get(h, ()):
            leg = instance.legs[lid]
            if leg.arrive <= -neg and leg.origin not in done:
                cur = lst[leg.origin]
                if cur is None or leg.depart > cur:
                    lst[leg.origin] = leg.depart
                    heapq.heappush(heap, (-leg.depart, leg.origin))
    return lst


def eap(instance: Instance, request: int | Request, legs: Iterable[int]) -> list[int | None]:
    """Earliest arrival time at every hub for paths leaving the origin in the window."""
    r = _request(instance, request)
    legs = set(legs)
    outgoing: dict[int, list[int]] = {}
    for lid in legs:
        outgoing.setdefault(instance.legs[lid].origin, []).append(lid)
    eat: list[int | None] = [None] * len(instance.hubs)
    eat[r.origin] = r.earliest
    heap = [(r.earliest, r.origin)]
    done = set()
    while heap:
        t, h = heapq.heappop(heap)
        if h in done:
            continue
        done.add(h)
        if t > r.latest:
            break
        for lid in outgoing.get(h, ()):
            leg = instance.legs[lid]
            if leg.depart >= t and leg.dest not in done:
                cur = eat[leg.dest]
                if cur is None or leg.arrive < cur:
                    eat[leg.dest] = leg.arrive
                    heapq.heappush(heap, (leg.arrive, leg.dest))
    return eat


def filter_legs(instance: Instance, legs: Iterable[int], eat, lst) -> set[int]:
    out = set()
    for lid in legs:
        leg = instance.legs[lid]
        e, s = eat[leg.origin], lst[leg.dest]
        if e is not None and s is not None and e <= leg.depart and leg.arrive <= s:
            out.add(lid)
    return out


def optimal_subnetwork(instance: Instance, request: int | Request) -> SubNetwork:
    r = _request(instance, request)
    legs = preprocess(instance, r)
    lst = lsp(instance, r, legs)
    eat = eap(instance, r, legs)
    kept = filter_legs(instance, legs, eat, lst)
    hubs = {instance.legs[l].origin for l in kept} | {instance.legs[l].dest for l in kept}
    return SubNetwork(r.id, tuple(eat), tuple(lst), frozenset(kept), frozenset(hubs))


def full_network(instance: Instance, request: int | Request) -> SubNetwork:
    """Unreduced network: every leg, no labels. Pricing applies the feasibility rules itself."""
    r = _request(instance, request)
    n = len(instance.hubs)
    return SubNetwork(r.id, (None,) * n, (None,) * n, frozenset(range(len(instance.legs))),
                      frozenset(range(n)))


def default_workers() -> int:
    env = os.environ.get("TPOSSP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def reduce_all(instance: Instance, workers: int | None = None, reduce: bool = True) -> dict[int, SubNetwork]:
    """Sub-network per request; results do not depend on execution order."""
    fn = optimal_subnetwork if reduce else full_network
    ids = [r.id for r in instance.requests]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda rid: fn(instance, rid), ids))
    else:
        results = [fn(instance, rid) for rid in ids]
    return dict(zip(ids, results))


class SubNetworkCache:
    """Memoizes sub-networks by (instance fingerprint, request data).

    Lets incremental runs recompute only newly added requests.
    """

    def __init__(self) -> None:
        self._store: dict[tuple, tuple[Instance, SubNetwork]] = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def _key(instance: Instance, r: Request) -> tuple:
        return (id(instance), r)

    def get(self, instance: Instance, request: int | Request) -> SubNetwork:
        r = _request(instance, request)
        key = self._key(instance, r)
        hit = self._store.get(key)
        if hit is None:
            self.misses += 1
            # keep the instance alive so its id cannot be reused
            hit = self._store[key] = (instance, optimal_subnetwork(instance, r))
        else:
            self.hits += 1
        return hit[1]


def summary(instance: Instance, subnetworks: Mapping[int, SubNetwork]) -> dict:
    before = 0
    after = 0
    for rid, sub in subnetworks.items():
        before += len(preprocess(instance, rid))
        after += len(sub.legs)
    total = len(instance.legs) * len(subnetworks)
    return {
        "requests": len(subnetworks),
        "leg_request_pairs": total,
        "after_preprocess": before,
        "after_reduction": after,
        "pruned_pct": round(100.0 * (1 - after / total), 3) if total else 0.0,
    }
