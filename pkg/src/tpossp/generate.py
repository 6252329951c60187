"""Seeded random instances and the small hand-checkable fixture."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .model import Hub, Instance, Leg, Request, Schedule, VOLUMES


@dataclass
class GeneratorConfig:
    hubs: int = 8
    schedules: int = 6
    legs_per_schedule: int = 3
    requests: int = 3
    # minutes added on both sides of every request window
    window_slack: int = 0
    # random slack drawn per request before widening
    base_slack: int = 60
    capacity_mix: dict[int, float] = field(default_factory=lambda: {30: 0.7, 25: 0.15, 20: 0.15})
    volume_mix: dict[int, float] = field(default_factory=lambda: {10: 0.5, 15: 0.2, 19: 0.15, 25: 0.15})
    mile_rates: tuple[int, ...] = (800, 1000, 1200)
    feasible_fraction: float = 0.8
    horizon: int = 1440
    grid: int = 400
    speed: float = 0.75  # miles per minute
    handling: int = 20
    schedule_base_cost: int = 100_000
    tractor_mile_cost: int = 1500
    seed: int = 0

    def check(self) -> None:
        for name in ("hubs", "schedules", "legs_per_schedule", "requests"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.schedules and self.legs_per_schedule and self.hubs < 2:
            raise ValueError("legs need at least two hubs")
        if self.requests and self.hubs < 2:
            raise ValueError("requests need at least two hubs")


def _pick(rng: random.Random, mix: dict[int, float]) -> int:
    keys = sorted(mix)
    return rng.choices(keys, weights=[mix[k] for k in keys])[0]


def generate(config: GeneratorConfig) -> Instance:
    """Random valid instance; the seed fully determines the output.

    Schedules are chains of legs along random hub tours. Most requests are
    carved out of existing leg chains (possibly switching schedule once) so
    that they are routable without a dummy; the rest are random hub pairs.
    """
    config.check()
    rng = random.Random(config.seed)
    hubs = [Hub(i, rng.randrange(config.grid), rng.randrange(config.grid)) for i in range(config.hubs)]

    def miles(a: int, b: int) -> int:
        return max(1, round(math.hypot(hubs[a].x - hubs[b].x, hubs[a].y - hubs[b].y)))

    legs: list[Leg] = []
    schedules: list[Schedule] = []
    for sid in range(config.schedules if config.legs_per_schedule else 0):
        cap = _pick(rng, config.capacity_mix)
        rate = rng.choice(config.mile_rates)
        hub = rng.randrange(config.hubs)
        t = rng.randrange(max(1, config.horizon // 2))
        ids = []
        total = 0
        for _ in range(config.legs_per_schedule):
            nxt = rng.randrange(config.hubs - 1)
            nxt = nxt + 1 if nxt >= hub else nxt
            m = miles(hub, nxt)
            dur = max(1, round(m / config.speed)) + config.handling
            lid = len(legs)
            legs.append(Leg(lid, sid, hub, nxt, t, t + dur, m, cap, rate))
            ids.append(lid)
            total += m
            t += dur + rng.randrange(0, 121)
            hub = nxt
        schedules.append(Schedule(sid, config.schedule_base_cost + config.tractor_mile_cost * total, tuple(ids)))

    by_origin: dict[int, list[Leg]] = {}
    for leg in legs:
        by_origin.setdefault(leg.origin, []).append(leg)

    requests: list[Request] = []
    for rid in range(config.requests):
        volume = _pick(rng, config.volume_mix)
        slack_a = rng.randrange(config.base_slack + 1)
        slack_b = rng.randrange(config.base_slack + 1)
        chain = _sample_chain(rng, schedules, legs, by_origin) if rng.random() < config.feasible_fraction else None
        if chain:
            o, d = chain[0].origin, chain[-1].dest
            e, l = chain[0].depart - slack_a, chain[-1].arrive + slack_b
        else:
            o = rng.randrange(config.hubs)
            d = rng.randrange(config.hubs - 1)
            d = d + 1 if d >= o else d
            e = rng.randrange(config.horizon)
            l = e + config.base_slack + rng.randrange(config.horizon // 2 + 1)
        e -= config.window_slack
        l += config.window_slack
        requests.append(Request(rid, o, d, e, l, volume))
    assert all(v in VOLUMES for v in config.volume_mix)
    return Instance(tuple(hubs), tuple(schedules), tuple(legs), tuple(requests))


def _sample_chain(rng: random.Random, schedules, legs, by_origin) -> list[Leg] | None:
    if not schedules:
        return None
    s = rng.choice(schedules)
    i = rng.randrange(len(s.legs))
    j = rng.randrange(i, len(s.legs))
    chain = [legs[k] for k in s.legs[i:j + 1]]
    if rng.random() < 0.5:
        last = chain[-1]
        nxt = [l for l in by_origin.get(last.dest, ()) if l.depart >= last.arrive and l.schedule != s.id]
        if nxt:
            chain.append(rng.choice(nxt))
    hubs = [chain[0].origin] + [l.dest for l in chain]
    while len(set(hubs)) != len(hubs):
        chain.pop()
        if not chain:
            return None
        hubs = [chain[0].origin] + [l.dest for l in chain]
    return chain


def micro3() -> Instance:
    """Three hubs, two schedules, one request.

    Schedule 0 runs A->B (50 mi) then B->C (30 mi) at fixed cost 100 units;
    schedule 1 runs A->C (90 mi) at 40 units. The request (one short trailer,
    window [0, 250]) costs 100+80 via schedule 0 and 40+90 via schedule 1.
    """
    hubs = (Hub(0), Hub(1), Hub(2))
    legs = (
        Leg(0, 0, 0, 1, 10, 100, 50, 30, 1000),
        Leg(1, 0, 1, 2, 120, 200, 30, 30, 1000),
        Leg(2, 1, 0, 2, 10, 150, 90, 30, 1000),
    )
    schedules = (Schedule(0, 100_000, (0, 1)), Schedule(1, 40_000, (2,)))
    requests = (Request(0, 0, 2, 0, 250, 10),)
    return Instance(hubs, schedules, legs, requests)
