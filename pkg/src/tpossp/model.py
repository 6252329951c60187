"""Domain types, validation, metrics and JSON serialization.

Units used throughout the package:

* time: integer minutes from the start of the planning horizon;
* volume and capacity: deci-trailers (a short 28' trailer is 10, a long one 25,
  a tractor carries at most 30);
* money: integer milli-units. ``Leg.mile_rate`` is milli-units per mile per
  short trailer, so moving a request of volume ``v`` over leg ``l`` costs
  ``mile_rate * miles * v / 10`` (rounded half up).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

VOLUMES = (10, 15, 19, 25)
MAX_CAPACITY = 30

DEFAULT_MILE_RATE = 1000
DEFAULT_DUMMY_BASE = 2_000_000
DEFAULT_DUMMY_PER_MILE = 2000
DEFAULT_DUMMY_COST = 5_000_000


class InstanceFormatError(ValueError):
    """Raised when an instance or solution document cannot be parsed.

    ``path`` is a JSON-pointer-like location of the offending element.
    """

    def __init__(self, message: str, path: str = "$") -> None:
        super().__init__(f"{path}: {message}")
        self.message = message
        self.path = path


@dataclass(frozen=True)
class Hub:
    id: int
    x: int | None = None
    y: int | None = None


@dataclass(frozen=True)
class Leg:
    id: int
    schedule: int
    origin: int
    dest: int
    depart: int
    arrive: int
    miles: int
    capacity: int
    mile_rate: int = DEFAULT_MILE_RATE

    @property
    def duration(self) -> int:
        return self.arrive - self.depart


@dataclass(frozen=True)
class Schedule:
    id: int
    fixed_cost: int
    legs: tuple[int, ...]
    is_dummy: bool = False
    # request served by a dummy schedule; None for regular schedules
    request: int | None = None


@dataclass(frozen=True)
class Request:
    id: int
    origin: int
    dest: int
    earliest: int
    latest: int
    volume: int


def leg_mile_cost(leg: Leg, volume: int) -> int:
    """Cost of moving ``volume`` deci-trailers over ``leg``, in milli-units."""
    return (leg.mile_rate * leg.miles * volume + 5) // 10


@dataclass(frozen=True)
class Instance:
    hubs: tuple[Hub, ...]
    schedules: tuple[Schedule, ...]
    legs: tuple[Leg, ...]
    requests: tuple[Request, ...]
    # optional seed paths per request (legs of an existing plan)
    base_paths: tuple[tuple[int, tuple[int, ...]], ...] = ()
    out_legs: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    in_legs: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.hubs)
        out: list[list[int]] = [[] for _ in range(n)]
        inc: list[list[int]] = [[] for _ in range(n)]
        for leg in self.legs:
            if 0 <= leg.origin < n:
                out[leg.origin].append(leg.id)
            if 0 <= leg.dest < n:
                inc[leg.dest].append(leg.id)
        object.__setattr__(self, "out_legs", tuple(tuple(x) for x in out))
        object.__setattr__(self, "in_legs", tuple(tuple(x) for x in inc))

    def dummy_schedule_of(self) -> dict[int, int]:
        """Map request id -> id of its dummy schedule."""
        return {s.request: s.id for s in self.schedules if s.is_dummy and s.request is not None}

    def dummy_leg_owner(self) -> dict[int, int]:
        """Map dummy leg id -> request it is reserved for."""
        owner = {}
        for s in self.schedules:
            if s.is_dummy and s.request is not None:
                for lid in s.legs:
                    owner[lid] = s.request
        return owner

    def path_cost(self, request: int, legs: Iterable[int]) -> int:
        v = self.requests[request].volume
        return sum(leg_mile_cost(self.legs[lid], v) for lid in legs)

    def make_path(self, request: int, legs: Sequence[int]) -> "Path":
        legs = tuple(legs)
        return Path(request, legs, self.path_cost(request, legs))


@dataclass(frozen=True)
class Path:
    request: int
    legs: tuple[int, ...]
    mile_cost: int


@dataclass(frozen=True)
class Metrics:
    objective: int
    schedule_cost: int
    mile_cost: int
    empty_miles: int
    dummy_count: int

    def as_dict(self) -> dict[str, int]:
        return {
            "objective": self.objective,
            "schedule_cost": self.schedule_cost,
            "mile_cost": self.mile_cost,
            "empty_miles": self.empty_miles,
            "dummy_count": self.dummy_count,
        }


@dataclass(frozen=True)
class Solution:
    paths: tuple[Path, ...]
    active: tuple[bool, ...]
    objective: int
    schedule_cost: int
    mile_cost: int
    empty_miles: int = 0
    dummy_count: int = 0

    @property
    def metrics(self) -> Metrics:
        return Metrics(self.objective, self.schedule_cost, self.mile_cost, self.empty_miles, self.dummy_count)


def euclid_miles(a: Hub, b: Hub) -> int | None:
    if a.x is None or a.y is None or b.x is None or b.y is None:
        return None
    return int(round(math.hypot(a.x - b.x, a.y - b.y)))


# ---------------------------------------------------------------------------
# validation


def validate_instance(instance: Instance) -> list[str]:
    out: list[str] = []
    nh, ns, nl = len(instance.hubs), len(instance.schedules), len(instance.legs)
    for i, h in enumerate(instance.hubs):
        if h.id != i:
            out.append(f"hub {i}: id {h.id} is not its index")
    for i, leg in enumerate(instance.legs):
        if leg.id != i:
            out.append(f"leg {i}: id {leg.id} is not its index")
        if not 0 <= leg.schedule < ns:
            out.append(f"leg {i}: dangling schedule ref {leg.schedule}")
        elif i not in instance.schedules[leg.schedule].legs:
            out.append(f"leg {i}: not listed by schedule {leg.schedule}")
        if not 0 <= leg.origin < nh or not 0 <= leg.dest < nh:
            out.append(f"leg {i}: dangling hub ref")
        if leg.arrive <= leg.depart:
            out.append(f"leg {i}: travel time must be strictly positive")
        if leg.origin == leg.dest:
            out.append(f"leg {i}: origin equals destination")
        if not 0 < leg.capacity <= MAX_CAPACITY:
            out.append(f"leg {i}: capacity {leg.capacity} outside (0, {MAX_CAPACITY}]")
        if leg.miles < 0:
            out.append(f"leg {i}: negative miles")
        if leg.mile_rate < 0:
            out.append(f"leg {i}: negative mile rate")
    for i, s in enumerate(instance.schedules):
        if s.id != i:
            out.append(f"schedule {i}: id {s.id} is not its index")
        if s.fixed_cost < 0:
            out.append(f"schedule {i}: negative fixed cost")
        if any(not 0 <= lid < nl for lid in s.legs):
            out.append(f"schedule {i}: dangling leg ref")
            continue
        for lid in s.legs:
            if instance.legs[lid].schedule != i:
                out.append(f"schedule {i}: leg {lid} belongs to schedule {instance.legs[lid].schedule}")
        for a, b in zip(s.legs, s.legs[1:]):
            la, lb = instance.legs[a], instance.legs[b]
            if lb.depart < la.arrive or lb.origin != la.dest:
                out.append(f"schedule {i}: legs {a} and {b} do not chain")
        if s.is_dummy:
            if len(s.legs) != 1:
                out.append(f"schedule {i}: dummy schedule must have exactly one leg")
            if s.request is None or not 0 <= s.request < len(instance.requests):
                out.append(f"schedule {i}: dummy schedule without a valid request")
            elif len(s.legs) == 1:
                r, leg = instance.requests[s.request], instance.legs[s.legs[0]]
                if (leg.origin, leg.dest) != (r.origin, r.dest):
                    out.append(f"schedule {i}: dummy leg does not serve request {s.request}")
    for i, r in enumerate(instance.requests):
        if r.id != i:
            out.append(f"request {i}: id {r.id} is not its index")
        if not 0 <= r.origin < nh or not 0 <= r.dest < nh:
            out.append(f"request {i}: dangling hub ref")
        if r.origin == r.dest:
            out.append(f"request {i}: origin equals destination")
        if r.earliest >= r.latest:
            out.append(f"request {i}: empty time window")
        if r.volume not in VOLUMES:
            out.append(f"request {i}: volume not in {{10,15,19,25}}")
    for r, legs in instance.base_paths:
        if not 0 <= r < len(instance.requests) or any(not 0 <= lid < nl for lid in legs):
            out.append(f"base path of request {r}: dangling reference")
    return out


def validate_path(instance: Instance, path: Path | Sequence[int], request: int | None = None,
                  simple: bool = True) -> list[str]:
    """Check chaining, time window and origin/destination rules of a path.

    With ``simple=False`` a hub may be visited more than once (a time-feasible
    walk); the arc formulation admits such walks.
    Raises ``KeyError`` for an unknown leg id.
    """
    if isinstance(path, Path):
        request, legs = path.request, path.legs
    else:
        legs = tuple(path)
    if request is None or not 0 <= request < len(instance.requests):
        raise KeyError(f"unknown request {request}")
    for lid in legs:
        if not 0 <= lid < len(instance.legs):
            raise KeyError(f"unknown leg {lid}")
    r = instance.requests[request]
    if not legs:
        return ["path is empty"]
    out: list[str] = []
    L = [instance.legs[lid] for lid in legs]
    if L[0].origin != r.origin:
        out.append("path does not start at p_r")
    if L[-1].dest != r.dest:
        out.append("path does not reach q_r")
    for a, b in zip(L, L[1:]):
        if a.dest != b.origin:
            out.append(f"legs {a.id} and {b.id} do not share a hub")
        if b.depart < a.arrive:
            out.append("leg order violates g7")
    if any(leg.dest == r.origin for leg in L):
        out.append("path re-enters p_r")
    if any(leg.origin == r.dest for leg in L):
        out.append("path leaves q_r")
    if L[0].depart < r.earliest:
        out.append("path departs before t^est_r")
    if L[-1].arrive > r.latest:
        out.append("path arrives after t^lat_r")
    for leg in L:
        if leg.capacity < r.volume:
            out.append(f"leg {leg.id}: capacity {leg.capacity} below volume {r.volume}")
    owner = instance.dummy_leg_owner()
    for leg in L:
        if owner.get(leg.id, request) != request:
            out.append(f"leg {leg.id}: dummy leg of request {owner[leg.id]}")
    if simple:
        hubs = [L[0].origin] + [leg.dest for leg in L]
        if len(set(hubs)) != len(hubs):
            out.append("path visits a hub twice")
    return out


def _leg_loads(instance: Instance, paths: Iterable[Path]) -> list[int]:
    load = [0] * len(instance.legs)
    for p in paths:
        v = instance.requests[p.request].volume
        for lid in p.legs:
            load[lid] += v
    return load


def validate_solution(instance: Instance, solution: Solution) -> list[str]:
    out: list[str] = []
    nr = len(instance.requests)
    seen = sorted(p.request for p in solution.paths)
    if seen != list(range(nr)):
        out.append("solution must hold exactly one path per request")
        return out
    if len(solution.active) != len(instance.schedules):
        out.append("active vector length does not match schedules")
        return out
    for p in solution.paths:
        try:
            errs = validate_path(instance, p)
        except KeyError as exc:
            out.append(f"request {p.request}: {exc.args[0]}")
            continue
        out.extend(f"request {p.request}: {e}" for e in errs)
        if p.mile_cost != instance.path_cost(p.request, p.legs):
            out.append(f"request {p.request}: mile cost mismatch")
    if out:
        return out
    load = _leg_loads(instance, solution.paths)
    for leg, used in zip(instance.legs, load):
        if used > leg.capacity:
            out.append(f"leg capacity exceeded: {used} > {leg.capacity} on leg {leg.id}")
        if used and not solution.active[leg.schedule]:
            out.append(f"schedule {leg.schedule} inactive but leg {leg.id} used")
    sched = sum(s.fixed_cost for s, a in zip(instance.schedules, solution.active) if a)
    miles = sum(p.mile_cost for p in solution.paths)
    if sched != solution.schedule_cost or miles != solution.mile_cost:
        out.append("objective breakdown inconsistent")
    if solution.objective != sched + miles:
        out.append(f"objective {solution.objective} != {sched + miles}")
    return out


def compute_metrics(instance: Instance, solution: Solution) -> Metrics:
    """Recompute objective breakdown, empty miles and dummy count.

    Raises ``ValueError`` when the solution does not validate.
    """
    errs = validate_solution(instance, solution)
    if errs:
        raise ValueError("invalid solution: " + "; ".join(errs))
    return _metrics(instance, solution.paths, solution.active)


def _metrics(instance: Instance, paths: Sequence[Path], active: Sequence[bool]) -> Metrics:
    load = _leg_loads(instance, paths)
    sched = sum(s.fixed_cost for s, a in zip(instance.schedules, active) if a)
    miles = sum(p.mile_cost for p in paths)
    empty = 0
    dummies = 0
    for s, a in zip(instance.schedules, active):
        if not a:
            continue
        if s.is_dummy:
            dummies += 1
            continue
        empty += sum(instance.legs[lid].miles for lid in s.legs if load[lid] == 0)
    return Metrics(sched + miles, sched, miles, empty, dummies)


def make_solution(instance: Instance, paths: Iterable[Path], active: Sequence[bool] | None = None) -> Solution:
    """Assemble a Solution; ``active`` defaults to the schedules the paths use."""
    paths = tuple(sorted(paths, key=lambda p: p.request))
    if active is None:
        flags = [False] * len(instance.schedules)
        for p in paths:
            for lid in p.legs:
                flags[instance.legs[lid].schedule] = True
        active = flags
    m = _metrics(instance, paths, active)
    return Solution(paths, tuple(bool(a) for a in active), m.objective, m.schedule_cost,
                    m.mile_cost, m.empty_miles, m.dummy_count)


# ---------------------------------------------------------------------------
# dummy schedules


def dummy_cost(instance: Instance, request: Request, base: int = DEFAULT_DUMMY_BASE,
               per_mile: int = DEFAULT_DUMMY_PER_MILE, constant: int = DEFAULT_DUMMY_COST) -> int:
    miles = euclid_miles(instance.hubs[request.origin], instance.hubs[request.dest])
    if miles is None:
        return constant
    return base + 2 * per_mile * miles


def add_dummy_schedules(instance: Instance, *, base: int = DEFAULT_DUMMY_BASE,
                        per_mile: int = DEFAULT_DUMMY_PER_MILE, constant: int = DEFAULT_DUMMY_COST,
                        mile_rate: int = DEFAULT_MILE_RATE, dummy_miles: int = 0) -> Instance:
    """Add one direct origin->destination schedule per request lacking one.

    The leg departs at the request's earliest time and arrives at its latest
    time with capacity equal to the request volume. ``dummy_miles`` is used
    when hubs carry no coordinates.
    """
    have = instance.dummy_schedule_of()
    schedules = list(instance.schedules)
    legs = list(instance.legs)
    for r in instance.requests:
        if r.id in have:
            continue
        miles = euclid_miles(instance.hubs[r.origin], instance.hubs[r.dest])
        sid, lid = len(schedules), len(legs)
        legs.append(Leg(lid, sid, r.origin, r.dest, r.earliest, r.latest,
                        dummy_miles if miles is None else miles, r.volume, mile_rate))
        schedules.append(Schedule(sid, dummy_cost(instance, r, base, per_mile, constant), (lid,),
                                  is_dummy=True, request=r.id))
    if len(legs) == len(instance.legs):
        return instance
    return replace(instance, schedules=tuple(schedules), legs=tuple(legs))


def dummy_path(instance: Instance, request: int) -> Path:
    sid = instance.dummy_schedule_of()[request]
    return instance.make_path(request, instance.schedules[sid].legs)


# ---------------------------------------------------------------------------
# serialization


def instance_to_dict(instance: Instance) -> dict[str, Any]:
    hubs = []
    for h in instance.hubs:
        d: dict[str, Any] = {"id": h.id}
        if h.x is not None:
            d["x"] = h.x
        if h.y is not None:
            d["y"] = h.y
        hubs.append(d)
    schedules = []
    for s in instance.schedules:
        d = {"id": s.id, "fixed_cost": s.fixed_cost, "is_dummy": s.is_dummy, "legs": list(s.legs)}
        if s.request is not None:
            d["request"] = s.request
        schedules.append(d)
    doc: dict[str, Any] = {
        "hubs": hubs,
        "schedules": schedules,
        "legs": [
            {"id": l.id, "schedule": l.schedule, "origin": l.origin, "dest": l.dest, "depart": l.depart,
             "arrive": l.arrive, "miles": l.miles, "capacity": l.capacity, "mile_rate": l.mile_rate}
            for l in instance.legs
        ],
        "requests": [
            {"id": r.id, "origin": r.origin, "dest": r.dest, "earliest": r.earliest, "latest": r.latest,
             "volume": r.volume}
            for r in instance.requests
        ],
    }
    if instance.base_paths:
        doc["base_paths"] = [{"request": r, "legs": list(legs)} for r, legs in instance.base_paths]
    return doc


def dumps(doc: Mapping[str, Any]) -> str:
    """Canonical JSON text used for every file the package writes."""
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_instance(instance: Instance) -> bytes:
    return dumps(instance_to_dict(instance)).encode("utf-8")


def _req(obj: Any, key: str, path: str) -> Any:
    if not isinstance(obj, dict):
        raise InstanceFormatError("expected an object", path)
    if key not in obj:
        raise InstanceFormatError(f"missing field: {key}", path)
    return obj[key]


def _int(obj: Any, key: str, path: str, default: Any = ...) -> Any:
    if default is not ... and key not in obj:
        return default
    val = _req(obj, key, path)
    if isinstance(val, bool) or not isinstance(val, int):
        raise InstanceFormatError(f"field {key} must be an integer", f"{path}.{key}")
    return val


def _array(obj: Any, key: str, path: str) -> list:
    val = _req(obj, key, path)
    if not isinstance(val, list):
        raise InstanceFormatError(f"field {key} must be an array", f"{path}.{key}")
    return val


def _load_json(data: bytes | str) -> Any:
    try:
        return json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InstanceFormatError(f"malformed JSON: {exc}") from exc


def instance_from_dict(doc: Any) -> Instance:
    for key in ("hubs", "schedules", "legs", "requests"):
        _array(doc, key, "$")
    hubs = []
    for i, h in enumerate(doc["hubs"]):
        p = f"$.hubs[{i}]"
        hubs.append(Hub(_int(h, "id", p), _int(h, "x", p, None), _int(h, "y", p, None)))
    nh, ns = len(hubs), len(doc["schedules"])
    schedules = []
    for i, s in enumerate(doc["schedules"]):
        p = f"$.schedules[{i}]"
        legs = _array(s, "legs", p) if "legs" in s else None
        dummy = s.get("is_dummy", False) if isinstance(s, dict) else False
        if not isinstance(dummy, bool):
            raise InstanceFormatError("field is_dummy must be a boolean", f"{p}.is_dummy")
        schedules.append((_int(s, "id", p), _int(s, "fixed_cost", p), legs, dummy, _int(s, "request", p, None)))
    legs = []
    for i, l in enumerate(doc["legs"]):
        p = f"$.legs[{i}]"
        leg = Leg(_int(l, "id", p), _int(l, "schedule", p), _int(l, "origin", p), _int(l, "dest", p),
                  _int(l, "depart", p), _int(l, "arrive", p), _int(l, "miles", p), _int(l, "capacity", p),
                  _int(l, "mile_rate", p, DEFAULT_MILE_RATE))
        if not 0 <= leg.schedule < ns:
            raise InstanceFormatError(f"dangling schedule ref {leg.schedule}", f"{p}.schedule")
        for key in ("origin", "dest"):
            if not 0 <= getattr(leg, key) < nh:
                raise InstanceFormatError(f"dangling hub ref {getattr(leg, key)}", f"{p}.{key}")
        legs.append(leg)
    by_sched: dict[int, list[int]] = {}
    for leg in legs:
        by_sched.setdefault(leg.schedule, []).append(leg.id)
    sched_objs = []
    for i, (sid, cost, lids, dummy, req) in enumerate(schedules):
        if lids is None:
            lids = sorted(by_sched.get(i, []), key=lambda k: (legs[k].depart, k))
        for j, lid in enumerate(lids):
            if isinstance(lid, bool) or not isinstance(lid, int) or not 0 <= lid < len(legs):
                raise InstanceFormatError(f"dangling leg ref {lid}", f"$.schedules[{i}].legs[{j}]")
        sched_objs.append(Schedule(sid, cost, tuple(lids), dummy, req))
    requests = []
    for i, r in enumerate(doc["requests"]):
        p = f"$.requests[{i}]"
        req = Request(_int(r, "id", p), _int(r, "origin", p), _int(r, "dest", p), _int(r, "earliest", p),
                      _int(r, "latest", p), _int(r, "volume", p))
        for key in ("origin", "dest"):
            if not 0 <= getattr(req, key) < nh:
                raise InstanceFormatError(f"dangling hub ref {getattr(req, key)}", f"{p}.{key}")
        requests.append(req)
    base = []
    for i, b in enumerate(doc.get("base_paths", [])):
        p = f"$.base_paths[{i}]"
        base.append((_int(b, "request", p), tuple(_array(b, "legs", p))))
    inst = Instance(tuple(hubs), tuple(sched_objs), tuple(legs), tuple(requests), tuple(base))
    errs = validate_instance(inst)
    if errs:
        raise InstanceFormatError("invariant violation: " + "; ".join(errs))
    return inst


def read_instance(data: bytes | str) -> Instance:
    return instance_from_dict(_load_json(data))


def solution_to_dict(solution: Solution) -> dict[str, Any]:
    return {
        "paths": [{"request": p.request, "legs": list(p.legs)} for p in solution.paths],
        "active": [i for i, a in enumerate(solution.active) if a],
        "metrics": solution.metrics.as_dict(),
    }


def write_solution(solution: Solution) -> bytes:
    return dumps(solution_to_dict(solution)).encode("utf-8")


def solution_from_dict(instance: Instance, doc: Any) -> Solution:
    paths = []
    for i, p in enumerate(_array(doc, "paths", "$")):
        where = f"$.paths[{i}]"
        r = _int(p, "request", where)
        legs = _array(p, "legs", where)
        if not 0 <= r < len(instance.requests):
            raise InstanceFormatError(f"dangling request ref {r}", f"{where}.request")
        for j, lid in enumerate(legs):
            if isinstance(lid, bool) or not isinstance(lid, int) or not 0 <= lid < len(instance.legs):
                raise InstanceFormatError(f"dangling leg ref {lid}", f"{where}.legs[{j}]")
        paths.append(instance.make_path(r, legs))
    flags = [False] * len(instance.schedules)
    for j, sid in enumerate(_array(doc, "active", "$")):
        if isinstance(sid, bool) or not isinstance(sid, int) or not 0 <= sid < len(flags):
            raise InstanceFormatError(f"dangling schedule ref {sid}", f"$.active[{j}]")
        flags[sid] = True
    return make_solution(instance, paths, flags)


def read_solution(instance: Instance, data: bytes | str) -> Solution:
    return solution_from_dict(instance, _load_json(data))
