import itertools
import json
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from conftest import small_instance
from tpossp.generate import micro3
from tpossp.model import (InstanceFormatError, Leg, Request, add_dummy_schedules, compute_metrics, dummy_path,
                          instance_to_dict, leg_mile_cost, make_solution, read_instance, read_solution,
                          validate_instance, validate_path, validate_solution, write_instance, write_solution)
from tpossp.oracle import enumerate_paths


def test_micro3_is_valid(m3):
    assert validate_instance(m3) == []


def test_zero_travel_time_rejected(m3):
    bad = replace(m3, legs=(replace(m3.legs[0], arrive=m3.legs[0].depart),) + m3.legs[1:])
    assert "leg 0: travel time must be strictly positive" in validate_instance(bad)


def test_volume_outside_set(m3):
    bad = replace(m3, requests=(replace(m3.requests[0], volume=12),))
    assert validate_instance(bad) == ["request 0: volume not in {10,15,19,25}"]


def test_mile_cost_rounding():
    leg = Leg(0, 0, 0, 1, 0, 10, 50, 30, 1000)
    assert leg_mile_cost(leg, 10) == 50_000
    assert leg_mile_cost(leg, 19) == 95_000
    # 0.5 milli rounds up
    assert leg_mile_cost(replace(leg, miles=1, mile_rate=1), 15) == 2


class TestPaths:
    def test_feasible(self, m3):
        assert validate_path(m3, [0, 1], 0) == []

    def test_order(self, m3):
        late = replace(m3, legs=(replace(m3.legs[0], arrive=130),) + m3.legs[1:])
        assert validate_path(late, [0, 1], 0) == ["leg order violates g7"]

    def test_wrong_end(self, m3):
        assert validate_path(m3, [0], 0) == ["path does not reach q_r"]

    def test_unknown_leg(self, m3):
        with pytest.raises(KeyError):
            validate_path(m3, [7], 0)


def _two_long(m3):
    reqs = (replace(m3.requests[0], volume=25), Request(1, 0, 2, 0, 250, 25))
    return replace(m3, requests=reqs)


def test_capacity_violation(m3):
    inst = _two_long(m3)
    sol = make_solution(inst, [inst.make_path(0, [2]), inst.make_path(1, [2])])
    assert validate_solution(inst, sol) == ["leg capacity exceeded: 50 > 30 on leg 2"]


def test_inactive_schedule(m3):
    sol = make_solution(m3, [m3.make_path(0, [2])], [True, False])
    assert validate_solution(m3, sol) == ["schedule 1 inactive but leg 2 used"]


def test_metrics(m3, m3d):
    opt = make_solution(m3, [m3.make_path(0, [2])])
    m = compute_metrics(m3, opt)
    assert (m.objective, m.empty_miles, m.dummy_count) == (130_000, 0, 0)
    assert m.objective == m.schedule_cost + m.mile_cost
    # first schedule on, only its first leg loaded: the second leg runs empty
    partial = make_solution(m3, [m3.make_path(0, [0])], [True, False])
    assert partial.empty_miles == 30
    dummy = make_solution(m3d, [dummy_path(m3d, 0)])
    assert (compute_metrics(m3d, dummy).empty_miles, dummy.dummy_count) == (0, 1)


def test_metrics_refuse_invalid(m3):
    with pytest.raises(ValueError):
        compute_metrics(m3, make_solution(m3, [m3.make_path(0, [0])]))


class TestSerialization:
    def test_round_trip(self, m3):
        data = write_instance(m3)
        assert read_instance(data) == m3
        assert write_instance(read_instance(data)) == data

    def test_missing_legs(self, m3):
        doc = instance_to_dict(m3)
        del doc["legs"]
        with pytest.raises(InstanceFormatError, match="missing field: legs"):
            read_instance(json.dumps(doc))

    def test_dangling_schedule(self, m3):
        doc = instance_to_dict(m3)
        doc["legs"][1]["schedule"] = 99
        with pytest.raises(InstanceFormatError, match="dangling schedule ref") as info:
            read_instance(json.dumps(doc))
        assert info.value.path == "$.legs[1].schedule"

    def test_solution_round_trip(self, m3):
        sol = make_solution(m3, [m3.make_path(0, [0, 1])])
        assert read_solution(m3, write_solution(sol)) == sol

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.booleans())
    def test_random_round_trip(self, seed, dummies):
        inst = small_instance(seed, dummies)
        assert read_instance(write_instance(inst)) == inst


class TestDummies:
    def test_counts(self, m3, m3d):
        assert (len(m3d.schedules), len(m3d.legs)) == (3, 4)
        leg = m3d.legs[3]
        assert (leg.depart, leg.arrive, leg.capacity) == (0, 250, 10)
        assert m3d.schedules[2].is_dummy and m3d.schedules[2].request == 0
        assert validate_instance(m3d) == []

    def test_idempotent(self, m3d):
        assert add_dummy_schedules(m3d) is m3d

    def test_no_requests(self, m3):
        empty = replace(m3, requests=())
        assert add_dummy_schedules(empty) is empty

    def test_cost_with_coordinates(self):
        from tpossp.model import Hub
        inst = replace(micro3(), hubs=(Hub(0, 0, 0), Hub(1, 3, 0), Hub(2, 30, 40)))
        sched = add_dummy_schedules(inst).schedules[2]
        assert sched.fixed_cost == 2_000_000 + 2 * 2000 * 50


def _all_solutions(inst, cats):
    for combo in itertools.product(*cats):
        yield make_solution(inst, combo)


@pytest.mark.parametrize("seed", range(25))
def test_validator_matches_enumeration(seed):
    # any one-path-per-request choice among enumerated paths validates iff capacities hold
    inst = small_instance(seed + 500, dummies=True)
    cats = [enumerate_paths(inst, r.id) for r in inst.requests]
    for sol in itertools.islice(_all_solutions(inst, cats), 2000):
        load = {}
        for p in sol.paths:
            for l in p.legs:
                load[l] = load.get(l, 0) + inst.requests[p.request].volume
        fits = all(v <= inst.legs[l].capacity for l, v in load.items())
        assert (validate_solution(inst, sol) == []) == fits
