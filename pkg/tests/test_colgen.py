from dataclasses import replace

import pytest

from conftest import desk_instance
from tpossp.colgen import (STABILIZED, STANDARD, CgParams, Column, StabilizationState, adjust_duals, build_rmp,
                           finish_integer, initial_columns, insert_realtime, round_solution, run_colgen, solve_cg)
from tpossp.model import Request, add_dummy_schedules, dummy_path, validate_solution
from tpossp.oracle import solve_exact
from tpossp.pricing import DualPrices
from tpossp.reduction import reduce_all
from tpossp.simplex import solve_lp


def _all_columns(m3d):
    return initial_columns(m3d) + [Column(0, m3d.make_path(0, (0, 1))), Column(0, m3d.make_path(0, (2,)))]


class TestRmp:
    def test_structure(self, m3d):
        rmp = build_rmp(m3d, _all_columns(m3d))
        assert (len(rmp.lam), len(rmp.y)) == (3, 3)
        # capacity and linking rows for the 4 legs, one convexity row
        assert (len(rmp.cap_rows), len(rmp.link_rows), len(rmp.conv_rows)) == (4, 4, 1)

    def test_dummy_only(self, m3d):
        sol = solve_lp(build_rmp(m3d, initial_columns(m3d)).lp)
        p = dummy_path(m3d, 0)
        assert sol.objective == pytest.approx(m3d.schedules[2].fixed_cost + p.mile_cost)

    def test_missing_request(self, m3d):
        with pytest.raises(ValueError):
            build_rmp(m3d, [])


class TestAdjustDuals:
    def test_weight_one(self):
        state = StabilizationState()
        d = DualPrices({0: -2.0})
        assert adjust_duals(state, d) is d

    def test_midpoint(self):
        state = StabilizationState(best_adjusted=DualPrices({0: -4.0}), weight=2.0)
        assert adjust_duals(state, DualPrices({0: -2.0})).pi_c[0] == pytest.approx(-3.0)

    def test_streak_and_reset(self):
        state = StabilizationState()
        first = adjust_duals(state, DualPrices({0: -2.0}))
        adjust_duals(state, DualPrices({0: -6.0}), new_dual_bound=10.0)
        assert (state.streak, state.weight, state.best_adjusted) == (1, 2.0, first)
        adjust_duals(state, DualPrices({0: -6.0}), new_dual_bound=12.0)
        assert (state.streak, state.weight) == (2, 3.0)
        adjust_duals(state, DualPrices({0: -6.0}), new_dual_bound=11.0)
        assert (state.streak, state.weight) == (0, 1.0)

    def test_cap(self):
        state = StabilizationState(max_weight=3)
        adjust_duals(state, DualPrices())
        for k in range(6):
            adjust_duals(state, DualPrices(), new_dual_bound=float(k))
        assert state.weight == 3.0


class TestRun:
    def test_micro3(self, m3d):
        cols, duals, rep = run_colgen(m3d, reduce_all(m3d, 1), CgParams(paths=50))
        assert rep.converged and len(rep.log) <= 3
        assert rep.lp_objective == pytest.approx(130_000)
        assert rep.lp_bound == pytest.approx(130_000)
        assert all(d <= 0 for d in duals.pi_c.values()) and all(d <= 0 for d in duals.pi_s.values())

    def test_no_iterations(self, m3d):
        cols, _, rep = run_colgen(m3d, reduce_all(m3d, 1), CgParams(iterations=0))
        assert rep.log == [] and [c.path.legs for c in cols] == [(3,)]
        sol, _ = solve_cg(m3d, CgParams(iterations=0))
        assert sol.dummy_count == 1

    def test_lp_non_increasing(self):
        inst = desk_instance(14)
        _, _, rep = run_colgen(inst, reduce_all(inst, 1), CgParams(paths=2, iterations=100))
        objs = [e["lp_objective"] for e in rep.log]
        assert all(b <= a + 1e-6 for a, b in zip(objs, objs[1:]))

    @pytest.mark.parametrize("seed", range(5))
    def test_weight_one_matches_standard(self, seed):
        inst = desk_instance(seed)
        subs = reduce_all(inst, 1)
        _, _, a = run_colgen(inst, subs, CgParams(paths=3, iterations=100, mode=STANDARD))
        _, _, b = run_colgen(inst, subs, CgParams(paths=3, iterations=100, mode=STABILIZED, max_weight=1))
        strip = lambda log: [{k: v for k, v in e.items() if k != "mode"} for e in log]
        assert strip(a.log) == strip(b.log)

    def test_report_deterministic(self):
        inst = desk_instance(3)
        a = solve_cg(inst, CgParams(paths=5))[1].as_dict()
        b = solve_cg(inst, CgParams(paths=5))[1].as_dict()
        assert a == b and "timings" not in a

    def test_bad_params(self, m3d):
        with pytest.raises(ValueError):
            run_colgen(m3d, reduce_all(m3d, 1), CgParams(mode="fancy"))


class TestFinish:
    def test_micro3(self, m3d):
        res = finish_integer(m3d, _all_columns(m3d), 130_000)
        assert [p.legs for p in res.solution.paths] == [(2,)]
        assert res.solution.active == (False, True, False)
        assert res.solution.objective == 130_000 and res.gap == 0
        assert res.branched == 0

    def test_zero_budget(self, m3d):
        res = finish_integer(m3d, _all_columns(m3d), 130_000, node_budget=0)
        assert res.flagged == "node budget exhausted" and res.solution.dummy_count == 1
        assert validate_solution(m3d, res.solution) == []

    def test_y_only_branching_is_valid(self):
        inst = desk_instance(14)
        cols, _, rep = run_colgen(inst, reduce_all(inst, 1), CgParams(paths=10, iterations=200))
        res = finish_integer(inst, cols, rep.lp_bound, branch_columns=False)
        assert validate_solution(inst, res.solution) == []
        assert res.solution.objective >= solve_exact(inst).objective

    def test_rounding_repairs_capacity(self, m3d):
        two = add_dummy_schedules(replace(m3d, requests=m3d.requests + (Request(1, 0, 2, 0, 250, 25),)))
        cols = initial_columns(two) + [Column(0, two.make_path(0, (2,))), Column(1, two.make_path(1, (2,)))]
        sol = round_solution(two, cols, {(0, (2,)): 1.0, (1, (2,)): 1.0}, [1])
        assert validate_solution(two, sol) == []
        # the short trailer moves off the shared leg
        assert [p.legs for p in sol.paths] == [(3,), (2,)]

    @pytest.mark.parametrize("seed", range(10))
    def test_sandwich(self, seed):
        inst = desk_instance(seed)
        sol, rep = solve_cg(inst, CgParams(paths=10, iterations=200))
        exact = solve_exact(inst).objective
        assert validate_solution(inst, sol) == []
        assert rep.converged and rep.lp_bound <= exact + 1e-6 * exact
        assert exact <= sol.objective and rep.gap >= -1e-9


class TestInsert:
    def test_zero_new(self, m3d):
        base, _ = solve_cg(m3d)
        res = insert_realtime(m3d, base, [])
        assert res.solution is base and res.marginal_cost == 0

    def test_spare_capacity_costs_miles_only(self, m3d):
        base, _ = solve_cg(m3d)
        res = insert_realtime(m3d, base, [m3d.requests[0]])
        assert validate_solution(res.instance, res.solution) == []
        assert res.solution.paths[1].legs == (2,)
        assert res.marginal_cost == 90_000

    def test_saturated_leg(self, m3d):
        base, _ = solve_cg(m3d)
        full = Request(0, 0, 2, 0, 250, 25)
        res = insert_realtime(m3d, base, [full])
        assert validate_solution(res.instance, res.solution) == []
        assert 2 not in res.solution.paths[1].legs

    def test_merged_validates(self):
        inst = desk_instance(5)
        base, _ = solve_cg(inst)
        more = desk_instance(6).requests[:3]
        res = insert_realtime(inst, base, more)
        assert validate_solution(res.instance, res.solution) == []
        assert res.solution.paths[: len(inst.requests)] == base.paths
