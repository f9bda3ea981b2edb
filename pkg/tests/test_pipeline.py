from __future__ import annotations

import json

import pytest

from flexplan.instances import linear_ramp_system, random_system
from flexplan.milp import fix_variables, solve
from flexplan.pipeline import (
    FIXED_SYMBOLS, MODEL_KINDS, SRPB, Stage1Error, build_model, extract_fixing_plan, run_stage1,
)
from flexplan.system import validate_system
from helpers import one_bus, replace, thermal

KINDS = ["EB", "EBs", "PB"]


def expansion_toy():
    unit = thermal(pmin=20.0, pmax=80.0, su_capability=80.0, sd_capability=80.0, invest_cost=500.0,
                   initial_units=0, max_new_units=3, no_load_cost=10.0)
    return validate_system(one_bus([150.0] * 3, [unit]))


@pytest.mark.parametrize("kind", KINDS)
def test_demand_forces_two_units(kind):
    spec = expansion_toy()
    # oracle: solve the operating problem for every build level, keep the cheapest
    ctx = build_model(spec, kind, tau=60)
    totals = {}
    for x in range(4):
        res = solve(fix_variables(ctx.model, {("x", ("g",)): x}), gap=0.0)
        if res.ok:
            totals[x] = res.objective
    best = min(totals, key=totals.get)
    sol = run_stage1(spec, kind, gap=1e-6, tau=60)
    assert best == 2
    assert sol.investments["g"] == 2
    assert sol.objective == pytest.approx(totals[2], rel=1e-6)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_zero_demand_builds_nothing(kind):
    unit = thermal(invest_cost=500.0, initial_units=0, max_new_units=3)
    sol = run_stage1(validate_system(one_bus([0.0] * 3, [unit])), kind, tau=60)
    assert sol.investments == {"g": 0.0}
    assert sol.objective == 0.0


def test_semirelaxed_equals_integer_when_relaxation_is_tight():
    # without no-load cost a fractional commitment saves nothing
    base = linear_ramp_system()
    spec = replace(base, thermal=(replace(base.thermal[0], no_load_cost=0.0),))
    sol = run_stage1(spec, SRPB, gap=1e-6)
    assert sol.stage1a_objective == pytest.approx(sol.objective, rel=1e-6)
    assert sol.objective == pytest.approx(run_stage1(spec, "PB", gap=1e-6).objective, rel=1e-6)


@pytest.mark.parametrize("seed", [0, 1])
def test_relaxed_stage_bounds_fixed_stage(seed):
    spec = random_system(seed, hours=6, n_scenarios=1, tau=15)
    sol = run_stage1(spec, SRPB, gap=1e-4, tau=15)
    assert sol.stage1a_objective <= sol.objective * (1 + 1e-4) + 1e-6
    assert sol.stage1a_costs["total"] == pytest.approx(sol.stage1a_objective, rel=1e-6)


def test_fixed_stage_infeasibility_is_reported_not_repaired():
    # a fractional commitment can serve 10 MW; a whole unit cannot go below 40
    unit = thermal(pmin=40.0, pmax=100.0, initial_units=0, max_new_units=1, invest_cost=1.0)
    with pytest.raises(Stage1Error, match="not re-expanded") as info:
        run_stage1(validate_system(one_bus([10.0, 10.0], [unit])), SRPB, tau=60)
    assert info.value.status == "infeasible"


def test_infeasible_reserve_reported_with_status():
    unit = thermal(initial_units=1, max_new_units=0, initial_on=1)
    spec = validate_system(one_bus([50.0], [unit], reserve_up=500.0))
    with pytest.raises(Stage1Error, match="infeasible") as info:
        run_stage1(spec, "PB", tau=60)
    assert info.value.status == "infeasible"
    if info.value.binding:
        assert any(name.startswith("reserve_up") for name in info.value.binding)


def test_unknown_model_kind():
    with pytest.raises(ValueError, match="unknown model kind"):
        run_stage1(expansion_toy(), "DC-OPF")


# -- solution contents ------------------------------------------------------------


@pytest.fixture(scope="module")
def solved():
    spec = random_system(2, hours=6, n_scenarios=2, tau=15)
    return spec, {k: run_stage1(spec, k, gap=1e-4, tau=15) for k in MODEL_KINDS}


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_commitment_identities_on_extracted_values(solved, kind):
    spec, sols = solved
    sol = sols[kind]
    u, y, z, d = (sol.family(s) for s in ("u", "y", "z", "delta"))
    for w in spec.scenarios:
        for g in spec.thermal:
            prev = g.initial_on
            for t in range(1, spec.grid.hours + 1):
                key = (w.id, g.id, t)
                assert u[key] - prev == y[key] - z[key]
                assert sum(d[(w.id, g.id, k, t)] for k in range(1, len(g.startup_segments) + 1)) == y[key]
                assert all(float(v).is_integer() for v in (u[key], y[key], z[key]))
                prev = u[key]


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_cost_decomposition_sums_to_objective(solved, kind):
    sol = solved[1][kind]
    c = sol.costs
    parts = c["invest_thermal"] + c["invest_ess"] + c["invest_vres"] + c["operating"]
    assert parts == pytest.approx(c["total"], rel=1e-6)
    assert c["total"] == pytest.approx(sol.objective, rel=1e-6)


def test_fixing_plan_contents(solved):
    sol = solved[1]["PB"]
    plan = extract_fixing_plan(sol)
    symbols = {sym for sym, _ in plan}
    assert symbols == set(FIXED_SYMBOLS)
    assert "phi" not in symbols and "phat" not in symbols and "c" not in symbols
    assert "gamma" not in {sym for sym, _ in extract_fixing_plan(sol, fix_gamma=False)}


@pytest.mark.parametrize("kind", KINDS)
def test_fixing_plan_recovers_operating_cost(solved, kind):
    sol = solved[1][kind]
    again = solve(fix_variables(sol.context.model, extract_fixing_plan(sol)), gap=1e-4)
    assert again.ok
    assert again.objective == pytest.approx(sol.objective, rel=2e-4)


def test_solution_serializes(solved):
    sol = solved[1][SRPB]
    doc = json.loads(sol.to_json())
    assert doc["model"] == SRPB and doc["stage1a_objective"] == sol.stage1a_objective
    assert doc["costs"]["total"] == sol.costs["total"]
    rows = list(sol.rows())
    assert [r[0] for r in rows] == sorted(r[0] for r in rows)
    assert {r[0] for r in rows} == set(sol.values)
