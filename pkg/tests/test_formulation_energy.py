from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexplan.formulation.common import Context, build_uc_logic
from flexplan.formulation.energy import (
    EB, EBS, EnergyFormulationConfig, build_energy_model, declare_energy_variables,
)
from flexplan.instances import random_system
from flexplan.milp import INFEASIBLE, fix_variables, solve
from flexplan.system import SLOW, StartupSegment, validate_system
from helpers import one_bus, replace, solar, storage, thermal, two_bus
from oracles import (
    commitment_polytope, extreme, family_counts, hull_gap, row_terms, rows_of, symbol_counts,
    with_objective,
)


def eb(spec, variant=EB, tau=60, end_soc=True):
    return build_energy_model(validate_system(spec), EnergyFormulationConfig(variant, tau, end_soc=end_soc))


def col(ctx, sym, *idx):
    return ctx.model.var(sym, *idx)


def solve_fixed(ctx, fixes, gap=0.0):
    plan = {(sym, tuple(idx)): v for (sym, *idx), v in fixes.items()}
    return solve(fix_variables(ctx.model, plan), gap=gap)


def value(ctx, res, sym, *idx):
    return float(res.values[col(ctx, sym, *idx)])


# -- objective ------------------------------------------------------------------


def test_investment_only_cost():
    unit = thermal(invest_cost=1000.0, initial_units=0, max_new_units=2)
    ctx = eb(one_bus([0.0], [unit]))
    res = solve_fixed(ctx, {("x", "g"): 2})
    assert res.objective == pytest.approx(2000.0)


def test_energy_and_emission_contribution():
    unit = thermal(pmin=10.0, var_cost=5.0, emission_rate=0.1, co2_price=20.0, initial_on=1)
    ctx = eb(one_bus([10.0], [unit]))
    assert ctx.model.obj[col(ctx, "ehat", "w1", "g", 1)] == pytest.approx(7.0)
    assert solve(ctx.model).objective == pytest.approx(70.0)


def test_coldest_segment_cost():
    unit = thermal(startup_segments=(StartupSegment(1, 100.0), StartupSegment(4, 900.0)))
    ctx = eb(one_bus([0.0, 0.0], [unit]))
    assert ctx.model.obj[col(ctx, "delta", "w1", "g", 2, 1)] == 900.0
    assert ctx.model.obj[col(ctx, "delta", "w1", "g", 1, 1)] == 100.0


# -- system constraints ---------------------------------------------------------


def test_single_asset_balance():
    ctx = eb(one_bus([100.0, 100.0], [thermal(initial_on=1)]))
    res = solve(ctx.model)
    assert [value(ctx, res, "ehat", "w1", "g", t) for t in (1, 2)] == pytest.approx([100.0, 100.0])


def test_up_reserve_beyond_headroom_is_infeasible():
    unit = thermal(initial_on=1, initial_output=20.0)
    assert solve(eb(one_bus([60.0], [unit], reserve_up=40.0)).model).ok
    assert solve(eb(one_bus([60.0], [unit], reserve_up=50.0)).model).status == INFEASIBLE


def test_congested_line_splits_supply():
    cheap = thermal("cheap", "b1", pmin=1.0, su_capability=100.0, sd_capability=100.0, var_cost=10.0,
                    initial_on=1)
    local = thermal("local", "b2", pmin=1.0, su_capability=100.0, sd_capability=100.0, var_cost=50.0,
                    initial_on=1)
    ctx = eb(two_bus([15.0], [cheap, local], limit=10.0))
    res = solve(ctx.model)
    assert value(ctx, res, "ehat", "w1", "cheap", 1) == pytest.approx(10.0)
    assert value(ctx, res, "ehat", "w1", "local", 1) == pytest.approx(5.0)
    row = rows_of(ctx.model, "flow_max")[0]
    con = ctx.model.constraints[row]
    flow = (ctx.model.matrix() @ res.values)[row] - (con.rhs - 10.0)  # demand term sits in the rhs
    assert abs(flow) == pytest.approx(10.0)


# -- investment links -------------------------------------------------------------


def test_no_installed_units_means_no_commitment():
    unit = thermal(pmin=10.0, initial_units=0, max_new_units=2)
    other = thermal("other", pmin=10.0, initial_on=1)
    ctx = eb(one_bus([50.0], [unit, other]))
    u = col(ctx, "u", "w1", "g", 1)
    fixed0 = fix_variables(ctx.model, {("x", ("g",)): 0})
    fixed2 = fix_variables(ctx.model, {("x", ("g",)): 2})
    assert solve(with_objective(fixed0, {u: -1.0})).values[u] == 0.0
    assert solve(with_objective(fixed2, {u: -1.0})).values[u] == 2.0


def test_renewable_energy_bounded_by_availability():
    pv = solar(profile=[0.3], initial_mw=100.0)
    ctx = eb(one_bus([100.0], [thermal(pmin=10.0, initial_on=1)], renewables=[pv]))
    assert extreme(ctx.model, col(ctx, "ehat", "w1", "pv", 1)) == pytest.approx(30.0)


def test_storage_headroom_limits_up_reserve():
    ctx = eb(one_bus([70.0], [thermal(initial_on=1)], [storage(epr=4.0)]), end_soc=False)
    fixed = fix_variables(ctx.model, {("ehat", ("w1", "s", 1)): 30.0, ("chat", ("w1", "s", 1)): 0.0})
    rup = col(ctx, "rup", "w1", "s", 1)
    assert solve(with_objective(fixed, {rup: -1.0})).values[rup] == pytest.approx(20.0)


# -- commitment logic -----------------------------------------------------------


def uc_only(spec):
    ctx = Context(validate_system(spec), tau=60, include_network=False)
    declare_energy_variables(ctx)
    build_uc_logic(ctx)
    return ctx


def test_startup_follows_state_change():
    ctx = uc_only(one_bus([0.0] * 4, [thermal()]))
    fixed = fix_variables(ctx.model, {("u", ("w1", "g", t)): v for t, v in zip(range(1, 5), (0, 0, 1, 1))})
    cost = {c: 1.0 for s in ("y", "z") for c in ctx.model.vars.family(s)}
    res = solve(with_objective(fixed, cost))
    assert value(ctx, res, "y", "w1", "g", 3) == 1.0
    assert value(ctx, res, "z", "w1", "g", 3) == 0.0


def test_minimum_up_time_holds_units_on():
    ctx = uc_only(one_bus([0.0] * 5, [thermal(min_up=3)]))
    fixed = fix_variables(ctx.model, {("y", ("w1", "g", 2)): 1})
    res = solve(with_objective(fixed, {c: 1.0 for c in ctx.model.vars.family("u")}))
    assert [value(ctx, res, "u", "w1", "g", t) for t in range(1, 6)] == [0, 1, 1, 1, 0]


@pytest.mark.parametrize("path, expected", [((1, 0, 0, 0, 0, 0, 1), (0.0, 1.0)), ((1, 0, 0, 1), (1.0, 0.0))])
def test_startup_type_follows_offline_duration(path, expected):
    unit = thermal(startup_segments=(StartupSegment(2, 50.0), StartupSegment(4, 500.0)), initial_on=1)
    ctx = uc_only(one_bus([0.0] * len(path), [unit]))
    fixed = fix_variables(ctx.model, {("u", ("w1", "g", t)): v for t, v in enumerate(path, start=1)})
    costs = {ctx.model.var("delta", "w1", "g", k, t): c for t in range(1, len(path) + 1)
             for k, c in ((1, 50.0), (2, 500.0))}
    res = solve(with_objective(fixed, costs))
    t = len(path)
    assert (value(ctx, res, "delta", "w1", "g", 1, t), value(ctx, res, "delta", "w1", "g", 2, t)) == expected


# -- thermal output -----------------------------------------------------------------


@pytest.mark.parametrize("demand, feasible", [(100.0, True), (300.0, True), (99.0, False), (301.0, False)])
def test_committed_output_range(demand, feasible):
    unit = thermal(pmin=100.0, pmax=300.0, su_capability=300.0, sd_capability=300.0, min_up=2,
                   initial_on=1)
    assert solve(eb(one_bus([demand], [unit])).model).ok is feasible


@pytest.mark.parametrize("demand, feasible", [(60.0, True), (61.0, False)])
def test_one_hour_run_capped_by_start_and_stop_capabilities(demand, feasible):
    unit = thermal(pmin=40.0, pmax=100.0, su_capability=60.0, sd_capability=70.0)
    ctx = eb(one_bus([demand, 0.0], [unit]))
    assert ctx.model.has_constraint("cap_sd(w1,g,1)") and ctx.model.has_constraint("cap_su(w1,g,1)")
    assert solve(ctx.model).ok is feasible


def slow_unit(**kw):
    base = dict(pmin=100.0, pmax=300.0, su_capability=100.0, sd_capability=100.0, sd_duration=2,
                start_class=SLOW, startup_segments=(StartupSegment(1, 10.0, 2),))
    base.update(kw)
    return thermal(**base)


def test_startup_trajectory_energy_precedes_synchronization():
    demand = [0.0, 25.0, 75.0, 100.0]
    ctx = eb(one_bus(demand, [slow_unit()]), EBS)
    res = solve(ctx.model)
    assert res.ok
    assert [value(ctx, res, "ehat", "w1", "g", t) for t in range(1, 5)] == pytest.approx(demand)
    assert value(ctx, res, "delta", "w1", "g", 1, 4) == 1.0
    # without trajectories the same profile cannot be met
    assert solve(eb(one_bus(demand, [slow_unit()]), EB).model).status == INFEASIBLE


def test_shutdown_trajectory_energy_follows_desynchronization():
    demand = [100.0, 75.0, 25.0, 0.0]
    ctx = eb(one_bus(demand, [slow_unit(initial_on=1)]), EBS)
    res = solve(ctx.model)
    assert res.ok and value(ctx, res, "z", "w1", "g", 2) == 1.0


def test_zero_trajectories_reproduce_plain_energy_model():
    zero = dict(su_trajectory=((0.0,), (0.0,)), sd_trajectory=(0.0, 0.0),
                startup_segments=(StartupSegment(1, 200.0), StartupSegment(3, 400.0)))
    units = [thermal("a", pmin=40.0, pmax=100.0, no_load_cost=30.0, initial_on=1, min_down=2, **zero),
             thermal("b", pmin=20.0, pmax=80.0, var_cost=30.0, min_up=2, **zero)]
    spec = one_bus([80.0, 150.0, 100.0, 40.0, 90.0, 160.0], units, reserve_up=10.0)
    a, b = eb(spec, EB), eb(spec, EBS)
    ra, rb = solve(a.model, gap=1e-9), solve(b.model, gap=1e-9)
    assert ra.ok and rb.ok
    assert rb.objective == pytest.approx(ra.objective, abs=1e-6)
    assert ra.family(a.model, "u") == rb.family(b.model, "u")


# -- storage --------------------------------------------------------------------------


def storage_case(**kw):
    return eb(one_bus([50.0, 50.0], [thermal(initial_on=1, initial_output=10.0)], [storage(**kw)]),
              end_soc=False)


def test_discharge_mode_blocks_charging():
    ctx = storage_case(epr=4.0)
    chat = col(ctx, "chat", "w1", "s", 1)
    on = fix_variables(ctx.model, {("gamma", ("w1", "s", 1)): 1})
    off = fix_variables(ctx.model, {("gamma", ("w1", "s", 1)): 0})
    assert solve(with_objective(on, {chat: -1.0})).values[chat] == 0.0
    assert solve(with_objective(off, {chat: -1.0})).values[chat] > 0.0


def test_inventory_arithmetic():
    ctx = storage_case()
    terms = row_terms(ctx.model, "inventory(w1,s,2)")
    vals = {("phi", ("w1", "s", 1)): 5.0, ("chat", ("w1", "s", 2)): 10.0, ("ehat", ("w1", "s", 2)): 0.0,
            ("phi", ("w1", "s", 2)): 14.0}
    assert sum(a * vals[k] for k, a in terms.items()) == pytest.approx(ctx.model.constraint(
        "inventory(w1,s,2)").rhs)
    assert terms[("chat", ("w1", "s", 2))] == -0.9


def test_empty_store_cannot_offer_up_reserve():
    ctx = storage_case(initial_soc_fraction=0.0)
    rup = col(ctx, "rup", "w1", "s", 1)
    fixed = fix_variables(ctx.model, {("phi", ("w1", "s", 1)): 0.0})
    assert solve(with_objective(fixed, {rup: -1.0})).values[rup] == pytest.approx(0.0)
    assert extreme(ctx.model, rup) > 0.0


# -- flexibility ---------------------------------------------------------------------


def test_ramp_row_coefficients():
    ctx = eb(one_bus([50.0, 50.0], [thermal(ramp_up=1.0, initial_on=1)]), tau=5)
    terms = row_terms(ctx.model, "ramp_up(w1,g,2)")
    assert terms == {("e", ("w1", "g", 2)): 1.0, ("rup", ("w1", "g", 2)): 1.0, ("u", ("w1", "g", 2)): -5.0,
                     ("e", ("w1", "g", 1)): -1.0}
    assert ctx.model.constraint("ramp_up(w1,g,2)").rhs == 0.0


def test_storage_switches_from_charge_to_discharge():
    unit = thermal(pmin=40.0, pmax=200.0, initial_on=1, initial_output=60.0)
    bess = storage(initial_mw=100.0, ramp_down=0.08, ramp_up=0.08)
    ctx = eb(one_bus([100.0, 100.0], [unit], [bess]), tau=5, end_soc=False)
    res = solve_fixed(ctx, {("chat", "w1", "s", 1): 20.0, ("ehat", "w1", "s", 2): 20.0})
    assert res.ok


@pytest.mark.parametrize("requirement, feasible", [(5.0, True), (6.0, False)])
def test_down_reserve_limited_by_ramp_with_flat_output(requirement, feasible):
    unit = thermal(ramp_down=1.0, pmax=200.0, initial_on=1, initial_output=60.0)
    ctx = eb(one_bus([100.0], [unit], reserve_down=requirement), tau=5)
    assert solve(ctx.model).ok is feasible


# -- sizes ------------------------------------------------------------------------------


def expected_counts(spec, variant=EB, network=True):
    W, T = len(spec.scenarios), spec.grid.hours
    G, S, V = len(spec.thermal), len(spec.storage), len(spec.renewables)
    L = len(spec.network.lines) if network else 0
    J = G + S + V
    K = sum(len(g.startup_segments) for g in spec.thermal)
    G1 = sum(g.min_up == 1 for g in spec.thermal)
    WT = W * T
    variables = {"x": J, "ehat": WT * J, "e": WT * G, "chat": WT * S, "phi": WT * S, "rup": WT * (G + S),
                 "rdn": WT * (G + S), "u": WT * G, "y": WT * G, "z": WT * G, "delta": WT * K,
                 "gamma": WT * S}
    cons = {"balance": WT, "reserve_up": WT, "reserve_dn": WT, "flow_max": L * WT, "flow_min": L * WT,
            "storage_cap_up": WT * S, "storage_cap_dn": WT * S, "vres_cap": WT * V,
            "invest_thermal": WT * G, "logic": WT * G, "min_up": WT * G, "min_down": WT * G,
            "startup_type": WT * (K - G), "startup_select": WT * G, "cap_sd": WT * G1, "cap_su": WT * G1,
            "cap": WT * (G - G1), "floor": WT * G, "energy": WT * G, "mode_charge": WT * S,
            "mode_discharge": WT * S, "inventory": WT * S, "soc_max": WT * S, "soc_min": WT * S,
            "soc_end": W * S, "ramp_up": WT * G, "ramp_dn": WT * G, "storage_ramp_up": WT * S,
            "storage_ramp_dn": WT * S}
    return ({k: v for k, v in variables.items() if v}, {k: v for k, v in cons.items() if v})


@pytest.mark.parametrize("variant", [EB, EBS])
@pytest.mark.parametrize("size", [dict(n_clusters=1, n_storage=0, hours=2, n_scenarios=1),
                                  dict(n_clusters=2, n_storage=1, hours=5, n_scenarios=2),
                                  dict(n_clusters=4, n_storage=2, hours=7, n_scenarios=3)])
def test_closed_form_sizes(variant, size):
    spec = random_system(11, tau=60, **size)
    ctx = eb(spec, variant)
    variables, cons = expected_counts(spec, variant)
    assert symbol_counts(ctx.model) == variables
    assert family_counts(ctx.model) == cons


# -- polyhedral tightness and balance ---------------------------------------------------


@settings(max_examples=25)
@given(st.integers(1, 3), st.integers(1, 3), st.sampled_from(["quick", "slow"]), st.integers(0, 2 ** 32 - 1))
def test_single_unit_relaxation_is_integral(tu, td, start_class, seed):
    m = commitment_polytope(EB, tu, td, start_class=start_class)
    milp_opt, lp_opt, _ = hull_gap(m, np.random.default_rng(seed))
    assert lp_opt == pytest.approx(milp_opt, abs=1e-6)


@pytest.mark.parametrize("variant", [EB, EBS])
def test_feasible_schedule_balances_every_hour(variant):
    spec = random_system(2, hours=6, n_scenarios=2, tau=15)
    ctx = build_energy_model(spec, EnergyFormulationConfig(variant, 15))
    res = solve(ctx.model, gap=1e-4)
    assert res.ok
    assert ctx.model.residuals(res.values)[rows_of(ctx.model, "balance")].max() < 1e-6
