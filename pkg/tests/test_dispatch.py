from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest

import flexplan.dispatch as dispatch_mod
from flexplan.dispatch import (
    DispatchError, DispatchOptions, compute_deviations, deviation_histogram, deviation_summary,
    expand_commitment, hourly_energy, run_dispatch, step_energy,
)
from flexplan.instances import linear_ramp_system, ramp_stress_system, random_system, tutorial_system
from flexplan.milp import INFEASIBLE, SolveResult
from flexplan.pipeline import Stage1Solution, run_stage1
from flexplan.system import SLOW, StartupSegment, validate_system
from helpers import one_bus, replace, thermal

TAU = 15
SPH = 60 // TAU


def slow_spec(hours=5):
    unit = thermal(pmin=100.0, pmax=200.0, su_capability=100.0, sd_capability=100.0, start_class=SLOW,
                   startup_segments=(StartupSegment(1, 100.0, 2),), sd_duration=1)
    return validate_system(one_bus([150.0] * hours, [unit], tau=TAU))


def plan(spec, kind, u, starts=(), stops=()):
    """Synthetic stage-1 plan for the single unit ``g`` in scenario ``w1``."""
    T = spec.grid.hours
    vals = {"u": {}, "y": {}, "z": {}, "delta": {}}
    for t in range(1, T + 1):
        vals["u"][("w1", "g", t)] = float(u[t - 1])
        vals["y"][("w1", "g", t)] = float(t in starts)
        vals["z"][("w1", "g", t)] = float(t in stops)
        vals["delta"][("w1", "g", 1, t)] = float(t in starts)
    return Stage1Solution(kind, spec.grid.tau, 0.0, {"operating": 0.0}, vals)


# -- commitment expansion ---------------------------------------------------------


def test_slow_start_follows_a_linear_ramp_over_samples():
    spec = slow_spec()
    prof = expand_commitment(plan(spec, "PB", [0, 0, 1, 1, 1], starts={3}), spec)["w1"]["g"]
    # two-hour ramp from zero that reaches minimum output at the end of hour 2
    np.testing.assert_allclose(prof.fixed_power[: 2 * SPH + 1], np.linspace(0.0, 100.0, 2 * SPH + 1))
    assert np.all(prof.fixed_power[2 * SPH + 1:] == 0.0)
    assert prof.units[2 * SPH] == 0 and np.all(prof.units[2 * SPH + 1:] == 1)


def test_shutdown_ramps_down_within_the_stop_hour():
    spec = slow_spec()
    unit = spec.thermal[0]
    spec = validate_system(one_bus([150.0] * 5, [replace(unit, initial_on=1)], tau=TAU))
    prof = expand_commitment(plan(spec, "PB", [1, 1, 0, 0, 0], stops={3}), spec)["w1"]["g"]
    start = 2 * SPH
    np.testing.assert_allclose(prof.fixed_power[start + 1: start + SPH + 1],
                               np.linspace(100.0, 0.0, SPH + 1)[1:])
    assert np.all(prof.fixed_power[: start + 1] == 0.0)


def test_energy_blocks_switch_units_on_at_the_first_sample():
    spec = slow_spec()
    prof = expand_commitment(plan(spec, "EB", [0, 0, 1, 1, 1], starts={3}), spec)["w1"]["g"]
    assert np.all(prof.fixed_power == 0.0)
    first = 2 * SPH + 1
    assert np.all(prof.units[:first] == 0) and np.all(prof.units[first:] == 1)


def test_trajectory_before_the_horizon_is_dropped():
    spec = slow_spec()
    prof = expand_commitment(plan(spec, "PB", [1, 1, 1, 1, 1], starts={1}), spec)["w1"]["g"]
    assert np.all(prof.fixed_power == 0.0)


def test_boundary_room_for_next_hour_startup():
    unit = thermal(pmin=40.0, pmax=100.0, su_capability=60.0, sd_capability=70.0)
    spec = validate_system(one_bus([50.0] * 3, [unit], tau=TAU))
    prof = expand_commitment(plan(spec, "PB", [1, 2, 1], starts={2}, stops={3}), spec)["w1"]["g"]
    assert prof.extra_room[SPH] == pytest.approx(60.0 - 40.0)
    assert prof.extra_room[2 * SPH] == pytest.approx(-(100.0 - 70.0))
    assert np.count_nonzero(prof.extra_room) == 2


# -- the dispatch LP --------------------------------------------------------------


def test_step_and_hourly_energy():
    samples = np.array([0.0, 60.0, 60.0, 120.0, 120.0])
    np.testing.assert_allclose(step_energy(samples, 30), [15.0, 30.0, 45.0, 60.0])
    np.testing.assert_allclose(hourly_energy(samples, 30), [45.0, 105.0])


@pytest.fixture(scope="module")
def random_pb():
    spec = random_system(1, hours=4, n_scenarios=2, tau=TAU)
    sol = run_stage1(spec, "PB", gap=1e-4, tau=TAU)
    return spec, sol, run_dispatch(spec, sol)


def test_every_sample_balances(random_pb):
    res = random_pb[2]
    assert all(s.balance_residual <= 1e-6 for s in res.scenarios)


def test_inventory_telescopes_over_trapezoid_steps(random_pb):
    spec, _, res = random_pb
    dt = TAU / 60
    for sd in res.scenarios:
        for s in spec.storage:
            c, d, soc = sd.charge[s.id], sd.output[s.id], sd.soc[s.id]
            flow = dt * 0.5 * (s.efficiency * (c[:-1] + c[1:]) - (d[:-1] + d[1:]))
            assert soc[-1] - soc[0] == pytest.approx(flow.sum(), abs=1e-6)
            assert soc.min() >= -1e-7


def test_cost_parts_add_up(random_pb):
    res = random_pb[2]
    for sd in res.scenarios:
        parts = sum(v for k, v in sd.costs.items() if k != "total")
        assert parts == pytest.approx(sd.costs["total"], rel=1e-9)
    expect = sum(sd.probability * sd.costs["total"] for sd in res.scenarios)
    assert res.operating_cost == pytest.approx(expect, rel=1e-9)


def test_inventory_floors_only_add_cost(random_pb):
    spec, sol, res = random_pb
    floored = run_dispatch(spec, sol, DispatchOptions(soc_floor=True))
    assert floored.operating_cost >= res.operating_cost - 1e-6


def test_free_storage_modes_only_reduce_cost(random_pb):
    spec, sol, res = random_pb
    free = run_dispatch(spec, sol, DispatchOptions(fix_gamma=False))
    assert free.operating_cost <= res.operating_cost + 1e-6


def test_parallel_workers_match_serial(random_pb):
    spec, sol, res = random_pb
    par = run_dispatch(spec, sol, workers=2)
    assert [s.scenario for s in par.scenarios] == [s.scenario for s in res.scenarios]
    assert par.operating_cost == pytest.approx(res.operating_cost, rel=1e-12)
    for a, b in zip(par.scenarios, res.scenarios):
        for j in a.output:
            np.testing.assert_allclose(a.output[j], b.output[j], atol=1e-9)


def test_failed_lp_raises(random_pb, monkeypatch):
    spec, sol, _ = random_pb
    monkeypatch.setattr(dispatch_mod, "solve",
                        lambda *a, **k: SolveResult(INFEASIBLE, float("nan"), float("nan"), np.zeros(0), 0.0, "forced"))
    with pytest.raises(DispatchError, match="infeasible"):
        run_dispatch(spec, sol)


# -- reproduction of the stage-1 schedule ------------------------------------------


@pytest.mark.parametrize("tau", [5, 60])
def test_power_schedule_of_linear_demand_is_followed_exactly(tau):
    spec = linear_ramp_system(tau=tau)
    res = run_dispatch(spec, run_stage1(spec, "PB", gap=1e-7, tau=tau))
    assert deviation_summary(res.deviations)["abs_mwh"] == pytest.approx(0.0, abs=1e-6)
    assert max(abs(r["deviation"]) for r in res.step_deviations) <= 1e-6
    assert res.unserved_energy == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("seed", [0, 3])
def test_hourly_dispatch_never_costs_more_than_the_power_schedule(seed):
    spec = random_system(seed, hours=6, n_scenarios=2, tau=60)
    sol = run_stage1(spec, "PB", gap=1e-7, tau=60)
    res = run_dispatch(spec, sol)
    # the hourly dispatch keeps every stage-1 constraint except reserve margins on ramps
    assert res.operating_cost <= sol.operating_cost * (1 + 1e-6)
    assert res.costs["penalty"] == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("make", [tutorial_system, ramp_stress_system, linear_ramp_system],
                         ids=["tutorial", "ramp_stress", "linear_ramp"])
def test_power_schedule_needs_no_slack_from_a_consistent_start(make):
    spec = make()
    res = run_dispatch(spec, run_stage1(spec, "PB", gap=1e-4))
    assert res.unserved_energy == pytest.approx(0.0, abs=1e-6)
    assert max(s.reserve_shortfall.max() for s in res.scenarios) <= 1e-6


def test_power_schedule_needs_no_slack_after_the_first_hour():
    # units start cold, so the first hour of sub-hourly demand cannot be met
    spec = random_system(0, hours=6, n_scenarios=2, tau=TAU)
    res = run_dispatch(spec, run_stage1(spec, "PB", gap=1e-4, tau=TAU))
    for sd in res.scenarios:
        assert sd.unserved[SPH + 1:].max() <= 1e-6
        assert sd.reserve_shortfall[SPH + 1:].max() <= 1e-6


# -- deviations ---------------------------------------------------------------------


def _flat_case(output_level):
    spec = validate_system(one_bus([100.0, 100.0], [thermal(initial_on=1, initial_output=60.0)], tau=30))
    sol = SimpleNamespace(family=lambda s: {("w1", "g", 1): 100.0, ("w1", "g", 2): 100.0} if s == "ehat" else {})
    out = np.full(5, output_level)
    out[0] = 100.0
    res = SimpleNamespace(scenarios=[SimpleNamespace(scenario="w1", output={"g": out})])
    return compute_deviations(spec, sol, res)


def test_energy_schedule_deviation_arithmetic():
    hourly, per_step = _flat_case(90.0)
    total = [r for r in hourly if r["asset"] == "thermal"]
    # hour 1: trapezoid (100 + 90)/2 * 0.5 + 90 * 0.5 = 92.5; hour 2: 90
    assert [r["dispatched"] for r in total] == pytest.approx([92.5, 90.0])
    assert [r["percent"] for r in total] == pytest.approx([-7.5, -10.0])
    assert [r["deviation"] for r in per_step] == pytest.approx([-10.0] * 4)
    summary = deviation_summary(hourly)
    assert summary["downward_mwh"] == pytest.approx(17.5) and summary["upward_mwh"] == 0.0
    assert summary["max_down_pct"] == pytest.approx(10.0)


def test_histogram_counts_every_hour():
    hourly, _ = _flat_case(90.0)
    hist = deviation_histogram(hourly)
    assert sum(b["count"] for b in hist) == 2
    assert next(b for b in hist if b["low_pct"] == -10.0)["count"] == 2
