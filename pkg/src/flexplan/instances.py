"""Small synthetic instances: the shipped tutorial and the toys used by the test suite."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from flexplan.system import (
    QUICK, SLOW, Bus, Line, NetworkSpec, RenewableTech, Scenario, StartupSegment, StorageTech,
    SystemSpec, ThermalTech, TimeGrid, validate_system,
)


def piecewise_linear(boundary_values: Sequence[float], grid: TimeGrid) -> np.ndarray:
    """Sub-hourly samples of the polyline through ``boundary_values`` at hours 0..T.

    Sample ``n`` (1-based) is the value at the end of step ``n``.
    """
    vals = np.asarray(boundary_values, dtype=float)
    if vals.size != grid.hours + 1:
        raise ValueError("need one value per hour boundary (T + 1)")
    t = np.arange(1, grid.n_steps + 1) / grid.steps_per_hour
    return np.interp(t, np.arange(grid.hours + 1), vals)


def solar_shape(grid: TimeGrid, peak_hour: float = 12.0, width: float = 5.0) -> np.ndarray:
    t = (np.arange(1, grid.n_steps + 1) / grid.steps_per_hour) % 24
    return np.clip(np.cos((t - peak_hour) / width * np.pi / 2), 0.0, 1.0)


def tutorial_system() -> SystemSpec:
    """Two buses, one line, a gas cluster, a battery and solar PV over one day."""
    grid = TimeGrid(24, 5)
    network = NetworkSpec((Bus("b1", demand=False), Bus("b2")),
                          (Line("l1", "b1", "b2", limit=400.0, reactance=0.1),), slack_bus="b1")
    hours = np.arange(25)
    load = 260 + 90 * np.sin((hours - 8) / 24 * 2 * np.pi) + 40 * np.exp(-((hours - 19) / 2.0) ** 2)
    gas = ThermalTech(
        "ccgt", "b1", pmax=200.0, pmin=80.0, ramp_up=3.0, ramp_down=3.0,
        su_capability=120.0, sd_capability=120.0, sd_duration=1, min_up=3, min_down=2,
        startup_segments=(StartupSegment(1, 3000.0), StartupSegment(4, 6000.0)),
        var_cost=45.0, no_load_cost=800.0, sd_cost=200.0, emission_rate=0.37, co2_price=30.0,
        reserve_cost_up=3.0, reserve_cost_down=1.0, invest_cost=40_000.0,
        initial_units=1, max_new_units=2, start_class=QUICK,
        initial_on=1, initial_output=float(load[0]) - 80.0,
    )
    battery = StorageTech("bess", "b2", epr=4.0, efficiency=0.9, ramp_up=0.5, ramp_down=0.5,
                          var_cost=1.0, invest_cost=60.0, max_new_mw=150.0)
    pv = RenewableTech("pv", "b2", {"w1": solar_shape(grid)}, invest_cost=45.0, max_new_mw=300.0)
    scen = Scenario("w1", 1.0, {"b2": piecewise_linear(load, grid)}, np.full(24, 20.0), np.full(24, 10.0))
    return validate_system(SystemSpec(grid, network, (gas,), (battery,), (pv,), (scen,), name="tutorial"))


def linear_ramp_system(boundary_demand: Sequence[float] = (150, 150, 210, 260, 230, 170, 190),
                       tau: int = 5) -> SystemSpec:
    """One bus, one always-on cluster, demand linear within each hour and flat in hour 1.

    The cluster's initial output matches the first demand sample so the
    schedule can be followed exactly at every sub-hourly sample.
    """
    hours = len(boundary_demand) - 1
    grid = TimeGrid(hours, tau)
    d0 = float(boundary_demand[0])
    unit = ThermalTech(
        "base", "b1", pmax=400.0, pmin=60.0, ramp_up=20.0, ramp_down=20.0,
        su_capability=60.0, sd_capability=60.0, sd_duration=1, min_up=1, min_down=1,
        startup_segments=(StartupSegment(1, 500.0),), var_cost=20.0, no_load_cost=100.0,
        initial_units=1, initial_on=1, initial_output=d0 - 60.0,
    )
    scen = Scenario("w1", 1.0, {"b1": piecewise_linear(boundary_demand, grid)},
                    np.zeros(hours), np.zeros(hours))
    return validate_system(SystemSpec(grid, NetworkSpec((Bus("b1"),)), (unit,), (), (), (scen,),
                                      name="linear_ramp"))


def ramp_stress_system(tau: int = 5, ramp_scale: float = 1.0) -> SystemSpec:
    """Steep morning and evening ramps served by a slow-ramping cheap cluster.

    A quick, expensive peaker covers whatever the base cluster cannot follow
    within the hour; no investment decisions.
    """
    boundary = [300, 300, 300, 420, 560, 600, 560, 430, 330, 330, 460, 590, 520]
    hours = len(boundary) - 1
    grid = TimeGrid(hours, tau)
    base = ThermalTech(
        "base", "b1", pmax=160.0, pmin=60.0, ramp_up=1.0 * ramp_scale, ramp_down=1.0 * ramp_scale,
        su_capability=90.0, sd_capability=90.0, sd_duration=1, min_up=3, min_down=3,
        startup_segments=(StartupSegment(1, 5000.0),), var_cost=20.0, no_load_cost=50.0,
        initial_units=4, initial_on=4, initial_output=60.0,
    )
    peaker = ThermalTech(
        "peak", "b1", pmax=80.0, pmin=10.0, ramp_up=8.0 * ramp_scale, ramp_down=8.0 * ramp_scale,
        su_capability=80.0, sd_capability=80.0, sd_duration=1, min_up=1, min_down=1,
        startup_segments=(StartupSegment(1, 100.0),), var_cost=150.0, no_load_cost=50.0,
        initial_units=3, initial_on=0,
    )
    scen = Scenario("w1", 1.0, {"b1": piecewise_linear(boundary, grid)},
                    np.full(hours, 20.0), np.full(hours, 10.0))
    return validate_system(SystemSpec(grid, NetworkSpec((Bus("b1"),)), (base, peaker), (), (), (scen,),
                                      name="ramp_stress"))


def single_unit_system(hours: int = 6, min_up: int = 1, min_down: int = 1, start_class: str = QUICK,
                       pmin: float = 40.0, pmax: float = 100.0, su: float = 60.0, sd: float = 70.0,
                       segments: Sequence[tuple] = ((1, 100.0, 1),), sd_duration: int = 1,
                       ramp: float = 1.0, initial_on: int = 0) -> SystemSpec:
    """One installed unit, no investment, used for polyhedral checks."""
    grid = TimeGrid(hours, 60)
    if start_class == SLOW:
        su = sd = pmin
    unit = ThermalTech(
        "g", "b1", pmax=pmax, pmin=pmin, ramp_up=ramp, ramp_down=ramp,
        su_capability=su, sd_capability=sd, sd_duration=sd_duration, min_up=min_up, min_down=min_down,
        startup_segments=tuple(StartupSegment(int(a), float(b), int(c)) for a, b, c in segments),
        initial_units=1, max_new_units=0, start_class=start_class, initial_on=initial_on,
    )
    scen = Scenario("w1", 1.0, {"b1": np.zeros(hours)}, np.zeros(hours), np.zeros(hours))
    return validate_system(SystemSpec(grid, NetworkSpec((Bus("b1"),)), (unit,), (), (), (scen,),
                                      name="single_unit"))


def random_system(seed: int, n_clusters: int = 3, n_storage: int = 2, hours: int = 24,
                  n_scenarios: int = 2, tau: int = 5, with_network: bool = True,
                  peak: Optional[float] = None) -> SystemSpec:
    """Randomized planning toy: thermal clusters with investment, storage, solar, two buses."""
    rng = np.random.default_rng(seed)
    grid = TimeGrid(hours, tau)
    buses = (Bus("b1"), Bus("b2"))
    lines = (Line("l1", "b1", "b2", limit=float(rng.uniform(150, 250)), reactance=0.1),) if with_network else ()
    network = NetworkSpec(buses, lines, slack_bus="b1")
    peak = float(rng.uniform(500, 700)) if peak is None else peak

    thermal = []
    for i in range(n_clusters):
        pmax = float(rng.choice([60.0, 100.0, 150.0]))
        pmin = float(round(pmax * rng.uniform(0.3, 0.5)))
        slow = i == 0
        su = pmin if slow else float(round(rng.uniform(pmin, pmax)))
        cold = float(rng.uniform(1000, 4000))
        segs = (StartupSegment(1, round(cold * 0.6), 2 if slow else 1),
                StartupSegment(int(rng.integers(3, 6)), round(cold), 2 if slow else 1))
        thermal.append(ThermalTech(
            f"g{i + 1}", "b1" if i % 2 == 0 else "b2", pmax=pmax, pmin=pmin,
            ramp_up=float(rng.uniform(0.5, 3.0)), ramp_down=float(rng.uniform(0.5, 3.0)),
            su_capability=su, sd_capability=su, sd_duration=2 if slow else 1,
            min_up=int(rng.integers(1, 4)), min_down=int(rng.integers(1, 4)),
            startup_segments=segs, var_cost=float(rng.uniform(15, 90)),
            no_load_cost=float(rng.uniform(100, 900)), sd_cost=float(rng.uniform(0, 300)),
            emission_rate=float(rng.uniform(0.3, 0.9)), co2_price=25.0,
            reserve_cost_up=float(rng.uniform(1, 5)), reserve_cost_down=float(rng.uniform(0.5, 2)),
            invest_cost=float(rng.uniform(5_000, 30_000)),
            initial_units=int(rng.integers(1, 3)), max_new_units=int(rng.integers(2, 5)),
            start_class=SLOW if slow else QUICK,
        ))
    storage = []
    for i in range(n_storage):
        storage.append(StorageTech(
            f"s{i + 1}", "b2" if i % 2 == 0 else "b1", epr=float(rng.choice([2.0, 4.0])),
            efficiency=float(rng.uniform(0.8, 0.95)), ramp_up=float(rng.uniform(0.05, 0.5)),
            ramp_down=float(rng.uniform(0.05, 0.5)), var_cost=float(rng.uniform(0.5, 3)),
            reserve_cost_up=1.0, reserve_cost_down=0.5, invest_cost=float(rng.uniform(20, 120)),
            max_new_mw=float(rng.uniform(50, 150)),
        ))
    scen = []
    profiles = {}
    base_shape = 0.7 + 0.3 * np.sin((np.arange(hours + 1) - 8) / 24 * 2 * np.pi)
    for k in range(n_scenarios):
        wid = f"w{k + 1}"
        noise = rng.normal(0, 0.04, hours + 1)
        total = peak * np.clip(base_shape + noise, 0.2, None)
        share = float(rng.uniform(0.3, 0.6))
        demand = {"b1": piecewise_linear(total * share, grid),
                  "b2": piecewise_linear(total * (1 - share), grid)}
        profiles[wid] = np.clip(solar_shape(grid) * rng.uniform(0.6, 1.0), 0, 1)
        scen.append(Scenario(wid, 1.0 / n_scenarios, demand,
                             np.full(hours, 0.05 * peak), np.full(hours, 0.03 * peak)))
    pv = RenewableTech("pv", "b2", profiles, invest_cost=float(rng.uniform(30, 60)),
                       max_new_mw=float(rng.uniform(100, 300)))
    return validate_system(SystemSpec(grid, network, tuple(thermal), tuple(storage), (pv,), tuple(scen),
                                      name=f"random_{seed}"))
