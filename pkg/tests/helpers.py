"""Small instance builders shared by the test modules."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from flexplan.system import (
    QUICK, Bus, Line, NetworkSpec, RenewableTech, Scenario, StartupSegment, StorageTech,
    SystemSpec, ThermalTech, TimeGrid,
)


def thermal(id="g", bus="b1", **kw) -> ThermalTech:
    base = dict(pmax=100.0, pmin=40.0, ramp_up=10.0, ramp_down=10.0, su_capability=60.0,
                sd_capability=60.0, sd_duration=1, min_up=1, min_down=1,
                startup_segments=(StartupSegment(1, 100.0),), var_cost=10.0,
                initial_units=1, max_new_units=0, start_class=QUICK)
    base.update(kw)
    return ThermalTech(id, bus, **base)


def storage(id="s", bus="b1", **kw) -> StorageTech:
    base = dict(epr=2.0, efficiency=0.9, ramp_up=1.0, ramp_down=1.0, initial_mw=50.0)
    base.update(kw)
    return StorageTech(id, bus, **base)


def hourly_steps(values, tau=60) -> np.ndarray:
    """Sub-hourly profile that is constant within each hour."""
    return np.repeat(np.asarray(values, dtype=float), 60 // tau)


def one_bus(demand_hourly, thermal_techs=(), storage_techs=(), renewables=(), tau=60,
            reserve_up=0.0, reserve_down=0.0, name="toy", demand_steps=None) -> SystemSpec:
    hours = len(demand_hourly)
    steps = hourly_steps(demand_hourly, tau) if demand_steps is None else np.asarray(demand_steps, float)
    scen = Scenario("w1", 1.0, {"b1": steps}, np.full(hours, float(reserve_up)),
                    np.full(hours, float(reserve_down)))
    return SystemSpec(TimeGrid(hours, tau), NetworkSpec((Bus("b1"),)), tuple(thermal_techs),
                      tuple(storage_techs), tuple(renewables), (scen,), name=name)


def two_bus(demand_b2_hourly, thermal_techs, limit=10.0, tau=60, storage_techs=()) -> SystemSpec:
    hours = len(demand_b2_hourly)
    net = NetworkSpec((Bus("b1", demand=False), Bus("b2")),
                      (Line("l1", "b1", "b2", limit=limit, reactance=0.1),), slack_bus="b1")
    scen = Scenario("w1", 1.0, {"b2": hourly_steps(demand_b2_hourly, tau)}, np.zeros(hours),
                    np.zeros(hours))
    return SystemSpec(TimeGrid(hours, tau), net, tuple(thermal_techs), tuple(storage_techs), (), (scen,))


def solar(id="pv", bus="b1", profile=None, **kw) -> RenewableTech:
    return RenewableTech(id, bus, {"w1": np.asarray(profile, dtype=float)}, **kw)


__all__ = ["thermal", "storage", "hourly_steps", "one_bus", "two_bus", "solar", "replace"]
