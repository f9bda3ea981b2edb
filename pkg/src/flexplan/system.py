"""Domain types for a planning instance and the quantities derived from them.

A :class:`SystemSpec` is a plain, immutable description of technologies,
network, scenarios and time grid.  Construction never validates; call
:func:`validate_system` to collect every violated invariant at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix

QUICK = "quick"
SLOW = "slow"


class SystemValidationError(ValueError):
    """Raised with the full list of violated invariants."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class StartupSegment:
    """One startup type: offline-time threshold [h], cost [$/start], duration [h]."""

    threshold: int
    cost: float
    duration: int = 1


@dataclass(frozen=True)
class ThermalTech:
    id: str
    bus: str
    pmax: float
    pmin: float
    ramp_up: float  # MW/min per committed unit
    ramp_down: float
    su_capability: float
    sd_capability: float
    sd_duration: int
    min_up: int
    min_down: int
    startup_segments: Tuple[StartupSegment, ...]
    var_cost: float = 0.0
    no_load_cost: float = 0.0
    sd_cost: float = 0.0
    emission_rate: float = 0.0  # ton/MWh
    co2_price: float = 0.0  # $/ton
    reserve_cost_up: float = 0.0
    reserve_cost_down: float = 0.0
    invest_cost: float = 0.0  # $/unit
    initial_units: int = 0
    max_new_units: int = 0
    start_class: str = QUICK
    initial_on: int = 0
    initial_output: float = 0.0  # MW above minimum, whole cluster
    su_trajectory: Optional[Tuple[Tuple[float, ...], ...]] = None
    sd_trajectory: Optional[Tuple[float, ...]] = None

    @property
    def emission_cost(self) -> float:
        return self.emission_rate * self.co2_price

    @property
    def fleet_max(self) -> int:
        return int(self.initial_units + self.max_new_units)

    @property
    def su_durations(self) -> Tuple[int, ...]:
        return tuple(seg.duration for seg in self.startup_segments)


@dataclass(frozen=True)
class StorageTech:
    id: str
    bus: str
    epr: float  # h
    efficiency: float
    ramp_up: float = 1.0  # fraction of installed MW per minute
    ramp_down: float = 1.0
    var_cost: float = 0.0
    reserve_cost_up: float = 0.0
    reserve_cost_down: float = 0.0
    invest_cost: float = 0.0  # $/MW
    initial_mw: float = 0.0
    max_new_mw: float = 0.0
    initial_soc_fraction: float = 0.5

    @property
    def power_max(self) -> float:
        return self.initial_mw + self.max_new_mw


@dataclass(frozen=True)
class RenewableTech:
    id: str
    bus: str
    profiles: Dict[str, np.ndarray]  # scenario id -> availability p.u., sub-hourly
    invest_cost: float = 0.0
    initial_mw: float = 0.0
    max_new_mw: float = 0.0
    var_cost: float = 0.0


@dataclass(frozen=True)
class Bus:
    id: str
    demand: bool = True


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    limit: float
    reactance: float


@dataclass(frozen=True)
class NetworkSpec:
    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...] = ()
    slack_bus: Optional[str] = None
    shift_factors: Optional[np.ndarray] = None  # lines x buses
    shift_factor_bound: float = 10.0

    @property
    def bus_ids(self) -> List[str]:
        return [b.id for b in self.buses]

    def bus_index(self, bus_id: str) -> int:
        return self.bus_ids.index(bus_id)


@dataclass(frozen=True)
class Scenario:
    id: str
    probability: float
    demand: Dict[str, np.ndarray]  # bus id -> MW, sub-hourly
    reserve_up: np.ndarray  # MW per hour
    reserve_down: np.ndarray


@dataclass(frozen=True)
class TimeGrid:
    hours: int
    tau: int = 5  # minutes

    @property
    def steps_per_hour(self) -> int:
        return 60 // self.tau

    @property
    def n_steps(self) -> int:
        return self.hours * self.steps_per_hour


@dataclass(frozen=True)
class Penalties:
    non_served_energy: float = 10_000.0  # $/MWh
    reserve_shortfall: float = 5_000.0  # $/MW per hour held short


@dataclass(frozen=True)
class SystemSpec:
    grid: TimeGrid
    network: NetworkSpec
    thermal: Tuple[ThermalTech, ...] = ()
    storage: Tuple[StorageTech, ...] = ()
    renewables: Tuple[RenewableTech, ...] = ()
    scenarios: Tuple[Scenario, ...] = ()
    penalties: Penalties = field(default_factory=Penalties)
    name: str = "system"

    @property
    def g1(self) -> List[str]:
        """Thermal technologies with a one-hour minimum up time."""
        return [g.id for g in self.thermal if g.min_up == 1]

    @property
    def quick_start(self) -> List[str]:
        return [g.id for g in self.thermal if g.start_class == QUICK]

    @property
    def slow_start(self) -> List[str]:
        return [g.id for g in self.thermal if g.start_class == SLOW]

    @property
    def n_techs(self) -> int:
        return len(self.thermal) + len(self.storage) + len(self.renewables)

    def with_scaled_ramps(self, factor: float) -> "SystemSpec":
        """Copy with every thermal ramp capability multiplied by ``factor``."""
        thermal = tuple(
            replace(g, ramp_up=g.ramp_up * factor, ramp_down=g.ramp_down * factor)
            for g in self.thermal
        )
        return replace(self, thermal=thermal)

    def with_resolution(self, tau: int) -> "SystemSpec":
        """Copy on a ``tau``-minute grid with profiles linearly resampled.

        Samples sit at step ends, so the value at time 0 is taken equal to the
        first sample.  Coarsening to a multiple of the current step keeps the
        retained samples exactly.  Profiles whose length does not match the
        current grid are left untouched for validation to report.
        """
        if tau == self.grid.tau:
            return self
        old, new = self.grid, TimeGrid(self.grid.hours, tau)
        if tau <= 0 or 60 % tau:
            return replace(self, grid=new)
        t_old = np.arange(old.n_steps + 1) / old.steps_per_hour
        t_new = np.arange(1, new.n_steps + 1) / new.steps_per_hour

        def resample(series):
            arr = np.asarray(series, dtype=float)
            if arr.size != old.n_steps:
                return arr
            return np.interp(t_new, t_old, np.concatenate(([arr[0]], arr)))

        scenarios = tuple(replace(w, demand={b: resample(v) for b, v in w.demand.items()})
                          for w in self.scenarios)
        renewables = tuple(replace(v, profiles={w: resample(p) for w, p in v.profiles.items()})
                           for v in self.renewables)
        return replace(self, grid=new, scenarios=scenarios, renewables=renewables)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _check_ids(items, label, errors):
    seen = set()
    for i, item in enumerate(items):
        if item.id in seen:
            errors.append(f"{label}[{i}].id: duplicate id {item.id!r}")
        seen.add(item.id)


def _validate_thermal(g: ThermalTech, path: str, bus_ids, errors: List[str]):
    if g.bus not in bus_ids:
        errors.append(f"{path}.bus: unknown bus {g.bus!r}")
    if not (0 <= g.pmin <= g.pmax):
        errors.append(f"{path}: requires 0 <= pmin <= pmax")
    if not (g.pmin <= g.su_capability <= g.pmax):
        errors.append(f"{path}.su_capability: requires pmin <= SU <= pmax")
    if not (g.pmin <= g.sd_capability <= g.pmax):
        errors.append(f"{path}.sd_capability: requires pmin <= SD <= pmax")
    if g.ramp_up < 0 or g.ramp_down < 0:
        errors.append(f"{path}: ramp rates must be nonnegative")
    for name in ("min_up", "min_down"):
        value = getattr(g, name)
        if int(value) != value or value < 1:
            errors.append(f"{path}.{name}: must be an integer >= 1")
    if int(g.sd_duration) != g.sd_duration or g.sd_duration < 1:
        errors.append(f"{path}.sd_duration: must be an integer >= 1")
    segs = g.startup_segments
    if not segs:
        errors.append(f"{path}.startup_segments: at least one segment required")
    for k, seg in enumerate(segs):
        if int(seg.duration) != seg.duration or seg.duration < 1:
            errors.append(f"{path}.startup_segments[{k}].duration: must be an integer >= 1")
        if int(seg.threshold) != seg.threshold or seg.threshold < 1:
            errors.append(f"{path}.startup_segments[{k}].threshold: must be an integer >= 1")
        if k > 0:
            if seg.threshold <= segs[k - 1].threshold:
                errors.append(
                    f"{path}.startup_segments[{k}].threshold: thresholds must be strictly increasing"
                )
            if seg.cost < segs[k - 1].cost:
                errors.append(
                    f"{path}.startup_segments[{k}].cost: costs must be nondecreasing from hot to cold"
                )
    if g.start_class == QUICK:
        if any(seg.duration > 1 for seg in segs) or g.sd_duration > 1:
            errors.append(f"{path}: quick-start requires SU^D = SD^D <= 1")
    elif g.start_class == SLOW:
        if not (g.su_capability == g.sd_capability == g.pmin):
            errors.append(f"{path}: slow-start requires SU_g = SD_g = P_g")
    else:
        errors.append(f"{path}.start_class: must be 'quick' or 'slow', got {g.start_class!r}")
    if g.initial_units < 0 or g.max_new_units < 0:
        errors.append(f"{path}: unit counts must be nonnegative")
    if not (0 <= g.initial_on <= g.initial_units):
        errors.append(f"{path}.initial_on: must lie in [0, initial_units]")
    if not (0 <= g.initial_output <= (g.pmax - g.pmin) * g.initial_on + 1e-9):
        errors.append(f"{path}.initial_output: must lie in [0, (pmax - pmin) * initial_on]")
    if g.su_trajectory is not None:
        if len(g.su_trajectory) != len(segs) or any(
            len(tr) != seg.duration for tr, seg in zip(g.su_trajectory, segs)
        ):
            errors.append(f"{path}.su_trajectory: one sample per startup hour per segment")
    if g.sd_trajectory is not None and len(g.sd_trajectory) != g.sd_duration + 1:
        errors.append(f"{path}.sd_trajectory: needs sd_duration + 1 samples")


def _validate_storage(s: StorageTech, path: str, bus_ids, errors: List[str]):
    if s.bus not in bus_ids:
        errors.append(f"{path}.bus: unknown bus {s.bus!r}")
    if not (0 < s.efficiency <= 1):
        errors.append(f"{path}.efficiency: efficiency out of (0,1]")
    if not s.epr > 0:
        errors.append(f"{path}.epr: energy-to-power ratio must be > 0")
    if not (0 <= s.initial_soc_fraction <= 1):
        errors.append(f"{path}.initial_soc_fraction: must lie in [0,1]")
    if s.initial_mw < 0 or s.max_new_mw < 0:
        errors.append(f"{path}: capacities must be nonnegative")
    if s.ramp_up < 0 or s.ramp_down < 0:
        errors.append(f"{path}: ramp rates must be nonnegative")


def validate_system(spec: SystemSpec) -> SystemSpec:
    """Check every invariant of ``spec``; raise :class:`SystemValidationError` listing all failures."""
    errors: List[str] = []
    grid = spec.grid
    if grid.tau <= 0 or 60 % grid.tau != 0:
        errors.append(f"grid.tau: 60 mod τ ≠ 0 (τ = {grid.tau})")
        n_steps = None
    else:
        n_steps = grid.n_steps
    if grid.hours < 1:
        errors.append("grid.hours: horizon must be >= 1 hour")

    net = spec.network
    bus_ids = net.bus_ids
    _check_ids(net.buses, "network.buses", errors)
    _check_ids(net.lines, "network.lines", errors)
    if not bus_ids:
        errors.append("network.buses: no buses")
    for i, line in enumerate(net.lines):
        for end in ("from_bus", "to_bus"):
            if getattr(line, end) not in bus_ids:
                errors.append(f"network.lines[{i}].{end}: unknown bus {getattr(line, end)!r}")
        if line.limit < 0:
            errors.append(f"network.lines[{i}].limit: must be nonnegative")
    if net.slack_bus is not None and net.slack_bus not in bus_ids:
        errors.append(f"network.slack_bus: unknown bus {net.slack_bus!r}")
    if net.shift_factors is not None:
        sf = np.asarray(net.shift_factors, dtype=float)
        if sf.shape != (len(net.lines), len(bus_ids)):
            errors.append("network.shift_factors: shape must be (lines, buses)")
        else:
            if np.any(np.abs(sf) > net.shift_factor_bound):
                errors.append(
                    f"network.shift_factors: |Γ| exceeds bound {net.shift_factor_bound}"
                )
            if net.slack_bus is not None and np.any(sf[:, net.bus_index(net.slack_bus)] != 0):
                errors.append("network.shift_factors: slack bus column must be zero")

    all_techs = list(spec.thermal) + list(spec.storage) + list(spec.renewables)
    _check_ids(all_techs, "technologies", errors)
    for i, g in enumerate(spec.thermal):
        _validate_thermal(g, f"thermal[{i}]", bus_ids, errors)
    for i, s in enumerate(spec.storage):
        _validate_storage(s, f"storage[{i}]", bus_ids, errors)

    if not spec.scenarios:
        errors.append("scenarios: no scenarios")
    _check_ids(spec.scenarios, "scenarios", errors)
    total_p = sum(w.probability for w in spec.scenarios)
    if spec.scenarios and abs(total_p - 1.0) > 1e-9:
        errors.append(f"scenarios: probabilities sum to {total_p!r}, expected 1")
    demand_buses = {b.id for b in net.buses if b.demand}
    for i, w in enumerate(spec.scenarios):
        path = f"scenarios[{i}]"
        if w.probability < 0:
            errors.append(f"{path}.probability: must be nonnegative")
        for b, series in w.demand.items():
            if b not in bus_ids:
                errors.append(f"{path}.demand[{b}]: unknown bus")
            elif b not in demand_buses:
                errors.append(f"{path}.demand[{b}]: bus is not flagged as a demand bus")
            arr = np.asarray(series, dtype=float)
            if n_steps is not None and arr.shape != (n_steps,):
                errors.append(f"{path}.demand[{b}]: profile length {arr.size} != {n_steps}")
            if np.any(arr < 0):
                errors.append(f"{path}.demand[{b}]: demand must be >= 0")
        for name in ("reserve_up", "reserve_down"):
            arr = np.asarray(getattr(w, name), dtype=float)
            if arr.shape != (grid.hours,):
                errors.append(f"{path}.{name}: needs one value per hour ({grid.hours})")
            elif np.any(arr < 0):
                errors.append(f"{path}.{name}: must be >= 0")

    scenario_ids = [w.id for w in spec.scenarios]
    for i, v in enumerate(spec.renewables):
        path = f"renewables[{i}]"
        if v.bus not in bus_ids:
            errors.append(f"{path}.bus: unknown bus {v.bus!r}")
        if v.initial_mw < 0 or v.max_new_mw < 0:
            errors.append(f"{path}: capacities must be nonnegative")
        for wid in scenario_ids:
            if wid not in v.profiles:
                errors.append(f"{path}.profiles: missing scenario {wid!r}")
                continue
            arr = np.asarray(v.profiles[wid], dtype=float)
            if n_steps is not None and arr.shape != (n_steps,):
                errors.append(f"{path}.profiles[{wid}]: profile length {arr.size} != {n_steps}")
            if np.any(arr < 0) or np.any(arr > 1):
                errors.append(f"{path}.profiles[{wid}]: values must lie in [0,1]")

    if errors:
        raise SystemValidationError(errors)
    return spec


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectories:
    """Startup/shutdown power samples and the trapezoid energies between them.

    ``su_power[k][i-1]`` is the power at the end of the i-th startup hour of
    segment k (the last sample equals pmin).  ``sd_power[0]`` is pmin at the
    moment of shutdown and ``sd_power[-1]`` is zero.
    """

    su_power: Tuple[Tuple[float, ...], ...]
    su_energy: Tuple[Tuple[float, ...], ...]
    sd_power: Tuple[float, ...]
    sd_energy: Tuple[float, ...]


def derive_trajectories(tech: ThermalTech) -> Trajectories:
    """Linear startup/shutdown ramps between zero and minimum output."""
    su_power, su_energy = [], []
    for k, seg in enumerate(tech.startup_segments):
        dur = seg.duration
        if dur < 1:
            raise ValueError(f"{tech.id}: startup duration must be >= 1 hour")
        if tech.su_trajectory is not None:
            p = [float(v) for v in tech.su_trajectory[k]]
        else:
            p = [tech.pmin * i / dur for i in range(1, dur + 1)]
        prev = [0.0] + p[:-1]
        su_power.append(tuple(p))
        su_energy.append(tuple((a + b) / 2 for a, b in zip(prev, p)))
    dur = tech.sd_duration
    if dur < 1:
        raise ValueError(f"{tech.id}: shutdown duration must be >= 1 hour")
    if tech.sd_trajectory is not None:
        q = [float(v) for v in tech.sd_trajectory]
    else:
        q = [tech.pmin * (1 - (i - 1) / dur) for i in range(1, dur + 2)]
    sd_energy = tuple((q[i] + q[i + 1]) / 2 for i in range(dur))
    return Trajectories(tuple(su_power), tuple(su_energy), tuple(q), sd_energy)


def aggregate_profiles(series, grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Hourly energy (mean of in-hour samples) and boundary power.

    Returns ``(energy, power)`` with ``energy.shape == (T,)`` and
    ``power.shape == (T + 1,)``; ``power[t]`` is the last sample of hour t and
    ``power[0]`` is the first sample.
    """
    arr = np.asarray(series, dtype=float)
    sph = grid.steps_per_hour
    if arr.shape != (grid.hours * sph,):
        raise ValueError(
            f"profile length {arr.size} does not match {grid.hours} h x {sph} steps"
        )
    by_hour = arr.reshape(grid.hours, sph)
    energy = by_hour.mean(axis=1)
    power = np.concatenate([arr[:1], by_hour[:, -1]])
    return energy, power


def compute_shift_factors(network: NetworkSpec) -> np.ndarray:
    """DC power-transfer distribution factors, shape (lines, buses).

    Entry (l, b) is the flow on line l (positive from ``from_bus`` to
    ``to_bus``) per MW injected at b and withdrawn at the slack bus.
    """
    if network.shift_factors is not None:
        return np.asarray(network.shift_factors, dtype=float)
    bus_ids = network.bus_ids
    nb, nl = len(bus_ids), len(network.lines)
    if nl == 0:
        return np.zeros((0, nb))
    slack = network.bus_index(network.slack_bus) if network.slack_bus else 0
    f = np.array([bus_ids.index(l.from_bus) for l in network.lines])
    t = np.array([bus_ids.index(l.to_bus) for l in network.lines])
    x = np.array([l.reactance for l in network.lines], dtype=float)
    if np.any(x <= 0):
        raise ValueError("line reactances must be > 0")

    adj = coo_matrix((np.ones(nl), (f, t)), shape=(nb, nb))
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp > 1:
        raise ValueError(f"network is disconnected ({n_comp} islands)")

    b = 1.0 / x
    rows = np.arange(nl)
    cft = np.zeros((nl, nb))
    cft[rows, f] = 1.0
    cft[rows, t] = -1.0
    bf = b[:, None] * cft
    bbus = cft.T @ bf
    keep = [i for i in range(nb) if i != slack]
    bred = bbus[np.ix_(keep, keep)]
    try:
        inv = np.linalg.solve(bred, np.eye(nb - 1))
    except np.linalg.LinAlgError as exc:
        raise ValueError("reduced susceptance matrix is singular") from exc
    ptdf = np.zeros((nl, nb))
    ptdf[:, keep] = bf[:, keep] @ inv
    return ptdf
