"""Stage 2: sub-hourly economic dispatch under the stage-1 plan.

Every quantity is sampled at the end of each sub-hourly step ``n = 1..N``;
sample 0 is the initial state.  Energy in step ``n`` is the trapezoid
``(tau/60) * (p[n-1] + p[n]) / 2``.  Sample ``n`` belongs to hour
``ceil(n / steps_per_hour)`` and uses that hour's commitment, reserves and
storage mode, so the last sample of an hour sits on the hour boundary just as
the boundary powers of the power-based model do.

Investment, commitment (including startup types), storage modes and reserve
holdings are fixed; outputs, charging and inventory are re-optimized.  Slack
variables for unserved demand, surplus generation, reserve shortfall and
inventory targets keep every LP feasible; their use is priced and reported.
Missed inventory targets are priced at the reserve-shortfall rate [$/MWh],
below unserved energy, so serving demand always wins.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from flexplan.formulation.energy import EB
from flexplan.milp import EQ, GE, LE, MilpModel, OPTIMAL, solve
from flexplan.pipeline import Stage1Solution
from flexplan.system import SystemSpec, compute_shift_factors, derive_trajectories

logger = logging.getLogger(__name__)


class DispatchError(RuntimeError):
    """A stage-2 LP did not solve to optimality."""


@dataclass(frozen=True)
class DispatchOptions:
    soc_floor: bool = False
    network: bool = True
    end_soc: bool = True
    fix_gamma: bool = True


@dataclass
class CommitmentProfile:
    """Per-sample commitment data for one thermal cluster in one scenario."""

    units: np.ndarray  # (N+1,) committed units owning the sample
    fixed_power: np.ndarray  # (N+1,) MW from units on startup/shutdown trajectories
    extra_room: np.ndarray  # (N+1,) MW added to above-minimum capacity at hour boundaries
    startups: np.ndarray  # (T+1,) y by hour (index 0 unused)
    shutdowns: np.ndarray  # (T+1,)


@dataclass
class DispatchInstance:
    spec: SystemSpec
    scenario: str
    demand: Dict[str, np.ndarray]  # bus -> (N+1,) demand at samples, [0] = first sample
    availability: Dict[str, np.ndarray]  # renewable -> (N+1,) p.u.
    commitment: Dict[str, CommitmentProfile]
    reserve_up: Dict[str, np.ndarray]  # tech -> (T+1,) MW by hour
    reserve_down: Dict[str, np.ndarray]
    gamma: Dict[str, np.ndarray]  # storage -> (T+1,)
    capacity: Dict[str, float]  # storage/renewable MW, thermal units
    soc_target: Dict[str, np.ndarray]  # storage -> (T+1,) stage-1 end-of-hour inventory
    penalties: Dict[str, float]


@dataclass
class ScenarioDispatch:
    scenario: str
    probability: float
    output: Dict[str, np.ndarray]  # asset -> (N+1,) MW (storage: discharge)
    charge: Dict[str, np.ndarray]
    soc: Dict[str, np.ndarray]
    available: Dict[str, np.ndarray]  # renewable -> (N+1,) MW available
    demand: np.ndarray  # (N+1,) total
    unserved: np.ndarray  # (N+1,) MW, summed over buses
    surplus: np.ndarray
    reserve_shortfall: np.ndarray  # (N+1,) MW summed over techs
    soc_shortfall: float  # MWh below floors/targets
    costs: Dict[str, float]
    balance_residual: float
    status: str


@dataclass
class DispatchResult:
    model_kind: str
    tau: int
    scenarios: List[ScenarioDispatch]
    operating_cost: float
    costs: Dict[str, float]
    deviations: List[dict] = field(default_factory=list)
    step_deviations: List[dict] = field(default_factory=list)
    cpu_time: float = 0.0

    @property
    def unserved_energy(self) -> float:
        """Probability-weighted non-served energy [MWh]."""
        return float(sum(s.probability * s.unserved[1:].sum() * self.tau / 60 for s in self.scenarios))

    def scenario(self, wid: str) -> ScenarioDispatch:
        for s in self.scenarios:
            if s.scenario == wid:
                return s
        raise KeyError(wid)


# ---------------------------------------------------------------------------
# commitment expansion
# ---------------------------------------------------------------------------


def step_energy(samples: np.ndarray, tau: int) -> np.ndarray:
    """Trapezoid energy of each step: array of length N for N+1 samples."""
    s = np.asarray(samples, dtype=float)
    return tau / 60.0 * 0.5 * (s[:-1] + s[1:])


def hourly_energy(samples: np.ndarray, tau: int) -> np.ndarray:
    """Trapezoid energy per hour from N+1 samples."""
    sph = 60 // tau
    return step_energy(samples, tau).reshape(-1, sph).sum(axis=1)


def _sample_hours(T: int, sph: int) -> np.ndarray:
    n = np.arange(T * sph + 1)
    return np.ceil(n / sph).astype(int)


def uses_trajectories(model_kind: str) -> bool:
    """EB schedules start and stop units at minimum output; the others ramp."""
    return model_kind != EB


def expand_commitment(sol: Stage1Solution, spec: SystemSpec) -> Dict[str, Dict[str, CommitmentProfile]]:
    """Hourly commitment to per-sample unit counts and fixed trajectory power.

    Returns ``{scenario: {thermal id: CommitmentProfile}}``.
    """
    T, sph = spec.grid.hours, spec.grid.steps_per_hour
    N = T * sph
    hour_of = _sample_hours(T, sph)
    ramps = uses_trajectories(sol.model_kind)
    u_all, y_all, z_all, d_all = (sol.family(s) for s in ("u", "y", "z", "delta"))
    out = {}
    for w in spec.scenarios:
        per = {}
        for g in spec.thermal:
            traj = derive_trajectories(g)
            u = np.array([float(g.initial_on)] + [u_all[(w.id, g.id, t)] for t in range(1, T + 1)])
            y = np.array([0.0] + [y_all[(w.id, g.id, t)] for t in range(1, T + 1)])
            z = np.array([0.0] + [z_all[(w.id, g.id, t)] for t in range(1, T + 1)])
            units = u[hour_of]
            fixed = np.zeros(N + 1)
            samples = np.arange(N + 1)
            if ramps:
                for k, powers in enumerate(traj.su_power, start=1):
                    dur = len(powers)
                    for s in range(1, T + 1):
                        count = d_all[(w.id, g.id, k, s)]
                        if count <= 0:
                            continue
                        end = (s - 1) * sph
                        start = end - dur * sph
                        xs = [start + i * sph for i in range(dur + 1)]
                        ys = [0.0] + list(powers)
                        # power before the horizon is not part of the initial state
                        mask = (samples > max(start, 0)) & (samples <= end)
                        fixed[mask] += count * np.interp(samples[mask], xs, ys)
                for d in range(1, T + 1):
                    if z[d] <= 0:
                        continue
                    dur = len(traj.sd_power) - 1
                    start = (d - 1) * sph
                    xs = [start + i * sph for i in range(dur + 1)]
                    mask = (samples > start) & (samples <= start + dur * sph)
                    fixed[mask] += z[d] * np.interp(samples[mask], xs, list(traj.sd_power))
            extra = np.zeros(N + 1)
            for h in range(1, T):
                n = h * sph
                extra[n] = (g.su_capability - g.pmin) * y[h + 1] - (g.pmax - g.sd_capability) * z[h + 1]
            per[g.id] = CommitmentProfile(units, fixed, extra, y, z)
        out[w.id] = per
    return out


def _samples(series: np.ndarray) -> np.ndarray:
    """Prepend the first sample as the initial (sample 0) value."""
    arr = np.asarray(series, dtype=float)
    return np.concatenate([arr[:1], arr])


def build_instances(spec: SystemSpec, sol: Stage1Solution) -> List[DispatchInstance]:
    T = spec.grid.hours
    commitment = expand_commitment(sol, spec)
    x = sol.investments
    capacity = {}
    # solver round-off can leave a zero build slightly negative
    for g in spec.thermal:
        capacity[g.id] = max(g.initial_units + x.get(g.id, 0.0), 0.0)
    for s in spec.storage:
        capacity[s.id] = max(s.initial_mw + x.get(s.id, 0.0), 0.0)
    for v in spec.renewables:
        capacity[v.id] = max(v.initial_mw + x.get(v.id, 0.0), 0.0)
    rup, rdn, gam, phi = (sol.family(k) for k in ("rup", "rdn", "gamma", "phi"))

    def by_hour(table, w, j, default=0.0):
        return np.array([default] + [table.get((w, j, t), default) for t in range(1, T + 1)])

    out = []
    for w in spec.scenarios:
        techs = [g.id for g in spec.thermal] + [s.id for s in spec.storage]
        out.append(DispatchInstance(
            spec=spec,
            scenario=w.id,
            demand={b: _samples(series) for b, series in w.demand.items()},
            availability={v.id: _samples(v.profiles[w.id]) for v in spec.renewables},
            commitment=commitment[w.id],
            reserve_up={j: by_hour(rup, w.id, j) for j in techs},
            reserve_down={j: by_hour(rdn, w.id, j) for j in techs},
            gamma={s.id: by_hour(gam, w.id, s.id) for s in spec.storage},
            capacity=capacity,
            soc_target={s.id: by_hour(phi, w.id, s.id) for s in spec.storage},
            penalties={"unserved": spec.penalties.non_served_energy,
                       "reserve": spec.penalties.reserve_shortfall},
        ))
    return out


# ---------------------------------------------------------------------------
# the LP
# ---------------------------------------------------------------------------


def _bus_of(spec: SystemSpec) -> Dict[str, str]:
    table = {}
    for group in (spec.thermal, spec.storage, spec.renewables):
        for j in group:
            table[j.id] = j.bus
    return table


def dispatch_scenario(inst: DispatchInstance, options: DispatchOptions = DispatchOptions(),
                      solver: Optional[str] = None) -> ScenarioDispatch:
    spec = inst.spec
    tau = spec.grid.tau
    T, sph = spec.grid.hours, spec.grid.steps_per_hour
    N = T * sph
    hour_of = _sample_hours(T, sph)
    dt = tau / 60.0
    weights = np.full(N + 1, dt)
    weights[0] = weights[N] = dt / 2
    pen_e, pen_r = inst.penalties["unserved"], inst.penalties["reserve"]
    w = inst.scenario
    m = MilpModel(f"dispatch_{w}")
    steps = range(1, N + 1)
    bus_of = _bus_of(spec)
    buses = spec.network.bus_ids

    # thermal above-minimum output q[n]; total = pmin*units + q + fixed
    for g in spec.thermal:
        prof = inst.commitment[g.id]
        span = g.pmax - g.pmin
        cost = g.var_cost + g.emission_cost
        for n in steps:
            top = max(span * prof.units[n] + prof.extra_room[n], 0.0)
            m.add_var("q", (g.id, n), 0.0, top, obj=cost * weights[n])
            m.add_var("short_up", (g.id, n), obj=pen_r * dt)
            m.add_var("short_dn", (g.id, n), obj=pen_r * dt)
    for s in spec.storage:
        cap = inst.capacity[s.id]
        modes = inst.gamma[s.id].copy()
        modes[0] = modes[1] if T else 0.0
        for n in steps:
            h = hour_of[n]
            if not options.fix_gamma:
                can_dis = can_chg = True
            else:
                # samples strictly inside an hour lie between two boundary
                # samples and may carry the mode of either one
                near = [modes[h]] if n % sph == 0 else [modes[h - 1], modes[h]]
                can_dis = any(g > 0.5 for g in near)
                can_chg = any(g < 0.5 for g in near)
            d_ub = cap if can_dis else 0.0
            c_ub = cap if can_chg else 0.0
            m.add_var("dis", (s.id, n), 0.0, d_ub, obj=s.var_cost * weights[n])
            m.add_var("chg", (s.id, n), 0.0, c_ub)
            m.add_var("soc", (s.id, n), 0.0, s.epr * cap)
            m.add_var("short_up", (s.id, n), obj=pen_r * dt)
            m.add_var("short_dn", (s.id, n), obj=pen_r * dt)
        if options.end_soc:
            m.add_var("soc_gap_end", (s.id,), obj=pen_r)
        if options.soc_floor:
            for h in range(1, T + 1):
                m.add_var("soc_gap", (s.id, h), obj=pen_r)
    for v in spec.renewables:
        avail = inst.availability[v.id] * inst.capacity[v.id]
        for n in range(0, N + 1):
            m.add_var("vres", (v.id, n), 0.0, max(avail[n], 0.0), obj=v.var_cost * weights[n])
    for b in buses:
        for n in steps:
            m.add_var("unserved", (b, n), obj=pen_e * dt)
            m.add_var("surplus", (b, n), obj=pen_e * dt)

    # constant injections (minimum output of committed units plus trajectories)
    fixed_at_bus = {b: np.zeros(N + 1) for b in buses}
    for g in spec.thermal:
        prof = inst.commitment[g.id]
        fixed_at_bus[g.bus] += g.pmin * prof.units + prof.fixed_power
    demand_at_bus = {b: inst.demand.get(b, np.zeros(N + 1)) for b in buses}

    def injection_terms(n, b=None):
        terms = []
        for g in spec.thermal:
            if b is None or g.bus == b:
                terms.append((m.var("q", g.id, n), 1.0))
        for s in spec.storage:
            if b is None or s.bus == b:
                terms += [(m.var("dis", s.id, n), 1.0), (m.var("chg", s.id, n), -1.0)]
        for v in spec.renewables:
            if b is None or v.bus == b:
                terms.append((m.var("vres", v.id, n), 1.0))
        for bb in buses:
            if b is None or bb == b:
                terms += [(m.var("unserved", bb, n), 1.0), (m.var("surplus", bb, n), -1.0)]
        return terms

    for n in steps:
        rhs = sum(demand_at_bus[b][n] - fixed_at_bus[b][n] for b in buses)
        m.add_constraint(f"balance({n})", injection_terms(n), EQ, rhs)

    if options.network and spec.network.lines:
        gamma_sf = compute_shift_factors(spec.network)
        for l, line in enumerate(spec.network.lines):
            for n in steps:
                terms, const = [], 0.0
                for bi, b in enumerate(buses):
                    gsf = gamma_sf[l, bi]
                    if gsf == 0:
                        continue
                    terms += [(c, gsf * a) for c, a in injection_terms(n, b)]
                    const += gsf * (fixed_at_bus[b][n] - demand_at_bus[b][n])
                if terms:
                    m.add_constraint(f"flow_max({line.id},{n})", terms, LE, line.limit - const)
                    m.add_constraint(f"flow_min({line.id},{n})", terms, GE, -line.limit - const)

    for g in spec.thermal:
        prof = inst.commitment[g.id]
        span = g.pmax - g.pmin
        r_up, r_dn = inst.reserve_up[g.id], inst.reserve_down[g.id]
        for n in steps:
            h = hour_of[n]
            q = m.var("q", g.id, n)
            top = span * prof.units[n] + prof.extra_room[n]
            m.add_constraint(f"headroom({g.id},{n})", [(q, 1.0), (m.var("short_up", g.id, n), -1.0)],
                             LE, top - r_up[h])
            m.add_constraint(f"footroom({g.id},{n})", [(q, 1.0), (m.var("short_dn", g.id, n), 1.0)],
                             GE, r_dn[h])
            # ramp between consecutive samples
            if n % sph == 1 or sph == 1:
                up_lim = tau * g.ramp_up * prof.units[n]
                prev_units = prof.units[n - 1]
                dn_lim = tau * g.ramp_down * prev_units + span * prof.shutdowns[h]
            else:
                up_lim = tau * g.ramp_up * prof.units[n]
                dn_lim = tau * g.ramp_down * prof.units[n]
            terms = [(q, 1.0)]
            rhs_up, rhs_dn = up_lim, -dn_lim
            if n > 1:
                terms.append((m.var("q", g.id, n - 1), -1.0))
            else:
                rhs_up += g.initial_output
                rhs_dn += g.initial_output
            m.add_constraint(f"ramp_up({g.id},{n})", terms, LE, rhs_up)
            m.add_constraint(f"ramp_dn({g.id},{n})", terms, GE, rhs_dn)

    for s in spec.storage:
        cap = inst.capacity[s.id]
        soc0 = s.initial_soc_fraction * s.epr * cap
        r_up, r_dn = inst.reserve_up[s.id], inst.reserve_down[s.id]
        for n in steps:
            h = hour_of[n]
            dis, chg = m.var("dis", s.id, n), m.var("chg", s.id, n)
            m.add_constraint(f"storage_headroom({s.id},{n})",
                             [(dis, 1.0), (chg, -1.0), (m.var("short_up", s.id, n), -1.0)],
                             LE, cap - r_up[h])
            m.add_constraint(f"storage_footroom({s.id},{n})",
                             [(dis, 1.0), (chg, -1.0), (m.var("short_dn", s.id, n), 1.0)],
                             GE, r_dn[h] - cap)
            # inventory with step-average charge and discharge
            terms = [(m.var("soc", s.id, n), 1.0), (chg, -0.5 * dt * s.efficiency), (dis, 0.5 * dt)]
            rhs = 0.0
            if n > 1:
                terms += [(m.var("soc", s.id, n - 1), -1.0),
                          (m.var("chg", s.id, n - 1), -0.5 * dt * s.efficiency),
                          (m.var("dis", s.id, n - 1), 0.5 * dt)]
            else:
                rhs = soc0
            m.add_constraint(f"inventory({s.id},{n})", terms, EQ, rhs)
        if options.end_soc:
            m.add_constraint(f"soc_end({s.id})",
                             [(m.var("soc", s.id, N), 1.0), (m.var("soc_gap_end", s.id), 1.0)], GE, soc0)
        if options.soc_floor:
            for h in range(1, T + 1):
                m.add_constraint(f"soc_floor({s.id},{h})",
                                 [(m.var("soc", s.id, h * sph), 1.0), (m.var("soc_gap", s.id, h), 1.0)],
                                 GE, inst.soc_target[s.id][h])

    res = solve(m, gap=0.0, solver=solver)
    if res.status != OPTIMAL:
        raise DispatchError(f"stage-2 dispatch for scenario {w} failed: {res.status} {res.message}")
    val = res.values

    def series(sym, j, first=0.0):
        return np.array([first] + [val[m.var(sym, j, n)] for n in steps])

    output, charge, soc, available = {}, {}, {}, {}
    short = np.zeros(N + 1)
    for g in spec.thermal:
        prof = inst.commitment[g.id]
        q = series("q", g.id, g.initial_output)
        output[g.id] = g.pmin * prof.units + prof.fixed_power + q
        short += series("short_up", g.id) + series("short_dn", g.id)
    for s in spec.storage:
        cap = inst.capacity[s.id]
        output[s.id] = series("dis", s.id)
        charge[s.id] = series("chg", s.id)
        soc[s.id] = series("soc", s.id, s.initial_soc_fraction * s.epr * cap)
        short += series("short_up", s.id) + series("short_dn", s.id)
    for v in spec.renewables:
        output[v.id] = np.array([val[m.var("vres", v.id, n)] for n in range(N + 1)])
        available[v.id] = inst.availability[v.id] * inst.capacity[v.id]
    unserved = sum((series("unserved", b) for b in buses), np.zeros(N + 1))
    surplus = sum((series("surplus", b) for b in buses), np.zeros(N + 1))
    demand = sum(demand_at_bus.values(), np.zeros(N + 1))

    produced = sum(output.values(), np.zeros(N + 1)) - sum(charge.values(), np.zeros(N + 1))
    residual = np.abs(produced + unserved - surplus - demand)[1:].max(initial=0.0)

    soc_short = 0.0
    for s in spec.storage:
        if options.end_soc:
            soc_short += val[m.var("soc_gap_end", s.id)]
        if options.soc_floor:
            soc_short += sum(val[m.var("soc_gap", s.id, h)] for h in range(1, T + 1))

    costs = _scenario_costs(inst, output, unserved, surplus, short, soc_short)
    prob = next(sc.probability for sc in spec.scenarios if sc.id == w)
    return ScenarioDispatch(w, prob, output, charge, soc, available, demand, unserved, surplus,
                            short, soc_short, costs, float(residual), res.status)


def _scenario_costs(inst: DispatchInstance, output, unserved, surplus, short, soc_short) -> Dict[str, float]:
    spec = inst.spec
    tau = spec.grid.tau
    T = spec.grid.hours
    dt = tau / 60.0
    energy = {j: step_energy(series, tau).sum() for j, series in output.items()}
    variable = sum(g.var_cost * energy[g.id] for g in spec.thermal)
    variable += sum(s.var_cost * energy[s.id] for s in spec.storage)
    variable += sum(v.var_cost * energy[v.id] for v in spec.renewables)
    emission = sum(g.emission_cost * energy[g.id] for g in spec.thermal)
    pen_e, pen_r = inst.penalties["unserved"], inst.penalties["reserve"]
    penalty = pen_e * dt * (unserved[1:].sum() + surplus[1:].sum()) + pen_r * dt * short[1:].sum()
    penalty += pen_r * soc_short
    fixed = 0.0
    for g in spec.thermal:
        prof = inst.commitment[g.id]
        # hourly commitment and startup/shutdown costs are those fixed in stage 1
        u_hours = prof.units[np.arange(1, T + 1) * spec.grid.steps_per_hour]
        fixed += g.no_load_cost * u_hours.sum() + g.sd_cost * prof.shutdowns[1:].sum()
        fixed += g.reserve_cost_up * inst.reserve_up[g.id][1:].sum()
        fixed += g.reserve_cost_down * inst.reserve_down[g.id][1:].sum()
    for s in spec.storage:
        fixed += s.reserve_cost_up * inst.reserve_up[s.id][1:].sum()
        fixed += s.reserve_cost_down * inst.reserve_down[s.id][1:].sum()
    return {"variable": float(variable), "emission": float(emission), "penalty": float(penalty),
            "commitment": float(fixed)}


def _startup_cost(spec: SystemSpec, sol: Stage1Solution, wid: str) -> float:
    d = sol.family("delta")
    total = 0.0
    for g in spec.thermal:
        for k, seg in enumerate(g.startup_segments, start=1):
            total += seg.cost * sum(d[(wid, g.id, k, t)] for t in range(1, spec.grid.hours + 1))
    return total


def run_dispatch(spec: SystemSpec, sol: Stage1Solution, options: DispatchOptions = DispatchOptions(),
                 solver: Optional[str] = None, workers: int = 1) -> DispatchResult:
    """Dispatch every scenario against the stage-1 plan and compute deviations.

    Scenarios are independent LPs; ``workers > 1`` solves them concurrently.
    Results keep scenario order either way.
    """
    c0 = time.process_time()
    instances = build_instances(spec, sol)
    if workers > 1 and len(instances) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(instances))) as pool:
            results = list(pool.map(lambda inst: dispatch_scenario(inst, options, solver), instances))
    else:
        results = [dispatch_scenario(inst, options, solver) for inst in instances]
    for inst, sd in zip(instances, results):
        sd.costs["commitment"] += _startup_cost(spec, sol, inst.scenario)
        sd.costs["total"] = sum(sd.costs.values())
    keys = ("variable", "emission", "penalty", "commitment", "total")
    costs = {k: float(sum(r.probability * r.costs[k] for r in results)) for k in keys}
    out = DispatchResult(sol.model_kind, spec.grid.tau, results, costs["total"], costs)
    out.deviations, out.step_deviations = compute_deviations(spec, sol, out)
    out.cpu_time = time.process_time() - c0
    return out


# ---------------------------------------------------------------------------
# deviations
# ---------------------------------------------------------------------------


def _percent(dev: float, ref: float) -> float:
    return 100.0 * dev / ref if abs(ref) > 1e-9 else 0.0


def compute_deviations(spec: SystemSpec, sol: Stage1Solution, res: DispatchResult):
    """Hourly and per-step redispatch of thermal output relative to the stage-1 schedule.

    Hourly: stage-2 trapezoid energy minus scheduled hourly energy, per cluster
    and for the thermal total.  Per step: sample minus the stage-1 reference at
    that instant (boundary powers interpolated for power-based schedules, the
    flat hourly energy for energy-based ones).
    """
    T, sph, tau = spec.grid.hours, spec.grid.steps_per_hour, spec.grid.tau
    ehat = sol.family("ehat")
    phat = sol.family("phat")
    power_based = bool(phat)
    hourly, per_step = [], []
    ids = [g.id for g in spec.thermal]
    for sd in res.scenarios:
        w = sd.scenario
        tot_sched = np.zeros(T)
        tot_disp = np.zeros(T)
        tot_ref = np.zeros(T * sph + 1)
        tot_out = np.zeros(T * sph + 1)
        for g in spec.thermal:
            sched = np.array([ehat[(w, g.id, t)] for t in range(1, T + 1)])
            disp = hourly_energy(sd.output[g.id], tau)
            if power_based:
                p0 = g.pmin * g.initial_on + g.initial_output
                bnd = np.array([p0] + [phat[(w, g.id, t)] for t in range(1, T + 1)])
                ref = np.interp(np.arange(T * sph + 1) / sph, np.arange(T + 1), bnd)
            else:
                ref = np.concatenate([[g.pmin * g.initial_on + g.initial_output], np.repeat(sched, sph)])
            tot_sched += sched
            tot_disp += disp
            tot_ref += ref
            tot_out += sd.output[g.id]
            for t in range(T):
                dev = disp[t] - sched[t]
                hourly.append({"scenario": w, "asset": g.id, "hour": t + 1, "scheduled": sched[t],
                               "dispatched": disp[t], "deviation": dev, "abs_deviation": abs(dev),
                               "percent": _percent(dev, sched[t])})
        for t in range(T):
            dev = tot_disp[t] - tot_sched[t]
            hourly.append({"scenario": w, "asset": "thermal", "hour": t + 1, "scheduled": tot_sched[t],
                           "dispatched": tot_disp[t], "deviation": dev, "abs_deviation": abs(dev),
                           "percent": _percent(dev, tot_sched[t])})
        for n in range(1, T * sph + 1):
            dev = tot_out[n] - tot_ref[n]
            per_step.append({"scenario": w, "step": n, "reference": tot_ref[n], "dispatched": tot_out[n],
                             "deviation": dev, "percent": _percent(dev, tot_ref[n])})
    if not ids:
        return [], per_step
    return hourly, per_step


def deviation_summary(deviations: List[dict], asset: str = "thermal") -> Dict[str, float]:
    """Upward/downward deviation mass and extremes for one asset (default: thermal total)."""
    rows = [r for r in deviations if r["asset"] == asset]
    up = sum(r["deviation"] for r in rows if r["deviation"] > 0)
    down = -sum(r["deviation"] for r in rows if r["deviation"] < 0)
    pct = [r["percent"] for r in rows] or [0.0]
    return {"upward_mwh": float(up), "downward_mwh": float(down), "abs_mwh": float(up + down),
            "max_up_pct": float(max(max(pct), 0.0)), "max_down_pct": float(max(-min(pct), 0.0))}


def deviation_histogram(deviations: List[dict], bins=(-100, -10, -5, -3, -1, 1, 3, 5, 10, 100),
                        asset: str = "thermal") -> List[dict]:
    """Counts of hourly percentage deviations per bin (bar-chart data)."""
    pct = np.array([r["percent"] for r in deviations if r["asset"] == asset])
    edges = np.asarray(bins, dtype=float)
    counts, _ = np.histogram(np.clip(pct, edges[0], edges[-1]), bins=edges)
    return [{"low_pct": float(lo), "high_pct": float(hi), "count": int(c)}
            for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
