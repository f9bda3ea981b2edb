"""Pieces shared by the energy- and power-based GEP-UC builders.

Indexing: scenarios ``w`` by id, technologies by id, hours ``t = 1..T``.
References to hour 0 resolve to the initial state (all constant), references
past the horizon are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from flexplan.milp import BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, MilpModel, format_name
from flexplan.system import (
    SystemSpec, Trajectories, aggregate_profiles, compute_shift_factors, derive_trajectories,
)

Terms = List[Tuple[int, float]]

# families whose integrality the semi-relaxed scheme drops in stage 1a
UC_SYMBOLS = ("u", "y", "z", "delta", "gamma")
INVESTMENT_SYMBOL = "x"


def present_uc_symbols(model) -> list:
    """UC families that exist in ``model`` (no storage modes without storage)."""
    have = set(model.vars.symbols())
    return [s for s in UC_SYMBOLS if s in have]


@dataclass
class HourlyScenario:
    demand_energy: Dict[str, np.ndarray]  # bus -> (T,)
    demand_power: Dict[str, np.ndarray]  # bus -> (T+1,)
    avail_energy: Dict[str, np.ndarray]  # renewable -> (T,)
    avail_power: Dict[str, np.ndarray]  # renewable -> (T+1,)
    reserve_up: np.ndarray
    reserve_down: np.ndarray

    def total_demand_energy(self) -> np.ndarray:
        return sum(self.demand_energy.values(), np.zeros_like(self.reserve_up, dtype=float))

    def total_demand_power(self) -> np.ndarray:
        T = self.reserve_up.size
        return sum(self.demand_power.values(), np.zeros(T + 1))


def hourly_data(spec: SystemSpec) -> Dict[str, HourlyScenario]:
    """Hourly energy and boundary power for every scenario."""
    out = {}
    for w in spec.scenarios:
        de, dp = {}, {}
        for b, series in w.demand.items():
            de[b], dp[b] = aggregate_profiles(series, spec.grid)
        ve, vp = {}, {}
        for v in spec.renewables:
            ve[v.id], vp[v.id] = aggregate_profiles(v.profiles[w.id], spec.grid)
        out[w.id] = HourlyScenario(de, dp, ve, vp,
                                   np.asarray(w.reserve_up, dtype=float),
                                   np.asarray(w.reserve_down, dtype=float))
    return out


class Context:
    """Model under construction plus the data every equation family needs."""

    def __init__(self, spec: SystemSpec, tau: int = 5, include_network: bool = True,
                 integer_storage: bool = False, end_soc: bool = True, name: str = "gep"):
        if tau <= 0 or 60 % tau:
            raise ValueError(f"60 mod τ ≠ 0 (τ = {tau})")
        self.spec = spec
        self.tau = tau
        self.integer_storage = integer_storage
        self.end_soc = end_soc
        self.model = MilpModel(name)
        self.T = spec.grid.hours
        self.hours = range(1, self.T + 1)
        self.scenarios = [w.id for w in spec.scenarios]
        self.prob = {w.id: w.probability for w in spec.scenarios}
        self.hourly = hourly_data(spec)
        self.thermal = {g.id: g for g in spec.thermal}
        self.storage = {s.id: s for s in spec.storage}
        self.renewables = {v.id: v for v in spec.renewables}
        self.traj: Dict[str, Trajectories] = {g.id: derive_trajectories(g) for g in spec.thermal}
        self.include_network = include_network and len(spec.network.lines) > 0
        self.shift = compute_shift_factors(spec.network) if self.include_network else None
        self.bus_ids = spec.network.bus_ids

    # -- variable access ---------------------------------------------------
    def v(self, symbol: str, *index) -> int:
        return self.model.var(symbol, *index)

    def opt(self, symbol: str, *index) -> Optional[int]:
        return self.model.vars.get(symbol, *index)

    def in_horizon(self, t: int) -> bool:
        return 1 <= t <= self.T

    def add(self, family: str, index: Sequence, terms, sense: str, rhs: float) -> None:
        self.model.add_constraint(format_name(family, index), terms, sense, rhs)

    def gamma_shift(self, line: int, bus: str) -> float:
        return float(self.shift[line, self.bus_ids.index(bus)])

    @property
    def techs(self) -> List[str]:
        return list(self.thermal) + list(self.storage) + list(self.renewables)

    @property
    def reserve_techs(self) -> List[str]:
        return list(self.thermal) + list(self.storage)


# ---------------------------------------------------------------------------
# variables
# ---------------------------------------------------------------------------


def declare_investment(ctx: Context) -> None:
    m = ctx.model
    for g in ctx.thermal.values():
        m.add_var("x", (g.id,), 0, g.max_new_units, INTEGER)
    store_kind = INTEGER if ctx.integer_storage else CONTINUOUS
    for s in ctx.storage.values():
        m.add_var("x", (s.id,), 0, s.max_new_mw, store_kind)
    for v in ctx.renewables.values():
        m.add_var("x", (v.id,), 0, v.max_new_mw, store_kind)


def declare_commitment(ctx: Context, w: str, t: int) -> None:
    m = ctx.model
    for g in ctx.thermal.values():
        n = g.fleet_max
        for sym in ("u", "y", "z"):
            m.add_var(sym, (w, g.id, t), 0, n, INTEGER)
        for k in range(1, len(g.startup_segments) + 1):
            m.add_var("delta", (w, g.id, k, t), 0, n, INTEGER)
    for s in ctx.storage:
        m.add_var("gamma", (w, s, t), 0, 1, BINARY)


def declare_reserves(ctx: Context, w: str, t: int) -> None:
    for j in ctx.reserve_techs:
        ctx.model.add_var("rup", (w, j, t))
        ctx.model.add_var("rdn", (w, j, t))


# ---------------------------------------------------------------------------
# shared constraint families
# ---------------------------------------------------------------------------


def build_reserve_requirements(ctx: Context) -> None:
    """System up/down reserve requirement per scenario and hour."""
    for w in ctx.scenarios:
        h = ctx.hourly[w]
        for t in ctx.hours:
            up = [(ctx.v("rup", w, j, t), 1.0) for j in ctx.reserve_techs]
            dn = [(ctx.v("rdn", w, j, t), 1.0) for j in ctx.reserve_techs]
            ctx.add("reserve_up", (w, t), up, GE, float(h.reserve_up[t - 1]))
            ctx.add("reserve_dn", (w, t), dn, GE, float(h.reserve_down[t - 1]))


def build_thermal_investment_link(ctx: Context) -> None:
    """Committed units never exceed installed units."""
    for w in ctx.scenarios:
        for g in ctx.thermal.values():
            for t in ctx.hours:
                ctx.add("invest_thermal", (w, g.id, t),
                        [(ctx.v("u", w, g.id, t), 1.0), (ctx.v("x", g.id), -1.0)],
                        LE, float(g.initial_units))


def build_uc_logic(ctx: Context) -> None:
    """State transition, minimum up/down time, startup type selection.

    Windows reaching before hour 1 are truncated: the initial state carries
    no pending startups or shutdowns.
    """
    for w in ctx.scenarios:
        for g in ctx.thermal.values():
            gid = g.id
            for t in ctx.hours:
                terms = [(ctx.v("u", w, gid, t), 1.0), (ctx.v("y", w, gid, t), -1.0),
                         (ctx.v("z", w, gid, t), 1.0)]
                rhs = 0.0
                if t > 1:
                    terms.append((ctx.v("u", w, gid, t - 1), -1.0))
                else:
                    rhs = float(g.initial_on)
                ctx.add("logic", (w, gid, t), terms, EQ, rhs)

                ups = [(ctx.v("y", w, gid, i), 1.0) for i in range(max(1, t - g.min_up + 1), t + 1)]
                ctx.add("min_up", (w, gid, t), ups + [(ctx.v("u", w, gid, t), -1.0)], LE, 0.0)

                dns = [(ctx.v("z", w, gid, i), 1.0) for i in range(max(1, t - g.min_down + 1), t + 1)]
                ctx.add("min_down", (w, gid, t),
                        dns + [(ctx.v("u", w, gid, t), 1.0), (ctx.v("x", gid), -1.0)],
                        LE, float(g.initial_units))

                segs = g.startup_segments
                for k in range(1, len(segs)):
                    lo, hi = segs[k - 1].threshold, segs[k].threshold
                    window = [(ctx.v("z", w, gid, t - i), -1.0)
                              for i in range(lo, hi) if ctx.in_horizon(t - i)]
                    ctx.add("startup_type", (w, gid, k, t),
                            [(ctx.v("delta", w, gid, k, t), 1.0)] + window, LE, 0.0)
                ctx.add("startup_select", (w, gid, t),
                        [(ctx.v("delta", w, gid, k, t), 1.0) for k in range(1, len(segs) + 1)]
                        + [(ctx.v("y", w, gid, t), -1.0)], EQ, 0.0)


def storage_initial_soc(ctx: Context, sid: str) -> Tuple[float, Terms]:
    """Initial inventory as ``constant + terms`` (it scales with installed MW)."""
    s = ctx.storage[sid]
    f = s.initial_soc_fraction * s.epr
    return f * s.initial_mw, [(ctx.v("x", sid), f)]


def build_storage_inventory(ctx: Context) -> None:
    """Storage inventory, reserve-aware inventory bounds and the end-of-horizon inventory policy.

    Expects ``ehat``/``chat`` (hourly discharged/charged energy) to exist.
    """
    for w in ctx.scenarios:
        for s in ctx.storage.values():
            sid = s.id
            const0, terms0 = storage_initial_soc(ctx, sid)
            for t in ctx.hours:
                terms = [(ctx.v("phi", w, sid, t), 1.0),
                         (ctx.v("chat", w, sid, t), -s.efficiency),
                         (ctx.v("ehat", w, sid, t), 1.0)]
                rhs = 0.0
                if t > 1:
                    terms.append((ctx.v("phi", w, sid, t - 1), -1.0))
                else:
                    terms += [(c, -a) for c, a in terms0]
                    rhs = const0
                ctx.add("inventory", (w, sid, t), terms, EQ, rhs)

                window = [i for i in (t - 1, t) if ctx.in_horizon(i)]
                ctx.add("soc_max", (w, sid, t),
                        [(ctx.v("phi", w, sid, t), 1.0), (ctx.v("x", sid), -s.epr)]
                        + [(ctx.v("rdn", w, sid, i), 1.0) for i in window],
                        LE, s.epr * s.initial_mw)
                ctx.add("soc_min", (w, sid, t),
                        [(ctx.v("phi", w, sid, t), 1.0)]
                        + [(ctx.v("rup", w, sid, i), -1.0) for i in window], GE, 0.0)
            if ctx.end_soc:
                ctx.add("soc_end", (w, sid),
                        [(ctx.v("phi", w, sid, ctx.T), 1.0)] + [(c, -a) for c, a in terms0],
                        GE, const0)


def build_objective(ctx: Context) -> None:
    """Investment cost plus probability-weighted operating cost (same form for EB and PB)."""
    m = ctx.model
    for g in ctx.thermal.values():
        m.add_obj(ctx.v("x", g.id), g.invest_cost)
    for s in ctx.storage.values():
        m.add_obj(ctx.v("x", s.id), s.invest_cost)
    for v in ctx.renewables.values():
        m.add_obj(ctx.v("x", v.id), v.invest_cost)
    for w in ctx.scenarios:
        pi = ctx.prob[w]
        for t in ctx.hours:
            for g in ctx.thermal.values():
                m.add_obj(ctx.v("ehat", w, g.id, t), pi * (g.var_cost + g.emission_cost))
                m.add_obj(ctx.v("rup", w, g.id, t), pi * g.reserve_cost_up)
                m.add_obj(ctx.v("rdn", w, g.id, t), pi * g.reserve_cost_down)
                m.add_obj(ctx.v("u", w, g.id, t), pi * g.no_load_cost)
                m.add_obj(ctx.v("z", w, g.id, t), pi * g.sd_cost)
                for k, seg in enumerate(g.startup_segments, start=1):
                    m.add_obj(ctx.v("delta", w, g.id, k, t), pi * seg.cost)
            for s in ctx.storage.values():
                m.add_obj(ctx.v("ehat", w, s.id, t), pi * s.var_cost)
                m.add_obj(ctx.v("rup", w, s.id, t), pi * s.reserve_cost_up)
                m.add_obj(ctx.v("rdn", w, s.id, t), pi * s.reserve_cost_down)
            for v in ctx.renewables.values():
                if v.var_cost:
                    m.add_obj(ctx.v("ehat", w, v.id, t), pi * v.var_cost)


def tech_bus(ctx: Context, j: str) -> str:
    for table in (ctx.thermal, ctx.storage, ctx.renewables):
        if j in table:
            return table[j].bus
    raise KeyError(j)


def build_flow_limits(ctx: Context, out_symbol: str, charge_symbol: str, demand_attr: str,
                      family: str) -> None:
    """Shift-factor line limits on net injections in energy or power form."""
    if not ctx.include_network:
        return
    lines = ctx.spec.network.lines
    for w in ctx.scenarios:
        demand = getattr(ctx.hourly[w], demand_attr)
        for l, line in enumerate(lines):
            for t in ctx.hours:
                terms: Dict[int, float] = {}
                for j in ctx.techs:
                    gam = ctx.gamma_shift(l, tech_bus(ctx, j))
                    if gam:
                        col = ctx.v(out_symbol, w, j, t)
                        terms[col] = terms.get(col, 0.0) + gam
                for sid in ctx.storage:
                    gam = ctx.gamma_shift(l, tech_bus(ctx, sid))
                    if gam:
                        col = ctx.v(charge_symbol, w, sid, t)
                        terms[col] = terms.get(col, 0.0) - gam
                idx = t - 1 if demand_attr == "demand_energy" else t
                dterm = sum(ctx.gamma_shift(l, b) * float(series[idx]) for b, series in demand.items())
                ctx.add(f"{family}_max", (line.id, w, t), terms, LE, line.limit + dterm)
                ctx.add(f"{family}_min", (line.id, w, t), terms, GE, -line.limit + dterm)
