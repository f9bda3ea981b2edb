"""Power-based GEP-UC model (PB).

Decisions are instantaneous powers at hour boundaries: ``phat`` total output,
``p`` output above minimum, ``c`` charging power.  Hourly energies ``ehat`` and
``chat`` follow by the trapezoid rule.  Boundary 0 is the initial state; only
renewable output there is a decision (bounded by availability).
"""
from __future__ import annotations

from dataclasses import dataclass

from flexplan.formulation.common import (
    Context, build_flow_limits, build_objective, build_reserve_requirements,
    build_storage_inventory, build_thermal_investment_link, build_uc_logic,
    declare_commitment, declare_investment, declare_reserves,
)
from flexplan.milp import EQ, GE, LE
from flexplan.system import QUICK, SLOW, SystemSpec

PB = "PB"


@dataclass(frozen=True)
class PowerFormulationConfig:
    tau: int = 5
    include_network: bool = True
    integer_storage: bool = False
    end_soc: bool = True

    def __post_init__(self):
        if self.tau <= 0 or 60 % self.tau:
            raise ValueError(f"60 mod τ ≠ 0 (τ = {self.tau})")


def declare_power_variables(ctx: Context) -> None:
    declare_investment(ctx)
    m = ctx.model
    for w in ctx.scenarios:
        for v in ctx.renewables:
            m.add_var("phat", (w, v, 0))
        for t in ctx.hours:
            for j in ctx.techs:
                m.add_var("phat", (w, j, t))
                m.add_var("ehat", (w, j, t))
            for g in ctx.thermal:
                m.add_var("p", (w, g, t))
            for s in ctx.storage:
                m.add_var("c", (w, s, t))
                m.add_var("chat", (w, s, t))
                m.add_var("phi", (w, s, t))
            declare_reserves(ctx, w, t)
            declare_commitment(ctx, w, t)


def _initial_power(ctx: Context, j: str) -> float:
    """Fixed boundary-0 output (thermal initial state, storage idle)."""
    if j in ctx.thermal:
        g = ctx.thermal[j]
        return g.pmin * g.initial_on + g.initial_output
    return 0.0


def _prev(ctx: Context, symbol: str, w: str, j: str, t: int, const: float):
    """Column for hour t-1, or the initial constant when t-1 is boundary 0."""
    col = ctx.opt(symbol, w, j, t - 1)
    return (col, None) if col is not None else (None, const)


def build_energy_coupling(ctx: Context) -> None:
    """Hourly energy equals the average of the two boundary powers."""
    for w in ctx.scenarios:
        for t in ctx.hours:
            for j in ctx.techs:
                terms = [(ctx.v("ehat", w, j, t), 1.0), (ctx.v("phat", w, j, t), -0.5)]
                col, const = _prev(ctx, "phat", w, j, t, _initial_power(ctx, j))
                rhs = 0.0
                if col is not None:
                    terms.append((col, -0.5))
                else:
                    rhs = 0.5 * const
                ctx.add("trapezoid", (w, j, t), terms, EQ, rhs)
            for s in ctx.storage:
                terms = [(ctx.v("chat", w, s, t), 1.0), (ctx.v("c", w, s, t), -0.5)]
                if t > 1:
                    terms.append((ctx.v("c", w, s, t - 1), -0.5))
                ctx.add("trapezoid_charge", (w, s, t), terms, EQ, 0.0)


def build_system_constraints_pb(ctx: Context) -> None:
    for w in ctx.scenarios:
        demand = ctx.hourly[w].total_demand_power()
        for t in ctx.hours:
            terms = [(ctx.v("phat", w, j, t), 1.0) for j in ctx.techs]
            terms += [(ctx.v("c", w, s, t), -1.0) for s in ctx.storage]
            ctx.add("balance", (w, t), terms, EQ, float(demand[t]))
    build_flow_limits(ctx, "phat", "c", "demand_power", "flow")
    build_reserve_requirements(ctx)


def build_investment_links_pb(ctx: Context) -> None:
    build_thermal_investment_link(ctx)
    for w in ctx.scenarios:
        h = ctx.hourly[w]
        for t in ctx.hours:
            for s in ctx.storage.values():
                p, c = ctx.v("phat", w, s.id, t), ctx.v("c", w, s.id, t)
                x = ctx.v("x", s.id)
                ctx.add("storage_cap_up", (w, s.id, t),
                        [(p, 1.0), (c, -1.0), (ctx.v("rup", w, s.id, t), 1.0), (x, -1.0)],
                        LE, s.initial_mw)
                ctx.add("storage_cap_dn", (w, s.id, t),
                        [(p, 1.0), (c, -1.0), (ctx.v("rdn", w, s.id, t), -1.0), (x, 1.0)],
                        GE, -s.initial_mw)
        for v in ctx.renewables.values():
            for t in range(0, ctx.T + 1):
                avail = float(h.avail_power[v.id][t])
                ctx.add("vres_cap", (w, v.id, t),
                        [(ctx.v("phat", w, v.id, t), 1.0), (ctx.v("x", v.id), -avail)],
                        LE, avail * v.initial_mw)


def build_thermal_output_pb(ctx: Context) -> None:
    """Boundary-power capacity limits and the total-output definition.

    For slow-start clusters the startup sample taken ``i`` hours before the
    end of an ``SU^D``-hour ramp is the trajectory point reached after
    ``i - 1`` ramp hours, so the ramp ends exactly at minimum output on the
    boundary that the synchronization term already covers.
    """
    for w in ctx.scenarios:
        for g in ctx.thermal.values():
            gid = g.id
            if g.start_class not in (QUICK, SLOW):
                raise ValueError(f"{gid}: start class must be quick or slow, got {g.start_class!r}")
            span = g.pmax - g.pmin
            traj = ctx.traj[gid]
            for t in ctx.hours:
                p, u = ctx.v("p", w, gid, t), ctx.v("u", w, gid, t)
                y_next, z_next = ctx.opt("y", w, gid, t + 1), ctx.opt("z", w, gid, t + 1)
                cap = [(p, 1.0), (ctx.v("rup", w, gid, t), 1.0), (u, -span)]
                if z_next is not None:
                    cap.append((z_next, g.pmax - g.sd_capability))
                if y_next is not None:
                    cap.append((y_next, -(g.su_capability - g.pmin)))
                ctx.add("cap", (w, gid, t), cap, LE, 0.0)
                ctx.add("floor", (w, gid, t), [(p, 1.0), (ctx.v("rdn", w, gid, t), -1.0)], GE, 0.0)

                total = [(ctx.v("phat", w, gid, t), 1.0), (u, -g.pmin), (p, -1.0)]
                if y_next is not None:
                    total.append((y_next, -g.pmin))
                if g.start_class == SLOW:
                    for k, powers in enumerate(traj.su_power, start=1):
                        dur = len(powers)
                        samples = (0.0,) + powers[:-1]
                        for i in range(1, dur + 1):
                            s = t - i + dur + 2
                            if ctx.in_horizon(s) and samples[i - 1]:
                                total.append((ctx.v("delta", w, gid, k, s), -samples[i - 1]))
                    for i in range(2, len(traj.sd_power) + 1):
                        d = t - i + 2
                        if ctx.in_horizon(d) and traj.sd_power[i - 1]:
                            total.append((ctx.v("z", w, gid, d), -traj.sd_power[i - 1]))
                ctx.add("power", (w, gid, t), total, EQ, 0.0)


def build_storage_pb(ctx: Context) -> None:
    for w in ctx.scenarios:
        for s in ctx.storage.values():
            big_m = s.power_max
            for t in ctx.hours:
                gam = ctx.v("gamma", w, s.id, t)
                ctx.add("mode_charge", (w, s.id, t),
                        [(ctx.v("c", w, s.id, t), 1.0), (gam, big_m)], LE, big_m)
                ctx.add("mode_discharge", (w, s.id, t),
                        [(ctx.v("phat", w, s.id, t), 1.0), (gam, -big_m)], LE, 0.0)
    build_storage_inventory(ctx)


def build_flexibility_pb(ctx: Context) -> None:
    """Within-hour ramp and tau-minute capacity checks for reserve deliverability."""
    tau = ctx.tau
    a, b = tau / 60.0, (60.0 - tau) / 60.0
    for w in ctx.scenarios:
        for g in ctx.thermal.values():
            gid = g.id
            span = g.pmax - g.pmin
            for t in ctx.hours:
                p, u = ctx.v("p", w, gid, t), ctx.v("u", w, gid, t)
                rup, rdn = ctx.v("rup", w, gid, t), ctx.v("rdn", w, gid, t)
                if t > 1:
                    p_prev, u_prev = ctx.v("p", w, gid, t - 1), ctx.v("u", w, gid, t - 1)
                    ctx.add("ramp_up", (w, gid, t),
                            [(p, a), (p_prev, -a), (rup, 1.0), (u, -tau * g.ramp_up)], LE, 0.0)
                    ctx.add("ramp_dn", (w, gid, t),
                            [(p, a), (p_prev, -a), (rdn, -1.0), (u_prev, tau * g.ramp_down)], GE, 0.0)
                    ctx.add("cap_tau", (w, gid, t),
                            [(p, a), (p_prev, b), (rup, 1.0), (u, -span)], LE, 0.0)
                    ctx.add("floor_tau", (w, gid, t), [(p, a), (p_prev, b), (rdn, -1.0)], GE, 0.0)
                else:
                    p0 = g.initial_output
                    ctx.add("ramp_up", (w, gid, t),
                            [(p, a), (rup, 1.0), (u, -tau * g.ramp_up)], LE, a * p0)
                    ctx.add("ramp_dn", (w, gid, t), [(p, a), (rdn, -1.0)], GE,
                            a * p0 - tau * g.ramp_down * g.initial_on)
                    ctx.add("cap_tau", (w, gid, t), [(p, a), (rup, 1.0), (u, -span)], LE, -b * p0)
                    ctx.add("floor_tau", (w, gid, t), [(p, a), (rdn, -1.0)], GE, -b * p0)
        for s in ctx.storage.values():
            sid = s.id
            x = ctx.v("x", sid)
            for t in ctx.hours:
                now = [(ctx.v("c", w, sid, t), 1.0), (ctx.v("phat", w, sid, t), 1.0)]
                prev = []
                if t > 1:
                    prev = [(ctx.v("c", w, sid, t - 1), 1.0), (ctx.v("phat", w, sid, t - 1), 1.0)]
                rup, rdn = ctx.v("rup", w, sid, t), ctx.v("rdn", w, sid, t)
                delta = [(c, a * k) for c, k in now] + [(c, -a * k) for c, k in prev]
                mix = [(c, a * k) for c, k in now] + [(c, b * k) for c, k in prev]
                ctx.add("storage_ramp_up", (w, sid, t),
                        delta + [(rup, 1.0), (x, -tau * s.ramp_up)], LE, tau * s.ramp_up * s.initial_mw)
                ctx.add("storage_cap_tau", (w, sid, t), mix + [(rup, 1.0), (x, -1.0)], LE, s.initial_mw)
                ctx.add("storage_ramp_dn", (w, sid, t),
                        delta + [(rdn, -1.0), (x, tau * s.ramp_down)], GE, -tau * s.ramp_down * s.initial_mw)
                ctx.add("storage_floor_tau", (w, sid, t), mix + [(rdn, -1.0)], GE, 0.0)


def build_power_model(spec: SystemSpec, config: PowerFormulationConfig = PowerFormulationConfig()) -> Context:
    """Assemble the full PB model; the MILP is ``ctx.model``."""
    ctx = Context(spec, tau=config.tau, include_network=config.include_network,
                  integer_storage=config.integer_storage, end_soc=config.end_soc, name="gep_PB")
    declare_power_variables(ctx)
    build_objective(ctx)
    build_energy_coupling(ctx)
    build_system_constraints_pb(ctx)
    build_investment_links_pb(ctx)
    build_uc_logic(ctx)
    build_thermal_output_pb(ctx)
    build_storage_pb(ctx)
    build_flexibility_pb(ctx)
    return ctx
