"""Energy-based GEP-UC model (EB) and its trajectory-aware variant (EBs).

Every hourly quantity is an energy block: ``ehat`` total energy, ``e`` energy
above minimum for thermal clusters, ``chat`` charged energy for storage.
"""
from __future__ import annotations

from dataclasses import dataclass

from flexplan.formulation.common import (
    Context, build_flow_limits, build_objective, build_reserve_requirements,
    build_storage_inventory, build_thermal_investment_link, build_uc_logic,
    declare_commitment, declare_investment, declare_reserves,
)
from flexplan.milp import EQ, GE, LE
from flexplan.system import SystemSpec

EB = "EB"
EBS = "EBs"


@dataclass(frozen=True)
class EnergyFormulationConfig:
    variant: str = EB
    tau: int = 5
    include_network: bool = True
    integer_storage: bool = False
    end_soc: bool = True

    def __post_init__(self):
        if self.variant not in (EB, EBS):
            raise ValueError(f"unknown energy-based variant {self.variant!r}")


def declare_energy_variables(ctx: Context) -> None:
    """All columns of the energy-based model, in a fixed order."""
    declare_investment(ctx)
    m = ctx.model
    for w in ctx.scenarios:
        for t in ctx.hours:
            for j in ctx.techs:
                m.add_var("ehat", (w, j, t))
            for g in ctx.thermal:
                m.add_var("e", (w, g, t))
            for s in ctx.storage:
                m.add_var("chat", (w, s, t))
                m.add_var("phi", (w, s, t))
            declare_reserves(ctx, w, t)
            declare_commitment(ctx, w, t)


def build_objective_eb(ctx: Context) -> None:
    build_objective(ctx)


def build_system_constraints_eb(ctx: Context) -> None:
    """Hourly energy balance, line limits, reserve requirements."""
    for w in ctx.scenarios:
        demand = ctx.hourly[w].total_demand_energy()
        for t in ctx.hours:
            terms = [(ctx.v("ehat", w, j, t), 1.0) for j in ctx.techs]
            terms += [(ctx.v("chat", w, s, t), -1.0) for s in ctx.storage]
            ctx.add("balance", (w, t), terms, EQ, float(demand[t - 1]))
    build_flow_limits(ctx, "ehat", "chat", "demand_energy", "flow")
    build_reserve_requirements(ctx)


def build_investment_links_eb(ctx: Context) -> None:
    build_thermal_investment_link(ctx)
    for w in ctx.scenarios:
        h = ctx.hourly[w]
        for t in ctx.hours:
            for s in ctx.storage.values():
                e, c = ctx.v("ehat", w, s.id, t), ctx.v("chat", w, s.id, t)
                x = ctx.v("x", s.id)
                ctx.add("storage_cap_up", (w, s.id, t),
                        [(e, 1.0), (c, -1.0), (ctx.v("rup", w, s.id, t), 1.0), (x, -1.0)],
                        LE, s.initial_mw)
                ctx.add("storage_cap_dn", (w, s.id, t),
                        [(e, 1.0), (c, -1.0), (ctx.v("rdn", w, s.id, t), -1.0), (x, 1.0)],
                        GE, -s.initial_mw)
            for v in ctx.renewables.values():
                avail = float(h.avail_energy[v.id][t - 1])
                ctx.add("vres_cap", (w, v.id, t),
                        [(ctx.v("ehat", w, v.id, t), 1.0), (ctx.v("x", v.id), -avail)],
                        LE, avail * v.initial_mw)


def build_thermal_output_eb(ctx: Context, variant: str = EB) -> None:
    """Capacity limits on energy above minimum and the total-energy definition."""
    if variant not in (EB, EBS):
        raise ValueError(f"unknown energy-based variant {variant!r}")
    for w in ctx.scenarios:
        for g in ctx.thermal.values():
            gid = g.id
            span = g.pmax - g.pmin
            traj = ctx.traj[gid]
            for t in ctx.hours:
                e, u, y = ctx.v("e", w, gid, t), ctx.v("u", w, gid, t), ctx.v("y", w, gid, t)
                rup, rdn = ctx.v("rup", w, gid, t), ctx.v("rdn", w, gid, t)
                z_next = ctx.opt("z", w, gid, t + 1)
                head = [(e, 1.0), (rup, 1.0), (u, -span)]
                if g.min_up == 1:
                    a = head + [(y, max(g.sd_capability - g.su_capability, 0.0))]
                    if z_next is not None:
                        a.append((z_next, g.pmax - g.sd_capability))
                    ctx.add("cap_sd", (w, gid, t), a, LE, 0.0)
                    b = head + [(y, g.pmax - g.su_capability)]
                    if z_next is not None:
                        b.append((z_next, max(g.su_capability - g.sd_capability, 0.0)))
                    ctx.add("cap_su", (w, gid, t), b, LE, 0.0)
                else:
                    a = head + [(y, g.pmax - g.su_capability)]
                    if z_next is not None:
                        a.append((z_next, g.pmax - g.sd_capability))
                    ctx.add("cap", (w, gid, t), a, LE, 0.0)
                ctx.add("floor", (w, gid, t), [(e, 1.0), (rdn, -1.0)], GE, 0.0)

                total = [(ctx.v("ehat", w, gid, t), 1.0), (u, -g.pmin), (e, -1.0)]
                if variant == EBS:
                    # startup hours precede the sync hour s: hour t is the i-th
                    # startup hour when s = t - i + SU^D + 1
                    for k, energies in enumerate(traj.su_energy, start=1):
                        dur = len(energies)
                        for i, en in enumerate(energies, start=1):
                            s = t - i + dur + 1
                            if ctx.in_horizon(s) and en:
                                total.append((ctx.v("delta", w, gid, k, s), -en))
                    for i, en in enumerate(traj.sd_energy, start=1):
                        d = t - i + 1
                        if ctx.in_horizon(d) and en:
                            total.append((ctx.v("z", w, gid, d), -en))
                ctx.add("energy", (w, gid, t), total, EQ, 0.0)


def build_storage_eb(ctx: Context) -> None:
    for w in ctx.scenarios:
        for s in ctx.storage.values():
            big_m = s.power_max
            for t in ctx.hours:
                gam = ctx.v("gamma", w, s.id, t)
                ctx.add("mode_charge", (w, s.id, t),
                        [(ctx.v("chat", w, s.id, t), 1.0), (gam, big_m)], LE, big_m)
                ctx.add("mode_discharge", (w, s.id, t),
                        [(ctx.v("ehat", w, s.id, t), 1.0), (gam, -big_m)], LE, 0.0)
    build_storage_inventory(ctx)


def build_flexibility_eb(ctx: Context) -> None:
    """Hour-to-hour ramp limits that leave room for tau-minute reserve."""
    tau = ctx.tau
    for w in ctx.scenarios:
        for g in ctx.thermal.values():
            gid = g.id
            for t in ctx.hours:
                e, u = ctx.v("e", w, gid, t), ctx.v("u", w, gid, t)
                up = [(e, 1.0), (ctx.v("rup", w, gid, t), 1.0), (u, -tau * g.ramp_up)]
                dn = [(e, 1.0), (ctx.v("rdn", w, gid, t), -1.0)]
                rhs_up = rhs_dn = 0.0
                if t > 1:
                    up.append((ctx.v("e", w, gid, t - 1), -1.0))
                    dn += [(ctx.v("e", w, gid, t - 1), -1.0), (ctx.v("u", w, gid, t - 1), tau * g.ramp_down)]
                else:
                    rhs_up = g.initial_output
                    rhs_dn = g.initial_output - tau * g.ramp_down * g.initial_on
                ctx.add("ramp_up", (w, gid, t), up, LE, rhs_up)
                ctx.add("ramp_dn", (w, gid, t), dn, GE, rhs_dn)
        for s in ctx.storage.values():
            sid = s.id
            x = ctx.v("x", sid)
            for t in ctx.hours:
                delta = [(ctx.v("chat", w, sid, t), 1.0), (ctx.v("ehat", w, sid, t), 1.0)]
                if t > 1:
                    delta += [(ctx.v("chat", w, sid, t - 1), -1.0), (ctx.v("ehat", w, sid, t - 1), -1.0)]
                ctx.add("storage_ramp_up", (w, sid, t),
                        delta + [(ctx.v("rup", w, sid, t), 1.0), (x, -tau * s.ramp_up)],
                        LE, tau * s.ramp_up * s.initial_mw)
                ctx.add("storage_ramp_dn", (w, sid, t),
                        delta + [(ctx.v("rdn", w, sid, t), -1.0), (x, tau * s.ramp_down)],
                        GE, -tau * s.ramp_down * s.initial_mw)


def build_energy_model(spec: SystemSpec, config: EnergyFormulationConfig = EnergyFormulationConfig()) -> Context:
    """Assemble the full EB or EBs model; the MILP is ``ctx.model``."""
    ctx = Context(spec, tau=config.tau, include_network=config.include_network,
                  integer_storage=config.integer_storage, end_soc=config.end_soc,
                  name=f"gep_{config.variant}")
    declare_energy_variables(ctx)
    build_objective_eb(ctx)
    build_system_constraints_eb(ctx)
    build_investment_links_eb(ctx)
    build_uc_logic(ctx)
    build_thermal_output_eb(ctx, config.variant)
    build_storage_eb(ctx)
    build_flexibility_eb(ctx)
    return ctx
