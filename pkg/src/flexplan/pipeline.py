"""Stage-1 planning: joint investment and hourly unit commitment.

``run_stage1`` solves EB, EBs or PB with every integer decision enforced.
``run_stage1_semirelaxed`` solves PB twice: first with commitment relaxed to
pick the investment, then with that investment fixed and commitment integer.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from flexplan.formulation.common import INVESTMENT_SYMBOL, Context, present_uc_symbols
from flexplan.formulation.energy import EB, EBS, EnergyFormulationConfig, build_energy_model
from flexplan.formulation.power import PB, PowerFormulationConfig, build_power_model
from flexplan.milp import OPTIMAL, MilpModel, SolveResult, fix_variables, relax_integrality, solve
from flexplan.system import SystemSpec

logger = logging.getLogger(__name__)

SRPB = "SR-PB"
MODEL_KINDS = (EB, EBS, PB, SRPB)

# decisions carried from stage 1 into stage 2
FIXED_SYMBOLS = ("x", "u", "y", "z", "delta", "gamma", "rup", "rdn")


class Stage1Error(RuntimeError):
    """Stage 1 did not produce a usable solution."""

    def __init__(self, message: str, status: str = "", binding: Tuple[str, ...] = ()):
        self.status = status
        self.binding = tuple(binding)
        super().__init__(message)


@dataclass
class Stage1Solution:
    model_kind: str
    tau: int
    objective: float
    costs: Dict[str, float]
    values: Dict[str, Dict[tuple, float]]
    status: str = OPTIMAL
    gap: float = 0.0
    wall_time: float = 0.0
    cpu_time: float = 0.0
    size: Dict[str, int] = field(default_factory=dict)
    stage1a_objective: Optional[float] = None
    stage1a_costs: Optional[Dict[str, float]] = None
    context: Optional[Context] = field(default=None, repr=False, compare=False)

    @property
    def investments(self) -> Dict[str, float]:
        return {idx[0]: v for idx, v in self.values["x"].items()}

    def family(self, symbol: str) -> Dict[tuple, float]:
        return self.values.get(symbol, {})

    @property
    def operating_cost(self) -> float:
        return self.costs["operating"]

    def to_dict(self) -> dict:
        out = {
            "model": self.model_kind,
            "tau_minutes": self.tau,
            "status": self.status,
            "objective": self.objective,
            "costs": dict(self.costs),
            "gap": self.gap,
            "wall_time_s": self.wall_time,
            "cpu_time_s": self.cpu_time,
            "size": dict(self.size),
            "investments": self.investments,
        }
        if self.stage1a_objective is not None:
            out["stage1a_objective"] = self.stage1a_objective
            out["stage1a_costs"] = dict(self.stage1a_costs or {})
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def rows(self):
        """Flat (variable, index, value) rows for CSV export, sorted."""
        for sym in sorted(self.values):
            for idx in sorted(self.values[sym], key=lambda k: tuple(str(i) for i in k)):
                yield sym, ",".join(str(i) for i in idx), self.values[sym][idx]


def build_model(spec: SystemSpec, model_kind: str, tau: int = 5, include_network: bool = True,
                integer_storage: bool = False, end_soc: bool = True) -> Context:
    if model_kind in (EB, EBS):
        return build_energy_model(spec, EnergyFormulationConfig(
            model_kind, tau, include_network, integer_storage, end_soc))
    if model_kind in (PB, SRPB):
        return build_power_model(spec, PowerFormulationConfig(tau, include_network, integer_storage, end_soc))
    raise ValueError(f"unknown model kind {model_kind!r}; expected one of {MODEL_KINDS}")


def cost_breakdown(ctx: Context, x: np.ndarray) -> Dict[str, float]:
    """Split the objective into investment classes and expected operating cost."""
    m = ctx.model
    obj = np.asarray(m.obj)
    parts = {"invest_thermal": 0.0, "invest_ess": 0.0, "invest_vres": 0.0}
    invest_cols = set()
    for col in m.vars.family(INVESTMENT_SYMBOL):
        tech = m.vars.key(col)[1][0]
        key = ("invest_thermal" if tech in ctx.thermal
               else "invest_ess" if tech in ctx.storage else "invest_vres")
        parts[key] += obj[col] * x[col]
        invest_cols.add(col)
    mask = np.ones(m.n_vars, dtype=bool)
    mask[list(invest_cols)] = False
    parts["operating"] = float(obj[mask] @ x[mask])
    parts["total"] = float(obj @ x)
    return {k: float(v) for k, v in parts.items()}


def _check_commitment(ctx: Context, values: Dict[str, Dict[tuple, float]]) -> None:
    u, y, z, d = (values.get(s, {}) for s in ("u", "y", "z", "delta"))
    for w in ctx.scenarios:
        for g in ctx.thermal.values():
            prev = float(g.initial_on)
            for t in ctx.hours:
                key = (w, g.id, t)
                if abs(u[key] - prev - y[key] + z[key]) > 1e-6:
                    raise Stage1Error(f"state transition violated for {g.id} at {w}, hour {t}")
                sd = sum(d[(w, g.id, k, t)] for k in range(1, len(g.startup_segments) + 1))
                if abs(sd - y[key]) > 1e-6:
                    raise Stage1Error(f"startup types do not sum to startups for {g.id} at {w}, hour {t}")
                prev = u[key]


def _extract(ctx: Context, res: SolveResult) -> Dict[str, Dict[tuple, float]]:
    m = ctx.model
    return {sym: res.family(m, sym) for sym in m.vars.symbols()}


def _solve_checked(model: MilpModel, gap, time_limit, seed, solver, label: str) -> SolveResult:
    res = solve(model, gap=gap, time_limit=time_limit, seed=seed, solver=solver)
    if res.status != OPTIMAL:
        binding = res.iis or ()
        msg = f"{label}: solver status {res.status}"
        if binding:
            msg += "; binding constraints: " + ", ".join(binding[:10])
        elif res.message:
            msg += f" ({res.message})"
        raise Stage1Error(msg, res.status, binding)
    return res


def _fixing_roundtrip(ctx: Context, res: SolveResult, gap: float, solver) -> None:
    """Re-solve with the fixing plan imposed; must recover the operating cost."""
    plan = {}
    m = ctx.model
    for sym in FIXED_SYMBOLS:
        for col in m.vars.family(sym):
            plan[col] = res.values[col]
    again = solve(fix_variables(m, plan), gap=gap, solver=solver)
    if not again.ok:
        raise Stage1Error(f"fixing plan round trip failed: {again.status}")
    tol = gap * max(abs(res.objective), 1.0) + 1e-6
    if again.objective > res.objective + tol:
        raise Stage1Error(
            f"fixing plan round trip drifted: {again.objective} vs {res.objective}")


def _package(ctx: Context, kind: str, res: SolveResult, elapsed, cpu) -> Stage1Solution:
    values = _extract(ctx, res)
    _check_commitment(ctx, values)
    costs = cost_breakdown(ctx, res.values)
    return Stage1Solution(kind, ctx.tau, float(res.objective), costs, values, res.status,
                          float(res.gap), elapsed, cpu, ctx.model.summary())


def run_stage1(spec: SystemSpec, model_kind: str = PB, gap: float = 1e-3,
               time_limit: Optional[float] = None, tau: int = 5, include_network: bool = True,
               integer_storage: bool = False, end_soc: bool = True, seed: int = 0,
               solver: Optional[str] = None, verify: bool = True) -> Stage1Solution:
    """Build the chosen formulation, solve it to ``gap`` and extract the schedule."""
    if model_kind == SRPB:
        return run_stage1_semirelaxed(spec, gap, time_limit, tau, include_network,
                                      integer_storage, end_soc, seed, solver, verify)
    t0, c0 = time.perf_counter(), time.process_time()
    ctx = build_model(spec, model_kind, tau, include_network, integer_storage, end_soc)
    res = _solve_checked(ctx.model, gap, time_limit, seed, solver, f"stage 1 ({model_kind})")
    elapsed, cpu = time.perf_counter() - t0, time.process_time() - c0
    if verify:
        _fixing_roundtrip(ctx, res, gap, solver)
    sol = _package(ctx, model_kind, res, elapsed, cpu)
    sol.context = ctx
    return sol


def run_stage1_semirelaxed(spec: SystemSpec, gap: float = 1e-3, time_limit: Optional[float] = None,
                           tau: int = 5, include_network: bool = True, integer_storage: bool = False,
                           end_soc: bool = True, seed: int = 0, solver: Optional[str] = None,
                           verify: bool = True) -> Stage1Solution:
    """Semi-relaxed PB: integer investment with relaxed UC, then integer UC at that investment."""
    t0, c0 = time.perf_counter(), time.process_time()
    ctx = build_model(spec, PB, tau, include_network, integer_storage, end_soc)
    relaxed = relax_integrality(ctx.model, present_uc_symbols(ctx.model))
    res_a = _solve_checked(relaxed, gap, time_limit, seed, solver, "stage 1a")
    costs_a = cost_breakdown(ctx, res_a.values)
    invest = {col: res_a.values[col] for col in ctx.model.vars.family(INVESTMENT_SYMBOL)}
    fixed = fix_variables(ctx.model, invest)
    remaining = None if time_limit is None else max(time_limit - (time.perf_counter() - t0), 1.0)
    try:
        res_b = _solve_checked(fixed, gap, remaining, seed, solver, "stage 1b under fixed investment")
    except Stage1Error as exc:
        raise Stage1Error(str(exc) + " (investment from stage 1a is not re-expanded)",
                          exc.status, exc.binding) from None
    elapsed, cpu = time.perf_counter() - t0, time.process_time() - c0
    if res_a.objective > res_b.objective * (1 + gap) + 1e-6 * max(1.0, abs(res_b.objective)):
        logger.warning("stage 1a objective %.6g exceeds stage 1b %.6g", res_a.objective, res_b.objective)
    if verify:
        _fixing_roundtrip(ctx, res_b, gap, solver)
    sol = _package(ctx, SRPB, res_b, elapsed, cpu)
    sol.stage1a_objective = float(res_a.objective)
    sol.stage1a_costs = costs_a
    sol.context = ctx
    return sol


def extract_fixing_plan(sol: Stage1Solution, fix_gamma: bool = True) -> Dict[Tuple[str, tuple], float]:
    """Investment, commitment, storage mode and reserve decisions to impose in stage 2.

    Dispatch quantities and storage inventory are left free.
    """
    plan = {}
    for sym in FIXED_SYMBOLS:
        if sym == "gamma" and not fix_gamma:
            continue
        for idx, v in sol.family(sym).items():
            plan[(sym, idx)] = v
    return plan
