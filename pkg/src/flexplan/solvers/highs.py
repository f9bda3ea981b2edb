"""Default adapter backed by the HiGHS C++ library through ``highspy``."""
from __future__ import annotations

import math
import time
from typing import Optional

import highspy
import numpy as np

from flexplan.milp import (
    CONTINUOUS, ERROR, INFEASIBLE, LIMIT, OPTIMAL, UNBOUNDED, MilpModel, SolveResult,
)

_STATUS = {
    highspy.HighsModelStatus.kOptimal: OPTIMAL,
    highspy.HighsModelStatus.kInfeasible: INFEASIBLE,
    highspy.HighsModelStatus.kUnbounded: UNBOUNDED,
    highspy.HighsModelStatus.kUnboundedOrInfeasible: INFEASIBLE,
    highspy.HighsModelStatus.kTimeLimit: LIMIT,
    highspy.HighsModelStatus.kIterationLimit: LIMIT,
    highspy.HighsModelStatus.kSolutionLimit: LIMIT,
    highspy.HighsModelStatus.kObjectiveBound: LIMIT,
}


def _new_highs(gap: float, time_limit: Optional[float], seed: int) -> highspy.Highs:
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", float(gap))
    h.setOptionValue("random_seed", int(seed))
    h.setOptionValue("threads", 1)
    if time_limit is not None:
        h.setOptionValue("time_limit", float(time_limit))
    return h


def _to_lp(model: MilpModel) -> highspy.HighsLp:
    lp = highspy.HighsLp()
    lp.num_col_ = model.n_vars
    lp.num_row_ = model.n_constraints
    lp.col_cost_ = np.asarray(model.obj, dtype=float)
    inf = highspy.kHighsInf
    lp.col_lower_ = np.array([-inf if math.isinf(v) else v for v in model.lb], dtype=float)
    lp.col_upper_ = np.array([inf if math.isinf(v) else v for v in model.ub], dtype=float)
    lo, hi = model.row_bounds()
    lp.row_lower_ = np.where(np.isinf(lo), -inf, lo)
    lp.row_upper_ = np.where(np.isinf(hi), inf, hi)
    csc = model.matrix().tocsc()
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = csc.indptr.astype(np.int32)
    lp.a_matrix_.index_ = csc.indices.astype(np.int32)
    lp.a_matrix_.value_ = csc.data.astype(float)
    if any(k != CONTINUOUS for k in model.kind):
        lp.integrality_ = [
            highspy.HighsVarType.kContinuous if k == CONTINUOUS else highspy.HighsVarType.kInteger
            for k in model.kind
        ]
    return lp


def _result(h: highspy.Highs, n: int, elapsed: float, is_mip: bool) -> SolveResult:
    status = _STATUS.get(h.getModelStatus(), ERROR)
    info = h.getInfo()
    values = np.zeros(n)
    objective = math.nan
    if h.getInfo().primal_solution_status == highspy.kSolutionStatusFeasible:
        values = np.array(h.getSolution().col_value, dtype=float)
        objective = float(info.objective_function_value)
    gap = float(info.mip_gap) if is_mip else 0.0
    bound = float(info.mip_dual_bound) if is_mip else objective
    if status == LIMIT and math.isnan(objective):
        status = LIMIT
    iis = None
    if status == INFEASIBLE:
        try:
            st, iis_obj = h.getIis()
            rows = getattr(iis_obj, "row_index_", None)
            if rows is not None:
                iis = tuple(str(r) for r in rows)
        except Exception:  # IIS is best-effort
            iis = None
    return SolveResult(status, objective, gap if math.isfinite(gap) else math.inf, values,
                       elapsed, h.modelStatusToString(h.getModelStatus()), bound, iis)


class HighsAdapter:
    name = "highs"

    def solve(self, model: MilpModel, gap: float = 1e-3, time_limit: Optional[float] = None,
              seed: int = 0) -> SolveResult:
        h = _new_highs(gap, time_limit, seed)
        h.passModel(_to_lp(model))
        start = time.perf_counter()
        h.run()
        elapsed = time.perf_counter() - start
        res = _result(h, model.n_vars, elapsed, any(k != CONTINUOUS for k in model.kind))
        if res.iis is not None:
            names = tuple(model.constraints[int(r)].name for r in res.iis
                          if r.isdigit() and int(r) < model.n_constraints)
            res = SolveResult(res.status, res.objective, res.gap, res.values, res.wall_time,
                              res.message, res.dual_bound, names)
        return res

    def solve_lp_file(self, path: str, gap: float = 1e-3, seed: int = 0) -> SolveResult:
        """Read an LP-format file with HiGHS's own parser and solve it."""
        h = _new_highs(gap, None, seed)
        h.readModel(str(path))
        start = time.perf_counter()
        h.run()
        n = h.getLp().num_col_
        is_mip = bool(len(h.getLp().integrality_))
        return _result(h, n, time.perf_counter() - start, is_mip)
