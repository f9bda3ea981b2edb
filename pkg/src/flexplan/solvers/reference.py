"""Pure-numpy reference solver: two-phase dense simplex inside depth-first branch and bound.

Meant for test-scale models (a few hundred columns).  Bland's rule keeps the
simplex from cycling at the price of speed.
"""
from __future__ import annotations

import math
import time
from typing import Optional, Tuple

import numpy as np

from flexplan.milp import (
    CONTINUOUS, INFEASIBLE, INTEGRALITY_TOL, LIMIT, OPTIMAL, UNBOUNDED, MilpModel, SolveResult,
)

TOL = 1e-9


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    # only rows with a nonzero entry in the pivot column change
    rows = np.flatnonzero(tab[:, col])
    rows = rows[rows != row]
    tab[rows] -= np.outer(tab[rows, col], tab[row])
    basis[row] = col


def _run(tab: np.ndarray, basis: np.ndarray, allowed: np.ndarray, max_iter: int) -> str:
    """Minimize the objective stored in the last row of ``tab`` (reduced costs)."""
    m = tab.shape[0] - 1
    for _ in range(max_iter):
        cost = tab[-1, :-1]
        candidates = np.flatnonzero((cost < -TOL) & allowed)
        if candidates.size == 0:
            return "optimal"
        col = candidates[0]
        column = tab[:m, col]
        pos = column > TOL
        if not pos.any():
            return "unbounded"
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + TOL * max(1.0, abs(best)))
        row = ties[np.argmin(basis[ties])]
        _pivot(tab, basis, row, col)
    return "limit"


def simplex(c: np.ndarray, a_eq: np.ndarray, b_eq: np.ndarray,
            max_iter: int = 50_000) -> Tuple[str, Optional[np.ndarray], float]:
    """min c.x s.t. a_eq x = b_eq, x >= 0.  Returns (status, x, objective)."""
    m, n = a_eq.shape
    a = a_eq.astype(float).copy()
    b = b_eq.astype(float).copy()
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1
    # phase 1: one artificial per row
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -a.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = np.arange(n, n + m)
    allowed = np.ones(n + m, dtype=bool)
    status = _run(tab, basis, allowed, max_iter)
    if status == "limit":
        return "limit", None, math.nan
    if -tab[-1, -1] > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        return "infeasible", None, math.nan
    # drive artificials out of the basis; drop redundant rows
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            nz = np.flatnonzero(np.abs(tab[r, :n]) > 1e-9)
            if nz.size:
                _pivot(tab, basis, r, nz[0])
            else:
                keep[r] = False
    rows = np.flatnonzero(keep)
    tab = np.vstack([tab[rows][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = basis[rows]
    # phase 2
    tab[-1, :n] = c
    for r, bcol in enumerate(basis):
        if tab[-1, bcol] != 0:
            tab[-1] -= tab[-1, bcol] * tab[r]
    status = _run(tab, basis, np.ones(n, dtype=bool), max_iter)
    if status != "optimal":
        return status, None, math.nan
    x = np.zeros(n)
    x[basis] = tab[:-1, -1]
    return "optimal", x, float(c @ x)


def solve_lp(c, a, lo_row, hi_row, lb, ub) -> Tuple[str, Optional[np.ndarray], float]:
    """Bounded-variable, ranged-row LP via conversion to standard form."""
    n = len(c)
    a = np.asarray(a, dtype=float)
    # substitute x = shift + sign * x'  (x' >= 0); free columns split
    cols_map = []  # (orig col, sign)
    shift = np.zeros(n)
    extra_rows = []  # (new col, bound)
    for j in range(n):
        if not math.isinf(lb[j]):
            shift[j] = lb[j]
            cols_map.append((j, 1.0))
            if not math.isinf(ub[j]):
                extra_rows.append((len(cols_map) - 1, ub[j] - lb[j]))
        elif not math.isinf(ub[j]):
            shift[j] = ub[j]
            cols_map.append((j, -1.0))
        else:
            cols_map.append((j, 1.0))
            cols_map.append((j, -1.0))
    nn = len(cols_map)
    t = np.zeros((n, nn))
    for k, (j, sgn) in enumerate(cols_map):
        t[j, k] = sgn
    a2 = a @ t
    act0 = a @ shift
    rows, rhs, slack_sign = [], [], []
    for i in range(a.shape[0]):
        lo, hi = lo_row[i] - act0[i], hi_row[i] - act0[i]
        if lo == hi:
            rows.append(a2[i]); rhs.append(lo); slack_sign.append(0.0)
            continue
        if not math.isinf(hi):
            rows.append(a2[i]); rhs.append(hi); slack_sign.append(1.0)
        if not math.isinf(lo):
            rows.append(a2[i]); rhs.append(lo); slack_sign.append(-1.0)
    for k, bound in extra_rows:
        row = np.zeros(nn)
        row[k] = 1.0
        rows.append(row); rhs.append(bound); slack_sign.append(1.0)
    n_slack = sum(1 for s in slack_sign if s != 0)
    m = len(rows)
    a_eq = np.zeros((m, nn + n_slack))
    si = nn
    for i, (row, s) in enumerate(zip(rows, slack_sign)):
        a_eq[i, :nn] = row
        if s != 0:
            a_eq[i, si] = s
            si += 1
    c2 = np.concatenate([np.asarray(c, dtype=float) @ t, np.zeros(n_slack)])
    if m == 0:
        if np.any(c2 < -TOL):
            return "unbounded", None, math.nan
        return "optimal", shift.copy(), float(np.dot(c, shift))
    status, xs, _ = simplex(c2, a_eq, np.array(rhs))
    if status != "optimal":
        return status, None, math.nan
    x = shift + t @ xs[:nn]
    return "optimal", x, float(np.dot(c, x))


class ReferenceAdapter:
    name = "reference"

    def __init__(self, node_limit: int = 100_000):
        self.node_limit = node_limit

    def solve(self, model: MilpModel, gap: float = 1e-3, time_limit: Optional[float] = None,
              seed: int = 0) -> SolveResult:
        start = time.perf_counter()
        c = np.asarray(model.obj, dtype=float)
        a = model.matrix().toarray()
        lo_row, hi_row = model.row_bounds()
        is_int = np.array([k != CONTINUOUS for k in model.kind])
        lb0 = np.array(model.lb, dtype=float)
        ub0 = np.array(model.ub, dtype=float)
        lb0[is_int] = np.ceil(lb0[is_int] - INTEGRALITY_TOL)
        ub0[is_int] = np.floor(ub0[is_int] + INTEGRALITY_TOL)

        best_x, best_obj = None, math.inf
        root_bound = -math.inf
        stack = [(lb0, ub0)]
        nodes = 0
        hit_limit = False
        open_bounds = []
        while stack:
            if nodes >= self.node_limit or (
                time_limit is not None and time.perf_counter() - start > time_limit
            ):
                hit_limit = True
                break
            lb, ub = stack.pop()
            nodes += 1
            if np.any(lb > ub):
                continue
            status, x, obj = solve_lp(c, a, lo_row, hi_row, lb, ub)
            if status == "unbounded":
                if nodes == 1:
                    return SolveResult(UNBOUNDED, math.nan, math.inf, np.zeros(model.n_vars),
                                       time.perf_counter() - start, "LP relaxation unbounded")
                continue
            if status != "optimal":
                continue
            if nodes == 1:
                root_bound = obj
            if obj >= best_obj - gap * abs(best_obj) - 1e-9:
                continue
            frac = np.abs(x - np.round(x))
            frac[~is_int] = 0.0
            if frac.max(initial=0.0) <= INTEGRALITY_TOL:
                best_x, best_obj = x, obj
                continue
            j = int(np.argmax(frac))
            down_ub = ub.copy(); down_ub[j] = math.floor(x[j])
            up_lb = lb.copy(); up_lb[j] = math.ceil(x[j])
            stack.append((up_lb, ub))
            stack.append((lb, down_ub))
        elapsed = time.perf_counter() - start
        if best_x is None:
            status = LIMIT if hit_limit else INFEASIBLE
            return SolveResult(status, math.nan, math.inf, np.zeros(model.n_vars), elapsed)
        if hit_limit:
            bound = root_bound
            rel = (best_obj - bound) / max(abs(best_obj), 1e-10)
            return SolveResult(LIMIT, best_obj, rel, best_x, elapsed, "node/time limit", bound)
        rel = 0.0 if not is_int.any() else gap
        return SolveResult(OPTIMAL, best_obj, min(rel, gap), best_x, elapsed, f"{nodes} nodes",
                           best_obj - rel * abs(best_obj))
