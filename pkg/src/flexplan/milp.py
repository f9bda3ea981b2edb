"""Solver-agnostic sparse MILP container and model surgery.

Variables are addressed by ``(symbol, index)`` keys, e.g. ``("u", ("w1", "g1", 5))``,
through a :class:`VariableMap`.  Constraints keep their coefficients as sparse
rows.  Everything is insertion-ordered, so building the same model twice gives
identical column/row numbering.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

CONTINUOUS = "continuous"
INTEGER = "integer"
BINARY = "binary"

LE, EQ, GE = "<=", "=", ">="

OPTIMAL = "optimal-within-gap"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"
ERROR = "error"

INTEGRALITY_TOL = 1e-6
FIX_TOL = 1e-4

Key = Tuple[str, Tuple]


def format_name(symbol: str, index: Sequence) -> str:
    if not index:
        return symbol
    return f"{symbol}({','.join(str(i) for i in index)})"


class VariableMap:
    """Bijection between ``(symbol, index)`` keys and column ids."""

    def __init__(self):
        self._col: Dict[Key, int] = {}
        self._key: List[Key] = []

    def add(self, symbol: str, index: Tuple) -> int:
        key = (symbol, tuple(index))
        if key in self._col:
            raise KeyError(f"variable {format_name(*key)} already exists")
        self._col[key] = len(self._key)
        self._key.append(key)
        return self._col[key]

    def col(self, symbol: str, *index) -> int:
        try:
            return self._col[(symbol, tuple(index))]
        except KeyError:
            raise KeyError(f"unknown variable {format_name(symbol, index)}") from None

    def get(self, symbol: str, *index) -> Optional[int]:
        return self._col.get((symbol, tuple(index)))

    def key(self, col: int) -> Key:
        return self._key[col]

    def family(self, symbol: str) -> List[int]:
        return [c for c, (s, _) in enumerate(self._key) if s == symbol]

    def symbols(self) -> List[str]:
        return list(dict.fromkeys(s for s, _ in self._key))

    def __contains__(self, key) -> bool:
        return (key[0], tuple(key[1])) in self._col

    def __len__(self) -> int:
        return len(self._key)

    def items(self):
        return self._col.items()


@dataclass
class Constraint:
    name: str
    cols: np.ndarray
    coefs: np.ndarray
    sense: str
    rhs: float


class MilpModel:
    """Minimization MILP with named, bounded variables and sparse rows."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.vars = VariableMap()
        self.names: List[str] = []
        self.lb: List[float] = []
        self.ub: List[float] = []
        self.kind: List[str] = []
        self.obj: List[float] = []
        self.constraints: List[Constraint] = []
        self._con_names: Dict[str, int] = {}

    # -- building ----------------------------------------------------------
    def add_var(self, symbol: str, index: Sequence = (), lb: float = 0.0,
                ub: float = math.inf, kind: str = CONTINUOUS, obj: float = 0.0) -> int:
        if kind not in (CONTINUOUS, INTEGER, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ValueError(f"{format_name(symbol, index)}: lower bound {lb} > upper bound {ub}")
        col = self.vars.add(symbol, tuple(index))
        self.names.append(format_name(symbol, index))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.kind.append(kind)
        self.obj.append(float(obj))
        return col

    def var(self, symbol: str, *index) -> int:
        return self.vars.col(symbol, *index)

    def add_obj(self, col: int, coef: float) -> None:
        self.obj[col] += coef

    def add_constraint(self, name: str, terms: Union[Mapping[int, float], Iterable[Tuple[int, float]]],
                       sense: str, rhs: float) -> int:
        """Add ``sum(coef * x[col]) <sense> rhs``; repeated columns are summed, zeros dropped."""
        if sense not in (LE, EQ, GE):
            raise ValueError(f"unknown sense {sense!r}")
        if name in self._con_names:
            raise KeyError(f"constraint {name} already exists")
        merged: Dict[int, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        n = len(self.names)
        for col, coef in items:
            if not 0 <= col < n:
                raise KeyError(f"constraint {name} references unknown column {col}")
            merged[col] = merged.get(col, 0.0) + float(coef)
        cols = np.array([c for c, v in merged.items() if v != 0.0], dtype=np.int64)
        vals = np.array([merged[c] for c in cols], dtype=float)
        self._con_names[name] = len(self.constraints)
        self.constraints.append(Constraint(name, cols, vals, sense, float(rhs)))
        return self._con_names[name]

    def constraint(self, name: str) -> Constraint:
        return self.constraints[self._con_names[name]]

    def has_constraint(self, name: str) -> bool:
        return name in self._con_names

    # -- queries -----------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def is_integer(self) -> np.ndarray:
        return np.array([k != CONTINUOUS for k in self.kind], dtype=bool)

    def matrix(self) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            rows.append(np.full(con.cols.size, i))
            cols.append(con.cols)
            vals.append(con.coefs)
        if rows:
            r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        else:
            r = c = np.zeros(0, dtype=np.int64)
            v = np.zeros(0)
        return sparse.csr_matrix((v, (r, c)), shape=(self.n_constraints, self.n_vars))

    def row_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.n_constraints, -np.inf)
        hi = np.full(self.n_constraints, np.inf)
        for i, con in enumerate(self.constraints):
            if con.sense in (GE, EQ):
                lo[i] = con.rhs
            if con.sense in (LE, EQ):
                hi[i] = con.rhs
        return lo, hi

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.dot(self.obj, x))

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Constraint violation per row (0 when satisfied)."""
        act = self.matrix() @ np.asarray(x, dtype=float)
        lo, hi = self.row_bounds()
        return np.maximum(np.maximum(lo - act, act - hi), 0.0)

    def copy(self) -> "MilpModel":
        """Independent copy; row coefficient arrays are shared and treated as read-only."""
        out = MilpModel(self.name)
        out.vars._col = dict(self.vars._col)
        out.vars._key = list(self.vars._key)
        out.names, out.lb, out.ub = list(self.names), list(self.lb), list(self.ub)
        out.kind, out.obj = list(self.kind), list(self.obj)
        out.constraints = [Constraint(c.name, c.cols, c.coefs, c.sense, c.rhs) for c in self.constraints]
        out._con_names = dict(self._con_names)
        return out

    def summary(self) -> Dict[str, int]:
        counts = {"variables": self.n_vars, "constraints": self.n_constraints,
                  "integer": int(self.is_integer().sum())}
        return counts


@dataclass(frozen=True)
class SolveResult:
    status: str
    objective: float
    gap: float
    values: np.ndarray
    wall_time: float
    message: str = ""
    dual_bound: float = float("nan")
    iis: Optional[Tuple[str, ...]] = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def value(self, model: MilpModel, symbol: str, *index) -> float:
        return float(self.values[model.var(symbol, *index)])

    def family(self, model: MilpModel, symbol: str) -> Dict[Tuple, float]:
        return {model.vars.key(c)[1]: float(self.values[c]) for c in model.vars.family(symbol)}


def _adapter(name: Optional[str]):
    from flexplan.solvers import get_adapter

    return get_adapter(name or os.environ.get("FLEXPLAN_SOLVER", "highs"))


def solve(model: MilpModel, gap: float = 1e-3, time_limit: Optional[float] = None,
          seed: int = 0, solver: Optional[str] = None) -> SolveResult:
    """Solve ``model`` with the selected adapter (``FLEXPLAN_SOLVER`` env var by default)."""
    if model.n_vars == 0:
        infeasible = any(
            (c.sense in (LE, EQ) and c.rhs < -1e-9) or (c.sense in (GE, EQ) and c.rhs > 1e-9)
            for c in model.constraints
        )
        return SolveResult(INFEASIBLE if infeasible else OPTIMAL, 0.0, 0.0, np.zeros(0), 0.0)
    result = _adapter(solver).solve(model, gap=gap, time_limit=time_limit, seed=seed)
    if result.status == OPTIMAL and model.is_integer().any():
        ints = model.is_integer()
        vals = result.values.copy()
        frac = np.abs(vals[ints] - np.round(vals[ints]))
        if frac.size and frac.max() > INTEGRALITY_TOL:
            logger.warning("solver returned integrality violation %.2e", frac.max())
        vals[ints] = np.round(vals[ints]) + 0.0
        result = SolveResult(result.status, result.objective, result.gap, vals,
                             result.wall_time, result.message, result.dual_bound, result.iis)
    return result


def _resolve_col(model: MilpModel, key) -> int:
    if isinstance(key, str):
        try:
            return model.names.index(key)
        except ValueError:
            raise KeyError(f"unknown variable {key}") from None
    if isinstance(key, (int, np.integer)):
        return int(key)
    symbol, index = key
    return model.var(symbol, *tuple(index))


def fix_variables(model: MilpModel, assignments: Mapping) -> MilpModel:
    """Copy of ``model`` with each assigned variable's bounds collapsed onto its value.

    Keys may be ``(symbol, index)`` tuples, names or column ids.  Integer
    values are rounded if within 1e-4 of an integer; values outside the
    original bounds by more than 1e-4 are rejected.
    """
    fixed = model.copy()
    for key, value in assignments.items():
        col = _resolve_col(model, key)
        name = model.names[col]
        value = float(value)
        if model.kind[col] != CONTINUOUS:
            nearest = round(value)
            if abs(value - nearest) > FIX_TOL:
                raise ValueError(f"non-integral fix for {name}: {value}")
            value = float(nearest)
        lo, hi = model.lb[col], model.ub[col]
        if value < lo - FIX_TOL or value > hi + FIX_TOL:
            raise ValueError(f"fix value {value} for {name} outside bounds [{lo}, {hi}]")
        value = min(max(value, lo), hi)
        fixed.lb[col] = fixed.ub[col] = value
    return fixed


def relax_integrality(model: MilpModel, symbols: Iterable[str]) -> MilpModel:
    """Copy of ``model`` where the named variable families become continuous."""
    relaxed = model.copy()
    present = set(model.vars.symbols())
    for sym in symbols:
        if sym not in present:
            logger.warning("relax_integrality: no variable family %r in model", sym)
            continue
        for col in model.vars.family(sym):
            relaxed.kind[col] = CONTINUOUS
    return relaxed


# ---------------------------------------------------------------------------
# LP text format
# ---------------------------------------------------------------------------


def _num(v: float) -> str:
    if v == 0:
        v = 0.0  # no negative zero
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    text = repr(float(v))
    return text[:-2] if text.endswith(".0") else text


def _lp_name(name: str) -> str:
    return name.replace(" ", "_")


def export_lp(model: MilpModel) -> str:
    """Render ``model`` in CPLEX LP format.

    Rows and bound lines are sorted by name and terms inside a row by variable
    name, so identical models give identical bytes.
    """
    names = [_lp_name(n) for n in model.names]
    order = sorted(range(model.n_vars), key=lambda c: names[c])
    out = [f"\\ {model.name}", "Minimize"]
    obj_terms = [f"{'-' if model.obj[c] < 0 else '+'} {_num(abs(model.obj[c]))} {names[c]}"
                 for c in order if model.obj[c] != 0]
    out.append(" obj: " + (" ".join(obj_terms) if obj_terms else "0 " + (names[order[0]] if order else "")))
    out.append("Subject To")
    for con in sorted(model.constraints, key=lambda c: _lp_name(c.name)):
        pairs = sorted(zip(con.cols.tolist(), con.coefs.tolist()), key=lambda p: names[p[0]])
        body = " ".join(f"{'-' if v < 0 else '+'} {_num(abs(v))} {names[c]}" for c, v in pairs)
        if not body:
            body = "0 " + names[order[0]] if order else "0"
        out.append(f" {_lp_name(con.name)}: {body} {con.sense} {_num(con.rhs)}")
    out.append("Bounds")
    for c in order:
        lo, hi = model.lb[c], model.ub[c]
        if math.isinf(lo) and math.isinf(hi):
            out.append(f" {names[c]} free")
        elif lo == hi:
            out.append(f" {names[c]} = {_num(lo)}")
        else:
            left = "-inf" if math.isinf(lo) else _num(lo)
            right = "+inf" if math.isinf(hi) else _num(hi)
            out.append(f" {left} <= {names[c]} <= {right}")
    generals = [names[c] for c in order if model.kind[c] == INTEGER]
    binaries = [names[c] for c in order if model.kind[c] == BINARY]
    if generals:
        out.append("General")
        out.extend(f" {n}" for n in generals)
    if binaries:
        out.append("Binary")
        out.extend(f" {n}" for n in binaries)
    out.append("End")
    return "\n".join(out) + "\n"
