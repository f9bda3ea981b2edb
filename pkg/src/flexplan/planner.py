"""Estimator-style wrapper around the two-stage pipeline.

``fit`` solves the planning problem, ``predict`` re-dispatches the fitted plan
sub-hourly and ``score`` returns the negated expected stage-2 total cost, so
that larger is better as in scikit-learn.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from flexplan.dispatch import DispatchOptions, DispatchResult, run_dispatch
from flexplan.io import load_instance
from flexplan.metrics import RunReport, compute_metrics
from flexplan.pipeline import MODEL_KINDS, PB, Stage1Solution, run_stage1
from flexplan.system import SystemSpec, validate_system

SystemLike = Union[SystemSpec, str, Path]


def check_system(system: SystemLike, tau: Optional[int] = None) -> SystemSpec:
    """Load (if a path) and validate an instance, optionally on a new sub-hourly grid."""
    if isinstance(system, (str, Path)):
        system = load_instance(system)
    if not isinstance(system, SystemSpec):
        raise TypeError(f"expected a SystemSpec or an instance path, got {type(system).__name__}")
    if tau is not None:
        system = system.with_resolution(tau)
    return validate_system(system)


class GepPlanner(BaseEstimator):
    """Plan investments and commitment with one formulation, then re-dispatch.

    Parameters mirror the command-line flags.  Fitted attributes:
    ``system_``, ``solution_``, ``investments_``, ``objective_``.
    """

    def __init__(self, model_kind: str = PB, tau: Optional[int] = None, gap: float = 1e-3,
                 time_limit: Optional[float] = None, soc_floor: bool = False, double_ramps: bool = False,
                 integer_storage: bool = False, network_stage2: bool = True, seed: int = 0,
                 solver: Optional[str] = None):
        self.model_kind = model_kind
        self.tau = tau
        self.gap = gap
        self.time_limit = time_limit
        self.soc_floor = soc_floor
        self.double_ramps = double_ramps
        self.integer_storage = integer_storage
        self.network_stage2 = network_stage2
        self.seed = seed
        self.solver = solver

    def _check_params(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if not 0.0 < self.gap <= 0.1:
            raise ValueError(f"gap must lie in (0, 0.1], got {self.gap}")

    def _prepare(self, system: SystemLike) -> SystemSpec:
        spec = check_system(system, self.tau)
        return spec.with_scaled_ramps(2.0) if self.double_ramps else spec

    def fit(self, X: SystemLike, y=None) -> "GepPlanner":
        self._check_params()
        spec = self._prepare(X)
        self.system_ = spec
        self.solution_: Stage1Solution = run_stage1(
            spec, self.model_kind, gap=self.gap, time_limit=self.time_limit, tau=spec.grid.tau,
            integer_storage=self.integer_storage, seed=self.seed, solver=self.solver)
        self.investments_ = dict(self.solution_.investments)
        self.objective_ = self.solution_.objective
        return self

    def _target(self, X: Optional[SystemLike]) -> SystemSpec:
        check_is_fitted(self, "solution_")
        if X is None:
            return self.system_
        spec = self._prepare(X)
        if spec.grid.hours != self.system_.grid.hours or [w.id for w in spec.scenarios] != [
                w.id for w in self.system_.scenarios]:
            raise ValueError("system must share the horizon and scenario ids of the fitted one")
        return spec

    def predict(self, X: Optional[SystemLike] = None) -> DispatchResult:
        """Stage-2 dispatch of the fitted plan against ``X`` (default: the fitted system)."""
        spec = self._target(X)
        options = DispatchOptions(soc_floor=self.soc_floor, network=self.network_stage2)
        return run_dispatch(spec, self.solution_, options, solver=self.solver)

    def report(self, X: Optional[SystemLike] = None) -> RunReport:
        spec = self._target(X)
        return compute_metrics(spec, self.solution_, self.predict(X))

    def score(self, X: Optional[SystemLike] = None, y=None) -> float:
        invest = sum(self.solution_.costs[k] for k in ("invest_ess", "invest_thermal", "invest_vres"))
        return -(invest + self.predict(X).operating_cost)
