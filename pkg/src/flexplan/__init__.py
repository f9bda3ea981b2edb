"""Generation expansion planning with clustered unit commitment.

Energy-based and power-based stage-1 formulations, a semi-relaxed variant,
sub-hourly re-dispatch of the resulting plan and comparison reports.
"""
from __future__ import annotations

from pathlib import Path

from flexplan.dispatch import DispatchOptions, DispatchResult, run_dispatch
from flexplan.io import load_instance, save_instance
from flexplan.metrics import RunReport, compare_models, compute_metrics
from flexplan.planner import GepPlanner
from flexplan.pipeline import MODEL_KINDS, Stage1Error, Stage1Solution, run_stage1
from flexplan.system import SystemSpec, SystemValidationError, validate_system

__version__ = "0.1.0"

TUTORIAL_DIR = Path(__file__).parent / "data" / "tutorial"

__all__ = [
    "DispatchOptions", "DispatchResult", "GepPlanner", "MODEL_KINDS", "RunReport", "Stage1Error", "Stage1Solution",
    "SystemSpec", "SystemValidationError", "TUTORIAL_DIR", "compare_models", "compute_metrics",
    "load_instance", "run_dispatch", "run_stage1", "save_instance", "validate_system",
]
