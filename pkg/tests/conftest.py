from __future__ import annotations

import os
import sys

import pytest
from hypothesis import HealthCheck, settings

import flexplan.pipeline as pipeline
from oracles import POWER_SOLVES, trapezoid_residual

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_collection_modifyitems(items):
    """Run the acceptance suite last so it can audit every solve made before it."""
    items.sort(key=lambda item: item.module.__name__ == "test_acceptance")


@pytest.fixture(autouse=True, scope="session")
def record_power_solves():
    """Audit the energy of every power-based stage-1 solve in the session."""
    original = pipeline.run_stage1

    def recording(spec, *args, **kwargs):
        sol = original(spec, *args, **kwargs)
        if sol.family("phat"):
            POWER_SOLVES.append((spec.name, sol.model_kind, trapezoid_residual(sol)))
        return sol

    patched = [mod for mod in list(sys.modules.values()) if getattr(mod, "run_stage1", None) is original]
    for mod in patched:
        mod.run_stage1 = recording
    yield
    for mod in patched:
        mod.run_stage1 = original


def pytest_terminal_summary(terminalreporter):
    verdicts = getattr(sys.modules.get("test_acceptance"), "VERDICTS", {})
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for key in sorted(verdicts):
            status, detail = verdicts[key]
            terminalreporter.write_line(f"criterion {key:>2}: {status}  {detail}")
