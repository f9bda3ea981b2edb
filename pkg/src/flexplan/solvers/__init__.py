"""MILP solver adapters.

An adapter exposes ``solve(model, gap, time_limit, seed) -> SolveResult``.
"""
from __future__ import annotations


def get_adapter(name: str):
    name = name.lower()
    if name in ("highs", "default"):
        from flexplan.solvers.highs import HighsAdapter

        return HighsAdapter()
    if name in ("reference", "simplex"):
        from flexplan.solvers.reference import ReferenceAdapter

        return ReferenceAdapter()
    raise ValueError(f"unknown solver adapter {name!r} (expected 'highs' or 'reference')")
