"""Instance files: one ``system.json`` plus ``step,value`` CSV profiles.

Layout (paths inside the JSON are relative to its directory)::

    {
      "name": "tutorial",
      "hours": 24,
      "tau_minutes": 5,
      "network": {
        "slack_bus": "b1",
        "shift_factor_bound": 10,
        "buses": [{"id": "b1", "demand": true}, ...],
        "lines": [{"id": "l1", "from": "b1", "to": "b2", "limit": 150, "reactance": 0.1}],
        "shift_factors": [[...], ...]              # optional, lines x buses
      },
      "thermal": [{"id": "ccgt", "bus": "b1", "pmax": 300, "pmin": 120, ...,
                   "startup_segments": [{"threshold": 1, "cost": 4000, "duration": 1}]}],
      "storage": [{"id": "bess", "bus": "b2", "epr": 4, "efficiency": 0.9, ...}],
      "renewables": [{"id": "pv", "bus": "b2", "profiles": {"w1": "profiles/pv_w1.csv"}, ...}],
      "scenarios": [{"id": "w1", "probability": 1.0,
                     "demand": {"b2": "profiles/demand_w1_b2.csv"},
                     "reserve_up": 20, "reserve_down": [10, 10, ...]}],
      "penalties": {"non_served_energy": 10000, "reserve_shortfall": 5000}
    }

Technology fields are the :mod:`flexplan.system` dataclass fields.  Reserve
requirements may be a scalar, a list of hourly values or a CSV path.  Profile
CSVs have a ``step,value`` header and steps numbered from 1.
"""
from __future__ import annotations

import csv
import json
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from flexplan.system import (
    Bus, Line, NetworkSpec, Penalties, RenewableTech, Scenario, StartupSegment, StorageTech,
    SystemSpec, ThermalTech, TimeGrid,
)

MANIFEST = "system.json"


class InstanceError(ValueError):
    """Malformed instance file; the message names the file (and line for CSVs)."""


def _field_names(cls) -> set:
    return {f.name for f in fields(cls)}


def read_profile(path: Path) -> np.ndarray:
    """Read a ``step,value`` CSV; steps must run 1..N without gaps."""
    values: List[float] = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InstanceError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["step", "value"]:
            raise InstanceError(f"{path}:1: expected header 'step,value'")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InstanceError(f"{path}:{line}: expected 2 columns, got {len(row)}")
            try:
                step, value = int(row[0]), float(row[1])
            except ValueError:
                raise InstanceError(f"{path}:{line}: cannot parse {','.join(row)!r}") from None
            if step != len(values) + 1:
                raise InstanceError(f"{path}:{line}: expected step {len(values) + 1}, got {step}")
            if not np.isfinite(value):
                raise InstanceError(f"{path}:{line}: non-finite value")
            values.append(value)
    return np.array(values, dtype=float)


def write_profile(path: Path, values) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "value"])
        for i, v in enumerate(np.asarray(values, dtype=float), start=1):
            w.writerow([i, repr(float(v))])


def _build(cls, raw: Dict[str, Any], where: str, source: Path, **overrides):
    if not isinstance(raw, dict):
        raise InstanceError(f"{source}: {where} must be an object")
    allowed = _field_names(cls)
    unknown = sorted(set(raw) - allowed - set(overrides))
    if unknown:
        raise InstanceError(f"{source}: {where}: unknown field(s) {', '.join(unknown)}")
    data = {k: v for k, v in raw.items() if k in allowed}
    data.update(overrides)
    try:
        return cls(**data)
    except TypeError as exc:
        raise InstanceError(f"{source}: {where}: {exc}") from None


def _hourly(value, hours: int, base: Path, where: str, source: Path) -> np.ndarray:
    if isinstance(value, (int, float)):
        return np.full(hours, float(value))
    if isinstance(value, str):
        return read_profile(base / value)
    if isinstance(value, list):
        return np.asarray(value, dtype=float)
    raise InstanceError(f"{source}: {where}: expected number, list or CSV path")


def load_instance(path: Union[str, Path]) -> SystemSpec:
    """Parse an instance directory (or its JSON file) into an unvalidated :class:`SystemSpec`."""
    path = Path(path)
    source = path / MANIFEST if path.is_dir() else path
    base = source.parent
    try:
        text = source.read_text()
    except OSError as exc:
        raise InstanceError(f"{source}: cannot open ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{source}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise InstanceError(f"{source}: top level must be an object")
    for key in ("hours", "network"):
        if key not in raw:
            raise InstanceError(f"{source}: missing required field {key!r}")
    hours = int(raw["hours"])
    grid = TimeGrid(hours, int(raw.get("tau_minutes", 5)))

    net = raw["network"]
    buses = tuple(_build(Bus, b, f"network.buses[{i}]", source) for i, b in enumerate(net.get("buses", [])))
    lines = []
    for i, ln in enumerate(net.get("lines", [])):
        ln = dict(ln)
        ln["from_bus"] = ln.pop("from", ln.get("from_bus"))
        ln["to_bus"] = ln.pop("to", ln.get("to_bus"))
        lines.append(_build(Line, ln, f"network.lines[{i}]", source))
    sf = net.get("shift_factors")
    network = NetworkSpec(buses, tuple(lines), net.get("slack_bus"),
                          None if sf is None else np.asarray(sf, dtype=float),
                          float(net.get("shift_factor_bound", 10.0)))

    thermal = []
    for i, g in enumerate(raw.get("thermal", [])):
        segs = tuple(_build(StartupSegment, s, f"thermal[{i}].startup_segments[{k}]", source)
                     for k, s in enumerate(g.get("startup_segments", [])))
        extra = {"startup_segments": segs}
        for key in ("su_trajectory", "sd_trajectory"):
            if g.get(key) is not None:
                val = g[key]
                extra[key] = tuple(tuple(v) for v in val) if key == "su_trajectory" else tuple(val)
        thermal.append(_build(ThermalTech, g, f"thermal[{i}]", source, **extra))

    storage = tuple(_build(StorageTech, s, f"storage[{i}]", source) for i, s in enumerate(raw.get("storage", [])))

    renewables = []
    for i, v in enumerate(raw.get("renewables", [])):
        profiles = {w: read_profile(base / p) for w, p in v.get("profiles", {}).items()}
        renewables.append(_build(RenewableTech, v, f"renewables[{i}]", source, profiles=profiles))

    scenarios = []
    for i, w in enumerate(raw.get("scenarios", [])):
        where = f"scenarios[{i}]"
        demand = {b: read_profile(base / p) for b, p in w.get("demand", {}).items()}
        extra = {
            "demand": demand,
            "reserve_up": _hourly(w.get("reserve_up", 0.0), hours, base, where + ".reserve_up", source),
            "reserve_down": _hourly(w.get("reserve_down", 0.0), hours, base, where + ".reserve_down", source),
        }
        scenarios.append(_build(Scenario, w, where, source, **extra))

    penalties = _build(Penalties, raw.get("penalties", {}), "penalties", source)
    return SystemSpec(grid, network, tuple(thermal), storage, tuple(renewables), tuple(scenarios),
                      penalties, str(raw.get("name", source.parent.name)))


def _plain(obj):
    if isinstance(obj, tuple):
        return [_plain(o) for o in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def save_instance(spec: SystemSpec, directory: Union[str, Path]) -> Path:
    """Write ``spec`` in the instance layout; returns the JSON path."""
    directory = Path(directory)
    prof = directory / "profiles"
    doc: Dict[str, Any] = {"name": spec.name, "hours": spec.grid.hours, "tau_minutes": spec.grid.tau}
    net = spec.network
    doc["network"] = {
        "slack_bus": net.slack_bus,
        "shift_factor_bound": net.shift_factor_bound,
        "buses": [{"id": b.id, "demand": b.demand} for b in net.buses],
        "lines": [{"id": l.id, "from": l.from_bus, "to": l.to_bus, "limit": l.limit,
                   "reactance": l.reactance} for l in net.lines],
    }
    if net.shift_factors is not None:
        doc["network"]["shift_factors"] = _plain(np.asarray(net.shift_factors))
    doc["thermal"] = []
    for g in spec.thermal:
        d = {f.name: _plain(getattr(g, f.name)) for f in fields(ThermalTech)}
        d["startup_segments"] = [{"threshold": s.threshold, "cost": s.cost, "duration": s.duration}
                                 for s in g.startup_segments]
        for key in ("su_trajectory", "sd_trajectory"):
            if d[key] is None:
                del d[key]
        doc["thermal"].append(d)
    doc["storage"] = [{f.name: _plain(getattr(s, f.name)) for f in fields(StorageTech)} for s in spec.storage]
    doc["renewables"] = []
    for v in spec.renewables:
        d = {f.name: _plain(getattr(v, f.name)) for f in fields(RenewableTech) if f.name != "profiles"}
        d["profiles"] = {}
        for w, series in v.profiles.items():
            rel = f"profiles/{v.id}_{w}.csv"
            write_profile(directory / rel, series)
            d["profiles"][w] = rel
        doc["renewables"].append(d)
    doc["scenarios"] = []
    for w in spec.scenarios:
        d = {"id": w.id, "probability": w.probability, "demand": {},
             "reserve_up": _plain(np.asarray(w.reserve_up, dtype=float)),
             "reserve_down": _plain(np.asarray(w.reserve_down, dtype=float))}
        for b, series in w.demand.items():
            rel = f"profiles/demand_{w.id}_{b}.csv"
            write_profile(directory / rel, series)
            d["demand"][b] = rel
        doc["scenarios"].append(d)
    doc["penalties"] = {"non_served_energy": spec.penalties.non_served_energy,
                        "reserve_shortfall": spec.penalties.reserve_shortfall}
    prof.mkdir(parents=True, exist_ok=True)
    out = directory / MANIFEST
    out.write_text(json.dumps(doc, indent=2) + "\n")
    return out


def describe(spec: SystemSpec) -> str:
    """One-line summary used by ``flexplan validate``."""
    def plural(n, word):
        return f"{n} {word}" + ("" if n == 1 else "s")

    return ", ".join([
        plural(len(spec.network.buses), "bus").replace("buss", "buses"),
        plural(len(spec.network.lines), "line"),
        plural(spec.n_techs, "tech"),
        plural(len(spec.scenarios), "scenario"),
        f"{spec.grid.hours} h",
    ])

