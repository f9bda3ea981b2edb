"""Cost decomposition, emissions, curtailment and run comparison tables.

All figures are recomputed from solution vectors.  Money columns come in
M$ rounded to two decimals plus full-precision $ columns.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np

from flexplan.dispatch import DispatchResult, deviation_histogram, deviation_summary, step_energy
from flexplan.pipeline import Stage1Solution
from flexplan.system import SystemSpec, aggregate_profiles

COST_KEYS = ("total_cost", "invest_ess", "invest_thermal", "invest_vres", "operating_cost")
REPORT_COLUMNS = (
    ["model", "stage"]
    + [f"{k}_musd" for k in COST_KEYS]
    + [f"{k}_usd" for k in COST_KEYS]
    + ["co2_tons", "curtailment_pct", "curtailment_basis", "unserved_mwh",
       "deviation_up_mwh", "deviation_down_mwh", "cpu_time_s"]
)
TIMING_COLUMNS = ("cpu_time_s",)
STAGE1_BASIS = "hourly aggregates"
STAGE2_BASIS = "sub-hourly samples"


@dataclass
class ReportRow:
    model: str
    stage: str
    costs: Dict[str, float]  # COST_KEYS in $
    co2_tons: float
    curtailment_pct: float
    curtailment_basis: str
    unserved_mwh: Optional[float] = None
    deviation_up_mwh: Optional[float] = None
    deviation_down_mwh: Optional[float] = None
    cpu_time_s: float = 0.0

    def as_dict(self) -> dict:
        out = {"model": self.model, "stage": self.stage}
        for k in COST_KEYS:
            out[f"{k}_musd"] = round(self.costs[k] / 1e6, 2)
        for k in COST_KEYS:
            out[f"{k}_usd"] = self.costs[k]
        out.update(co2_tons=self.co2_tons, curtailment_pct=self.curtailment_pct,
                   curtailment_basis=self.curtailment_basis, unserved_mwh=self.unserved_mwh,
                   deviation_up_mwh=self.deviation_up_mwh, deviation_down_mwh=self.deviation_down_mwh,
                   cpu_time_s=self.cpu_time_s)
        return out


@dataclass
class RunReport:
    rows: List[ReportRow] = field(default_factory=list)
    histograms: Dict[str, List[dict]] = field(default_factory=dict)
    soc_series: List[dict] = field(default_factory=list)

    def add(self, other: "RunReport") -> None:
        self.rows += other.rows
        self.histograms.update(other.histograms)
        self.soc_series += other.soc_series

    def row(self, model: str, stage: str) -> ReportRow:
        for r in self.rows:
            if r.model == model and r.stage == stage:
                return r
        raise KeyError((model, stage))

    def to_csv(self, include_timing: bool = True) -> str:
        cols = [c for c in REPORT_COLUMNS if include_timing or c not in TIMING_COLUMNS]
        return _csv([r.as_dict() for r in self.rows], cols)

    def to_json(self) -> str:
        doc = {"rows": [r.as_dict() for r in self.rows], "deviation_histograms": self.histograms}
        return json.dumps(doc, indent=2, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(type(obj))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if v == 0:
            return "0"
        return f"{v:.10g}"
    return str(v)


def _csv(rows: Iterable[dict], columns: List[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def rows_to_csv(rows: List[dict], columns: Optional[List[str]] = None) -> str:
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    return _csv(rows, columns)


def curtailment_percent(available: float, delivered: float) -> float:
    """Share of available renewable energy not delivered; 0 when nothing is available."""
    if available <= 1e-12:
        return 0.0
    pct = 100.0 * (available - delivered) / available
    if abs(pct) < 1e-9:  # solver round-off on fully used availability
        return 0.0
    return float(min(max(pct, 0.0), 100.0))


def _stage1_energy(spec: SystemSpec, sol: Stage1Solution):
    """Expected delivered/available renewable energy and CO2 of a stage-1 schedule."""
    ehat = sol.family("ehat")
    power_based = bool(sol.family("phat"))
    x = sol.investments
    co2 = avail = delivered = 0.0
    for w in spec.scenarios:
        pi = w.probability
        for t in range(1, spec.grid.hours + 1):
            for g in spec.thermal:
                co2 += pi * g.emission_rate * ehat[(w.id, g.id, t)]
            for v in spec.renewables:
                delivered += pi * ehat[(w.id, v.id, t)]
        for v in spec.renewables:
            cap = v.initial_mw + x.get(v.id, 0.0)
            energy, power = aggregate_profiles(v.profiles[w.id], spec.grid)
            hourly = 0.5 * (power[:-1] + power[1:]) if power_based else energy
            avail += pi * cap * hourly.sum()
    return co2, avail, delivered


def compute_metrics(spec: SystemSpec, sol: Stage1Solution,
                    dispatch: Optional[DispatchResult] = None) -> RunReport:
    """Report rows for stage 1 and, when given, stage 2 of one model run."""
    invest = {k: sol.costs[k] for k in ("invest_ess", "invest_thermal", "invest_vres")}
    total1 = sum(invest.values()) + sol.costs["operating"]
    if abs(total1 - sol.objective) > max(sol.gap, 1e-6) * max(abs(sol.objective), 1.0):
        raise ValueError(f"recomputed total {total1} disagrees with solver objective {sol.objective}")
    co2, avail, delivered = _stage1_energy(spec, sol)
    costs1 = dict(invest, operating_cost=sol.costs["operating"], total_cost=total1)
    report = RunReport()
    report.rows.append(ReportRow(sol.model_kind, "1", costs1, co2, curtailment_percent(avail, delivered),
                                 STAGE1_BASIS, cpu_time_s=sol.cpu_time))
    if dispatch is None:
        return report

    tau = spec.grid.tau
    co2_2 = avail_2 = deliv_2 = 0.0
    for sd in dispatch.scenarios:
        pi = sd.probability
        for g in spec.thermal:
            co2_2 += pi * g.emission_rate * step_energy(sd.output[g.id], tau).sum()
        for v in spec.renewables:
            avail_2 += pi * step_energy(sd.available[v.id], tau).sum()
            deliv_2 += pi * step_energy(sd.output[v.id], tau).sum()
    op2 = dispatch.operating_cost
    costs2 = dict(invest, operating_cost=op2, total_cost=sum(invest.values()) + op2)
    dev = deviation_summary(dispatch.deviations)
    report.rows.append(ReportRow(sol.model_kind, "2", costs2, co2_2, curtailment_percent(avail_2, deliv_2),
                                 STAGE2_BASIS, dispatch.unserved_energy, dev["upward_mwh"],
                                 dev["downward_mwh"], dispatch.cpu_time))
    report.histograms[sol.model_kind] = deviation_histogram(dispatch.deviations)
    sph = spec.grid.steps_per_hour
    phi = sol.family("phi")
    for sd in dispatch.scenarios:
        for s, series in sd.soc.items():
            for n in range(len(series)):
                h = n // sph
                planned = phi.get((sd.scenario, s, h)) if n % sph == 0 and n else None
                report.soc_series.append({"model": sol.model_kind, "scenario": sd.scenario, "storage": s,
                                          "step": n, "soc_mwh": float(series[n]),
                                          "stage1_soc_mwh": planned})
    return report


def compare_models(report: RunReport, reference: str = "EB", target: str = "PB") -> List[dict]:
    """One row per (stage, metric) with each model's value and the target-vs-reference delta [%].

    Cells for runs that are absent stay empty.
    """
    models = []
    for r in report.rows:
        if r.model not in models:
            models.append(r.model)
    # (displayed column, full-precision column the delta is computed from)
    metrics = [(f"{k}_musd", f"{k}_usd") for k in COST_KEYS] + [
        (k, k) for k in ("co2_tons", "curtailment_pct", "unserved_mwh")]
    out = []
    for stage in ("1", "2"):
        present = {r.model: r.as_dict() for r in report.rows if r.stage == stage}
        for metric, raw in metrics:
            row = {"stage": stage, "metric": metric}
            for m in models:
                row[m] = present.get(m, {}).get(metric)
            ref = present.get(reference, {}).get(raw)
            tgt = present.get(target, {}).get(raw)
            if ref is None or tgt is None:
                row["delta_pct"] = None
            elif abs(ref) < 1e-12:
                row["delta_pct"] = 0.0 if abs(tgt) < 1e-12 else None
            else:
                row["delta_pct"] = 100.0 * (tgt - ref) / abs(ref)
            out.append(row)
    return out


def compare_columns(report: RunReport) -> List[str]:
    models = []
    for r in report.rows:
        if r.model not in models:
            models.append(r.model)
    return ["stage", "metric"] + models + ["delta_pct"]
