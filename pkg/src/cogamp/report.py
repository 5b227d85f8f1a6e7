"""Render sweep and search results as CSV, a plain-text table and plot data."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

from .engine import RunResult
from .lab import METRICS, REPORT_COLUMNS, STD_NOTE, CellSummary, LabError, OptResult

_HEADINGS = {
    "cai_star": "CAI*", "d": "D", "hri": "HRI", "hcdr": "HCDR", "q_h": "Q_H",
    "q_ha": "Q_HA", "skill_mean": "Skill", "ai_use_rate": "AI use",
}


@dataclass(frozen=True)
class Report:
    csv: str
    table: str
    plots: dict[str, str]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def cells_csv(cells: Sequence[CellSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for c in cells:
        row = [c.label, c.regime, _fmt(c.delta), _fmt(c.sensitivity)]
        for m in METRICS:
            row += [_fmt(c.mean[m]), _fmt(c.std[m])]
        w.writerow(row)
    return buf.getvalue()


def parse_cells_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise LabError(f"unexpected report columns: {reader.fieldnames}")
    rows = []
    for r in reader:
        row = {"label": r["label"], "regime": r["regime"]}
        row.update({k: float(v) for k, v in r.items() if k not in ("label", "regime")})
        rows.append(row)
    return rows


def cells_table(cells: Sequence[CellSummary], title: str) -> str:
    head = ["label", "regime", "delta", "sigma"]
    for m in METRICS:
        head += [f"{_HEADINGS[m]} mean", "std"]
    body = [
        [c.label, c.regime, f"{c.delta:.4f}", f"{c.sensitivity:.2f}"]
        + [v for m in METRICS for v in (_fmt(c.mean[m]), _fmt(c.std[m]))]
        for c in cells
    ]
    widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
    line = lambda r: "  ".join(s.rjust(w) for s, w in zip(r, widths))  # noqa: E731
    rule = "-" * len(line(head))
    n_seeds = {len(c.seeds) for c in cells}
    seeds = ",".join(str(n) for n in sorted(n_seeds)) or "?"
    out = [title, f"seeds per cell: {seeds}; {STD_NOTE}", rule, line(head), rule]
    out += [line(r) for r in body]
    out.append(rule)
    return "\n".join(out) + "\n"


def plot_series(cells: Sequence[CellSummary], metric: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", metric])
    for c in cells:
        w.writerow([_fmt(c.delta), _fmt(c.mean[metric])])
    return buf.getvalue()


def render_report(obj: Sequence[CellSummary] | OptResult) -> Report:
    if isinstance(obj, OptResult):
        cells = obj.candidates
        best = "none" if obj.best_delta is None else f"{obj.best_delta:.4f}"
        title = (
            f"Constrained search over delta (mixed reliance): best delta = {best}, "
            f"feasible = {'yes' if obj.feasible else 'no'}, "
            f"amplification = {'yes' if obj.amplification_achieved else 'no'} ({obj.verdict})"
        )
    else:
        cells = list(obj)
        title = "Regime x configuration sweep"
    if not cells:
        raise LabError("nothing to report: empty metric list")
    return Report(
        csv=cells_csv(cells),
        table=cells_table(cells, title),
        plots={m: plot_series(cells, m) for m in ("cai_star", "d")},
    )


def run_report(result: RunResult) -> str:
    s = result.summary
    m = s.metrics
    lab = s.regime_label
    rows = [
        ("Q_H (AI-off)", s.q_h), ("Q_H perturbed", s.q_h_pert), ("Q_H novel", s.q_h_novel),
        ("Q_HA", s.q_ha), ("skill mean", s.skill_mean), ("AI use rate", s.ai_use_rate),
        ("dependency mean", s.dependency_mean), ("CAI*", m.cai_star), ("D", m.d),
        ("HRI", m.hri), ("HCDR (per tick)", m.hcdr),
    ]
    width = max(len(name) for name, _ in rows)
    lines = [f"{name.ljust(width)}  {_fmt(v)}" for name, v in rows]
    lines.append(
        f"{'regime'.ljust(width)}  {lab.quadrant.value}, {lab.dominance_band.value}, "
        f"{'sustainable' if lab.sustainable else 'unsustainable'}"
    )
    return "\n".join(lines) + "\n"
