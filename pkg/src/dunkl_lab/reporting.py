"""Experiment reports: case tables, CSV/summary emission, and figures.

The CSV schema is fixed: ``case_id, params..., quantity, value,
fitted_constant, status``.  Parameter columns are the sorted union of the
per-case parameter names so the same experiment always produces the same
header.  Wall-clock time lives only in the human-readable summary; the CSV
is a pure function of (config, seed) and reruns are byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = [
    "CaseRow",
    "ExperimentReport",
    "write_csv",
    "write_summary",
    "render_figure",
    "write_report",
]


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".12g")
    return str(value)


@dataclass
class CaseRow:
    case_id: str
    params: dict
    quantity: str
    value: float
    fitted_constant: float
    status: str = "ok"


@dataclass
class ExperimentReport:
    name: str
    rows: list
    summary: dict                    # headline statistics, incl. fitted
    maximizing_case: str             # constants' witnesses by case_id
    config_echo: str
    wall_clock: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _param_columns(rows) -> list:
    names = set()
    for row in rows:
        names.update(row.params)
    return sorted(names)

def write_csv(report: ExperimentReport, path) -> None:
    cols = _param_columns(report.rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case_id", *cols, "quantity", "value",
                         "fitted_constant", "status"])
        for row in report.rows:
            writer.writerow(
                [row.case_id]
                + [_fmt(row.params.get(c, "")) for c in cols]
                + [row.quantity, _fmt(row.value), _fmt(row.fitted_constant),
                   row.status])


def write_summary(report: ExperimentReport, path) -> None:
    lines = [f"experiment: {report.name}",
             f"cases: {len(report.rows)}",
             f"maximizing case: {report.maximizing_case}"]
    for key in sorted(report.summary):
        lines.append(f"{key}: {_fmt(report.summary[key])}")
    lines.append(f"wall_clock_s: {report.wall_clock:.2f}")
    lines.append("result: " + ("PASS" if report.passed else "FAIL"))
    for failure in report.failures:
        lines.append(f"failure: {failure}")
    lines.append("")
    lines.append("config:")
    lines.append(report.config_echo.rstrip())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _figure_axes(report: ExperimentReport):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.set_title(report.name)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def render_figure(report: ExperimentReport, path) -> None:
    """One diagnostic figure per experiment, next to the CSV."""
    ok = [r for r in report.rows if r.status == "ok"]
    fig, ax = _figure_axes(report)
    if report.name == "exp_weak_11":
        groups = {}
        for r in ok:
            groups.setdefault(r.params.get("case", ""), []).append(r)
        for label, rows in sorted(groups.items()):
            lam = [r.params["lambda"] for r in rows]
            val = [r.value for r in rows]
            ax.loglog(lam, val, marker=".", lw=0.8, label=str(label))
        ax.set_xlabel("level $\\lambda$")
        ax.set_ylabel("$\\lambda\\,\\omega\\{Op\\,f > \\lambda\\}/\\|f\\|_1$")
        if groups:
            ax.legend(fontsize=7)
    elif report.name == "exp_h1_atoms":
        rad = [r.params["radius"] for r in ok]
        val = [r.value for r in ok]
        ax.loglog(rad, val, "o", ms=4)
        ax.set_xlabel("atom radius")
        ax.set_ylabel("$\\|Op\\,a\\|_{L^1(\\omega)}$")
    elif report.name == "exp_bmo_blo":
        labels = [f"{r.params['case']}@{r.params['resolution']}" for r in ok]
        ax.bar(range(len(ok)), [r.value for r in ok])
        ax.set_xticks(range(len(ok)))
        ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
        ax.set_ylabel("blo(Op f) / bmo_rho(f)")
    elif report.name == "exp_kernel_bounds":
        ms = [r.params["m"] for r in ok]
        ax.semilogy(ms, [r.value for r in ok], "s-")
        ax.set_xlabel("derivative order m")
        ax.set_ylabel("fitted constant")
    else:
        ax.plot([r.value for r in report.rows], ".")
        ax.set_xlabel("case index")
        ax.set_ylabel("value")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_report(report: ExperimentReport, out_dir) -> dict:
    """Write CSV + summary + figure into out_dir; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / f"{report.name}.csv",
        "summary": out / f"{report.name}_summary.txt",
        "figure": out / f"{report.name}.png",
    }
    write_csv(report, paths["csv"])
    write_summary(report, paths["summary"])
    render_figure(report, paths["figure"])
    return paths
