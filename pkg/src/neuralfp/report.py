"""Rendering of experiment reports: text table, CSV, JSON, and figures.

The evaluation module produces data; everything presentational lives here.
Figures are written as PNG files next to the delimited output so a report
directory is self-contained.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .detector import Rule
from .evaluation import ExperimentReport

_RULE_LABELS = {
    Rule.VOTE: "Vote",
    Rule.ANOMALY: "Anomaly",
    Rule.LIKELIHOOD_RATIO: "Likelihood Ratio",
}
_RULE_ORDER = (Rule.VOTE, Rule.ANOMALY, Rule.LIKELIHOOD_RATIO)


def format_text_table(report: ExperimentReport) -> str:
    """Aligned table of mean detection rates: one block per fingerprint count."""
    rules = [r for r in _RULE_ORDER if Rule(r) in set(a.rule for a in report.aggregates)]
    targets = report.config["target_fprs"]
    name_width = max(len(_RULE_LABELS[r]) for r in rules) + 2
    col_width = 10
    lines = []
    for k in report.config["k_values"]:
        lines.append(f"K = {k} fingerprints per input")
        header = "Detection Method".ljust(name_width) + "".join(
            f"{t:.0%} FP".rjust(col_width) for t in targets
        ) + "AUC".rjust(col_width)
        lines.append(header)
        lines.append("-" * len(header))
        for rule in rules:
            agg = report.aggregate(rule, k)
            row = _RULE_LABELS[rule].ljust(name_width)
            for t in targets:
                row += f"{agg.point(t).tpr_mean:.1%}".rjust(col_width)
            row += f"{agg.auc_mean:.4f}".rjust(col_width)
            lines.append(row)
        lines.append("")
    return "\n".join(lines)


def write_report_json(report: ExperimentReport, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def write_report_csv(report: ExperimentReport, path: str | Path) -> Path:
    """One row per experiment cell and operating point."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rule", "k", "class_id", "seed_index", "auc",
             "target_fpr", "threshold", "tpr", "fpr"]
        )
        for cell in report.cells:
            for op in cell.operating_points:
                writer.writerow(
                    [cell.rule.value, cell.k, cell.class_id, cell.seed_index,
                     f"{cell.auc:.10g}", f"{op.target_fpr:.10g}",
                     f"{op.threshold:.10g}", f"{op.tpr:.10g}", f"{op.fpr:.10g}"]
                )
    return path


def plot_auc_vs_fingerprints(report: ExperimentReport, path: str | Path) -> Path:
    """Mean detection AUC as a function of fingerprints per input."""
    path = Path(path)
    k_values = report.config["k_values"]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for rule in _RULE_ORDER:
        try:
            aucs = [report.aggregate(rule, k).auc_mean for k in k_values]
        except KeyError:
            continue
        ax.plot(k_values, aucs, marker="o", label=_RULE_LABELS[rule])
    ax.set_xlabel("Fingerprints per input")
    ax.set_ylabel("Detection AUC")
    ax.set_title("Detection AUC vs fingerprint count")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_tpr_at_fpr(report: ExperimentReport, path: str | Path, k: int | None = None) -> Path:
    """Grouped bars of mean TPR at each target FPR, per rule."""
    path = Path(path)
    k_values = report.config["k_values"]
    if k is None:
        k = 20 if 20 in k_values else max(k_values)
    targets = report.config["target_fprs"]
    rules = [r for r in _RULE_ORDER if Rule(r) in set(a.rule for a in report.aggregates)]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    width = 0.8 / max(len(rules), 1)
    for i, rule in enumerate(rules):
        agg = report.aggregate(rule, k)
        xs = [j + i * width for j in range(len(targets))]
        ax.bar(xs, [agg.point(t).tpr_mean for t in targets], width=width,
               label=_RULE_LABELS[rule])
    ax.set_xticks([j + width * (len(rules) - 1) / 2 for j in range(len(targets))])
    ax.set_xticklabels([f"{t:.0%} FP" for t in targets])
    ax.set_ylabel("Detection rate (TPR)")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"Detection rate at calibrated FPR targets (K={k})")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_report_bundle(report: ExperimentReport, json_path: str | Path) -> list[Path]:
    """JSON + CSV + figures, named after the JSON path's stem."""
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    base = json_path.with_suffix("")
    written = [write_report_json(report, json_path)]
    written.append(write_report_csv(report, base.with_suffix(".csv")))
    written.append(plot_auc_vs_fingerprints(report, Path(f"{base}_auc_vs_fingerprints.png")))
    written.append(plot_tpr_at_fpr(report, Path(f"{base}_tpr_at_fpr.png")))
    return written
