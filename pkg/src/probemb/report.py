"""CSV emission for benchmark reports, training logs and filter-out
curves.

Floats are written with repr (shortest round-trip form) so repeated runs
with the same config and seeds produce byte-identical files; aggregate
cells use a fixed mean±std rendering.
"""

from __future__ import annotations

import math

from .harness import BenchmarkReport, MetricRow

REPORT_COLUMNS = ["method", "axis_value", "seed", "status",
                  "recall_at_1", "map_at_r", "verification_accuracy",
                  "ceda", "spearman"]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):  # aggregate (mean, std)
        return f"{value[0]:.6f}±{value[1]:.6f}"
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return repr(float(value))


def _row_line(row: MetricRow) -> str:
    cells = [row.method, row.axis_value, row.seed, row.status]
    cells += [_cell(getattr(row, name)) for name in MetricRow.METRIC_FIELDS]
    return ",".join(cells)


def write_report_csv(report: BenchmarkReport, path) -> None:
    lines = [",".join(REPORT_COLUMNS)]
    lines += [_row_line(r) for r in report.rows]
    lines += [_row_line(r) for r in report.aggregates]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def write_filterout_csv(report: BenchmarkReport, path) -> None:
    lines = ["method,axis_value,seed,alpha,map_at_r"]
    for (method, axis_value, seed), curve in report.curves.items():
        for alpha, value in curve:
            lines.append(",".join([method, axis_value, seed,
                                   repr(float(alpha)), _cell(value)]))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def write_train_log_csv(log, path) -> None:
    lines = ["epoch,train_loss,val_map_at_r"]
    for epoch, train_loss, val_map in log:
        lines.append(f"{epoch},{_cell(train_loss)},{_cell(val_map)}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def write_curves_csv(rows: list[tuple[str, str, str, str]], path) -> None:
    """Confidence-command output: source,kind,alpha,value rows."""
    lines = ["source,kind,alpha,value"]
    lines += [",".join(r) for r in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
