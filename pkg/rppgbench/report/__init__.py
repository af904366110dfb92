"""Report writers for evaluation results.

``report.json`` holds the full report, ``metrics.csv`` a flat table with
the fixed columns ``method,window_s,metric,value,n`` and the SVG files bar
charts per metric and Bland-Altman scatter plots per cell. Output is
byte-identical for identical reports.
"""

import json
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import pandas as pd

from rppgbench.common import FAILED
from rppgbench.evaluate import EvalReport
from rppgbench.exceptions import IoFailure, MalformedFile
from rppgbench.logging import logger
from rppgbench.report.plots import bar_chart, bland_altman_plot, render_svg
from rppgbench.settings import MetricName, ReportFormat

REPORT_JSON = "report.json"
METRICS_CSV = "metrics.csv"
CSV_COLUMNS = ["method", "window_s", "metric", "value", "n"]
MISSING = "NA"

# MetricSet field holding each metric; BlandAltman is reported by its bias.
METRIC_FIELDS = {
    MetricName.MAE: "mae_bpm",
    MetricName.RMSE: "rmse_bpm",
    MetricName.MSE: "mse",
    MetricName.MAPE: "mape_pct",
    MetricName.PEARSON: "pearson_r",
    MetricName.SNR: "snr_db",
    MetricName.BLAND_ALTMAN: "bland_altman",
}
METRIC_UNITS = {
    MetricName.MAE: "bpm",
    MetricName.RMSE: "bpm",
    MetricName.MSE: "bpm^2",
    MetricName.MAPE: "%",
    MetricName.PEARSON: "r",
    MetricName.SNR: "dB",
    MetricName.BLAND_ALTMAN: "bpm",
}
CHART_METRICS = (MetricName.MAE, MetricName.RMSE, MetricName.MAPE, MetricName.PEARSON)
SUMMARY_METRICS = CHART_METRICS


def metric_value(cell, metric: MetricName) -> Optional[float]:
    if cell is None or cell.metrics is None:
        return None
    value = getattr(cell.metrics, METRIC_FIELDS[metric])
    if metric == MetricName.BLAND_ALTMAN and value is not None:
        return value.bias
    return value


def format_window(window_s: float) -> str:
    return f"{window_s:g}"


def _format_value(value) -> str:
    return MISSING if value is None else repr(float(value))


def _report_metrics(report: EvalReport) -> List[MetricName]:
    return [MetricName.parse_choice(m, "metrics") for m in report.metrics]


def metrics_table(report: EvalReport) -> pd.DataFrame:
    rows = []
    for cell in report.cells:
        for metric in _report_metrics(report):
            if cell.failed:
                value, n = FAILED, 0
            else:
                value, n = _format_value(metric_value(cell, metric)), cell.metrics.n_windows
            rows.append(
                {
                    "method": cell.method,
                    "window_s": format_window(cell.window_s),
                    "metric": str(metric),
                    "value": value,
                    "n": n,
                }
            )
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise IoFailure(path, e)


def write_json(report: EvalReport, path: Path):
    write_text(path, json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")


def write_csv(report: EvalReport, path: Path):
    write_text(path, metrics_table(report).to_csv(index=False, lineterminator="\n"))


def write_svgs(report: EvalReport, out_dir: Path) -> List[Path]:
    paths = []
    groups = [f"{format_window(w)} s" for w in report.windows]
    for metric in _report_metrics(report):
        if metric not in CHART_METRICS:
            continue
        values = [
            [metric_value(_cell_or_none(report, m, w), metric) for m in report.methods]
            for w in report.windows
        ]
        chart = bar_chart(
            f"{metric} per evaluation window",
            groups,
            report.methods,
            values,
            y_label=f"{metric} [{METRIC_UNITS[metric]}]",
            x_label="window length",
        )
        path = out_dir / f"{str(metric).lower()}.svg"
        write_text(path, render_svg(chart))
        paths.append(path)

    for cell in report.cells:
        ba = None if cell.metrics is None else cell.metrics.bland_altman
        if ba is None or not ba.means:
            continue
        plot = bland_altman_plot(
            f"Bland-Altman {cell.method}, {format_window(cell.window_s)} s windows",
            ba.means,
            ba.diffs,
            ba.bias,
            ba.loa_lo,
            ba.loa_hi,
        )
        path = out_dir / f"bland_altman_{cell.method.lower()}_{format_window(cell.window_s)}s.svg"
        write_text(path, render_svg(plot))
        paths.append(path)
    return paths


def _cell_or_none(report, method, window_s):
    try:
        return report.cell(method, window_s)
    except KeyError:
        return None


def emit_report(
    report: EvalReport,
    out_dir: Union[str, Path],
    formats: Iterable[ReportFormat] = (ReportFormat.JSON, ReportFormat.CSV),
) -> List[Path]:
    """Write the report in the requested formats and return the written paths."""
    out_dir = Path(out_dir)
    paths = []
    formats = set(formats)
    if ReportFormat.JSON in formats:
        write_json(report, out_dir / REPORT_JSON)
        paths.append(out_dir / REPORT_JSON)
    if ReportFormat.CSV in formats:
        write_csv(report, out_dir / METRICS_CSV)
        paths.append(out_dir / METRICS_CSV)
    if ReportFormat.SVG in formats:
        paths.extend(write_svgs(report, out_dir))
    logger.info(f"Wrote {len(paths)} report files to {out_dir}.")
    return paths


def load_report(path: Union[str, Path]) -> EvalReport:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_JSON
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise IoFailure(path, e)
    except ValueError as e:
        raise MalformedFile(path, f"invalid JSON: {e}")
    try:
        return EvalReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedFile(path, f"not an evaluation report: {e}")


def format_summary(report: EvalReport, metrics: Sequence[MetricName] = SUMMARY_METRICS) -> str:
    """Console table of the headline metrics per method and window."""
    from tabulate import tabulate

    configured = set(_report_metrics(report))
    shown = [m for m in metrics if m in configured]
    rows = []
    for cell in report.cells:
        row = {"method": cell.method, "window [s]": format_window(cell.window_s)}
        for metric in shown:
            value = metric_value(cell, metric)
            if cell.failed:
                row[str(metric)] = FAILED
            else:
                row[str(metric)] = MISSING if value is None else f"{value:.3f}"
        row["n"] = 0 if cell.failed else cell.metrics.n_windows
        rows.append(row)
    return tabulate(rows, headers="keys")
