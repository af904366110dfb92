"""Benchmark harness: run methods over a dataset and score their heart rates.

Every configured (method, window length) pair becomes one cell of the
report. Prediction and ground-truth heart rates are paired per window,
pooled over all evaluated records and reduced to the configured metrics.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from rppgbench.common import FAILED, __version__, config_hash, utc_timestamp
from rppgbench.dataset.records import (
    DatasetRecord,
    load_dataset,
    split_by_subject,
)
from rppgbench.exceptions import ClockMismatch, MissingLabel, RppgError
from rppgbench.hr import HrEntry, HrSeries, estimate_hr, window_bounds
from rppgbench.logging import logger
from rppgbench.methods import run_method
from rppgbench.metrics import (
    MetricSet,
    bland_altman,
    mae,
    mape,
    mean_or_none,
    mse,
    pearson,
    rmse,
    snr,
)
from rppgbench.preprocess import bandpass_signal
from rppgbench.settings import BenchConfig, MetricName, SplitKind, TruthSource
from rppgbench.signals import BvpSignal

OK = "OK"
STD_CONVENTION = "population"
# timestamps differ between otherwise identical runs
VOLATILE_PROVENANCE_KEYS = ("started", "finished")


def _error_text(e: Exception) -> str:
    return f"{e.__class__.__name__}: {e}"


@dataclass(frozen=True)
class WindowPairs:
    """Per-window (prediction, truth) heart rates of one record and method."""

    starts: Tuple[float, ...] = ()
    pred: Tuple[float, ...] = ()
    truth: Tuple[float, ...] = ()
    snr_db: Tuple[Optional[float], ...] = ()

    def __len__(self):
        return len(self.pred)

    @classmethod
    def concat(cls, parts: Sequence["WindowPairs"]) -> "WindowPairs":
        return cls(
            tuple(v for p in parts for v in p.starts),
            tuple(v for p in parts for v in p.pred),
            tuple(v for p in parts for v in p.truth),
            tuple(v for p in parts for v in p.snr_db),
        )


def compute_metrics(
    pairs: WindowPairs, metrics: Sequence[MetricName]
) -> Tuple[MetricSet, Dict[str, str]]:
    """MetricSet of the configured metrics; undefined ones stay None and
    their reason is returned."""
    values, notes = {}, {}
    pred, truth = np.asarray(pairs.pred), np.asarray(pairs.truth)
    computations = {
        MetricName.MAE: ("mae_bpm", lambda: mae(pred, truth)),
        MetricName.RMSE: ("rmse_bpm", lambda: rmse(pred, truth)),
        MetricName.MSE: ("mse", lambda: mse(pred, truth)),
        MetricName.MAPE: ("mape_pct", lambda: 100.0 * mape(pred, truth)),
        MetricName.PEARSON: ("pearson_r", lambda: pearson(pred, truth)),
        MetricName.SNR: ("snr_db", lambda: mean_or_none(pairs.snr_db)),
        MetricName.BLAND_ALTMAN: ("bland_altman", lambda: bland_altman(pred, truth)),
    }
    for metric in metrics:
        key, compute = computations[metric]
        try:
            values[key] = compute()
        except RppgError as e:
            notes[str(metric)] = _error_text(e)
    return MetricSet(n_windows=len(pairs), **values), notes


@dataclass(frozen=True)
class RecordResult:
    """Outcome of one record and method over all window lengths."""

    subject_id: str
    method: str
    pairs: Mapping[float, WindowPairs] = field(default_factory=dict)
    errors: Mapping[float, str] = field(default_factory=dict)


@dataclass(frozen=True)
class EvalCell:
    method: str
    window_s: float
    status: str
    metrics: Optional[MetricSet] = None
    reason: Optional[str] = None
    n_records: int = 0
    notes: Mapping[str, str] = field(default_factory=dict)
    failed_records: Tuple[Tuple[str, str], ...] = ()

    @property
    def failed(self):
        return self.status == FAILED

    def to_dict(self):
        return {
            "method": self.method,
            "window_s": self.window_s,
            "status": self.status,
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "reason": self.reason,
            "n_records": self.n_records,
            "notes": dict(self.notes),
            "failed_records": [list(item) for item in self.failed_records],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            method=data["method"],
            window_s=float(data["window_s"]),
            status=data["status"],
            metrics=None
            if data.get("metrics") is None
            else MetricSet.from_dict(data["metrics"]),
            reason=data.get("reason"),
            n_records=int(data.get("n_records", 0)),
            notes=dict(data.get("notes", {})),
            failed_records=tuple(
                tuple(item) for item in data.get("failed_records", ())
            ),
        )


@dataclass(frozen=True)
class RecordBreakdown:
    subject_id: str
    method: str
    window_s: float
    status: str
    metrics: Optional[MetricSet] = None
    reason: Optional[str] = None

    def to_dict(self):
        return {
            "subject_id": self.subject_id,
            "method": self.method,
            "window_s": self.window_s,
            "status": self.status,
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            subject_id=data["subject_id"],
            method=data["method"],
            window_s=float(data["window_s"]),
            status=data["status"],
            metrics=None
            if data.get("metrics") is None
            else MetricSet.from_dict(data["metrics"]),
            reason=data.get("reason"),
        )


@dataclass(frozen=True)
class EvalReport:
    cells: Tuple[EvalCell, ...]
    records: Tuple[RecordBreakdown, ...] = ()
    methods: Tuple[str, ...] = ()
    windows: Tuple[float, ...] = ()
    metrics: Tuple[str, ...] = ()
    settings: Mapping[str, Any] = field(default_factory=dict)
    split: Mapping[str, Any] = field(default_factory=dict)
    load_failures: Tuple[Tuple[str, str], ...] = ()
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def cell(self, method, window_s) -> EvalCell:
        method = str(method)
        for cell in self.cells:
            if cell.method == method and cell.window_s == float(window_s):
                return cell
        raise KeyError((method, window_s))

    @property
    def failed_cells(self):
        return tuple(cell for cell in self.cells if cell.failed)

    def to_dict(self, with_timestamps=True):
        provenance = dict(self.provenance)
        if not with_timestamps:
            for key in VOLATILE_PROVENANCE_KEYS:
                provenance.pop(key, None)
        return {
            "cells": [cell.to_dict() for cell in self.cells],
            "records": [record.to_dict() for record in self.records],
            "methods": list(self.methods),
            "windows": list(self.windows),
            "metrics": list(self.metrics),
            "settings": dict(self.settings),
            "split": dict(self.split),
            "load_failures": [list(item) for item in self.load_failures],
            "provenance": provenance,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            cells=tuple(EvalCell.from_dict(c) for c in data["cells"]),
            records=tuple(RecordBreakdown.from_dict(r) for r in data.get("records", ())),
            methods=tuple(data.get("methods", ())),
            windows=tuple(float(w) for w in data.get("windows", ())),
            metrics=tuple(data.get("metrics", ())),
            settings=dict(data.get("settings", {})),
            split=dict(data.get("split", {})),
            load_failures=tuple(tuple(f) for f in data.get("load_failures", ())),
            provenance=dict(data.get("provenance", {})),
        )


# map phase


def truth_series(
    record: DatasetRecord, config: BenchConfig, window_s: float
) -> HrSeries:
    """Ground-truth heart rate per window, from the configured label."""
    if config.truth == TruthSource.HR_LABEL:
        if record.hr_label is None:
            raise MissingLabel(f"Record {record.subject_id} has no HR label.")
        n = len(record.input)
        fs = record.fs
        t0 = record.input.t0
        entries = []
        for start, stop in window_bounds(n, fs, window_s, config.overlap_s):
            ws, wl = t0 + start / fs, (stop - start) / fs
            entries.append(HrEntry(ws, wl, record.hr_label.mean_between(ws, ws + wl)))
        return HrSeries(tuple(entries), record.hr_label.method, "HR_LABEL")
    if record.ppg_label is None:
        raise MissingLabel(f"Record {record.subject_id} has no PPG label.")
    label = bandpass_signal(record.ppg_label, config.band)
    return estimate_hr(label, config.cal_type, window_s, config.overlap_s, config.band)


def pair_windows(
    bvp: BvpSignal,
    pred: HrSeries,
    truth: HrSeries,
    with_snr: bool,
) -> WindowPairs:
    """Pair estimates of identical windows where both carry a value."""
    truth_by_start = {round(e.window_start_s * bvp.fs): e for e in truth}
    starts, p, t, snrs = [], [], [], []
    for entry in pred:
        key = round(entry.window_start_s * bvp.fs)
        other = truth_by_start.get(key)
        if other is None or not entry.present or not other.present:
            continue
        starts.append(entry.window_start_s)
        p.append(entry.hr_bpm)
        t.append(other.hr_bpm)
        value = None
        if with_snr:
            offset = key - round(bvp.t0 * bvp.fs)
            length = round(entry.window_len_s * bvp.fs)
            try:
                value = snr(bvp.segment(offset, offset + length), other.hr_bpm)
            except RppgError:
                value = None
        snrs.append(value)
    return WindowPairs(tuple(starts), tuple(p), tuple(t), tuple(snrs))


def evaluate_record(record: DatasetRecord, method, config: BenchConfig) -> RecordResult:
    pairs, errors = {}, {}
    try:
        bvp = run_method(method, record.input, config.method_config)
    except RppgError as e:
        logger.record_error(subject_id=record.subject_id, method=str(method), reason=str(e))
        text = _error_text(e)
        return RecordResult(
            record.subject_id, str(method), {}, {w: text for w in config.eval_time_lengths}
        )
    with_snr = MetricName.SNR in config.metrics
    for window_s in config.eval_time_lengths:
        try:
            pred = estimate_hr(bvp, config.cal_type, window_s, config.overlap_s, config.band)
            truth = truth_series(record, config, window_s)
            pairs[window_s] = pair_windows(bvp, pred, truth, with_snr)
        except RppgError as e:
            errors[window_s] = _error_text(e)
    return RecordResult(record.subject_id, str(method), pairs, errors)


def _check_fs(record: DatasetRecord, config: BenchConfig):
    if config.expected_fs is not None and abs(record.fs - config.expected_fs) > 1e-6:
        raise ClockMismatch(
            f"Record {record.subject_id} runs at {record.fs} Hz, "
            f"configured fs is {config.expected_fs} Hz."
        )


# reduce phase


def _reduce(
    config: BenchConfig, results: List[RecordResult]
) -> Tuple[List[EvalCell], List[RecordBreakdown]]:
    cells, breakdown = [], []
    for method in config.methods:
        method_results = sorted(
            (r for r in results if r.method == str(method)), key=lambda r: r.subject_id
        )
        for window_s in config.eval_time_lengths:
            parts, failed = [], []
            for result in method_results:
                if window_s in result.errors:
                    failed.append((result.subject_id, result.errors[window_s]))
                    breakdown.append(
                        RecordBreakdown(
                            result.subject_id,
                            str(method),
                            window_s,
                            FAILED,
                            reason=result.errors[window_s],
                        )
                    )
                    continue
                part = result.pairs[window_s]
                parts.append(part)
                record_metrics, _ = compute_metrics(part, config.metrics)
                breakdown.append(
                    RecordBreakdown(
                        result.subject_id, str(method), window_s, OK, record_metrics
                    )
                )
            pooled = WindowPairs.concat(parts)
            if len(pooled) == 0:
                reason = (
                    "; ".join(f"{sid}: {msg}" for sid, msg in failed)
                    if failed
                    else "no window carries both a prediction and a truth value"
                )
                cells.append(
                    EvalCell(
                        str(method),
                        window_s,
                        FAILED,
                        reason=reason,
                        failed_records=tuple(failed),
                    )
                )
                continue
            metric_set, notes = compute_metrics(pooled, config.metrics)
            cells.append(
                EvalCell(
                    str(method),
                    window_s,
                    OK,
                    metric_set,
                    n_records=len(parts),
                    notes=notes,
                    failed_records=tuple(failed),
                )
            )
    return cells, breakdown


def _settings_summary(config: BenchConfig) -> Dict[str, Any]:
    return {
        "cal_type": str(config.cal_type),
        "truth": str(config.truth),
        "band_hz": list(config.band),
        "overlap_s": config.overlap_s,
        "std_convention": STD_CONVENTION,
        "component_selection": None
        if config.method_config.component_selection is None
        else str(config.method_config.component_selection),
    }


def evaluate(config: BenchConfig) -> EvalReport:
    """Evaluate every configured method on the dataset named by config."""
    started = utc_timestamp()
    start_time = time.time()
    loaded = load_dataset(config.dataset_path, config.layout, config.workers)
    load_failures = [
        (f.subject_id, _error_text(f.error)) for f in loaded.failures
    ]

    records = []
    for record in loaded.records:
        try:
            _check_fs(record, config)
            records.append(record)
        except RppgError as e:
            logger.record_error(subject_id=record.subject_id, method="load", reason=str(e))
            load_failures.append((record.subject_id, _error_text(e)))

    split_info: Dict[str, Any] = {"kind": str(config.split.kind)}
    if config.split.kind == SplitKind.SUBJECT_HOLDOUT and records:
        split = split_by_subject(records, config.split.fraction, config.split.seed)
        split_info.update(
            fraction=config.split.fraction,
            seed=config.split.seed,
            evaluated_subjects=split.held_out_subjects,
            excluded_subjects=split.rest_subjects,
        )
        records = list(split.held_out)
    else:
        split_info["evaluated_subjects"] = sorted({r.subject_id for r in records})

    jobs = [(record, method) for record in records for method in config.methods]
    results = []

    def work(job):
        record, method = job
        return evaluate_record(record, method, config)

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        for i, result in enumerate(executor.map(work, jobs), 1):
            results.append(result)
            logger.progress(done=i, total=len(jobs), what="record evaluations")

    cells, breakdown = _reduce(config, results)
    report = EvalReport(
        cells=tuple(cells),
        records=tuple(breakdown),
        methods=tuple(str(m) for m in config.methods),
        windows=tuple(config.eval_time_lengths),
        metrics=tuple(str(m) for m in config.metrics),
        settings=_settings_summary(config),
        split=split_info,
        load_failures=tuple(sorted(load_failures)),
        provenance={
            "config_hash": config_hash(config.source or asdict(config)),
            "version": __version__,
            "started": started,
            "finished": utc_timestamp(),
        },
    )
    logger.run_finished(what="evaluation", elapsed=time.time() - start_time)
    return report
