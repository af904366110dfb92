"""Dataset audit: label alignment, label discrepancy and skin tone.

Skin tone is bucketed into the six Fitzpatrick types by the individual
typology angle (ITA) of the mean skin color in CIELAB. ITA bucketing is a
colorimetric stand-in for a trained skin-type classifier and is reported
as such.
"""

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from rppgbench.common import (
    ALIGNMENT_PEAK_TOLERANCE,
    ALIGNMENT_RELIABILITY_THRESHOLD,
    DEFAULT_BAND,
    DEFAULT_MAX_LAG_S,
    DISCREPANCY_THRESHOLD_BPM,
    UNRELIABLE,
)
from rppgbench.dataset.records import DatasetRecord, LoadFailure
from rppgbench.exceptions import DegenerateColor, EmptyDataset, MissingLabel, RppgError
from rppgbench.hr import DELTA_KINDS, DiscrepancyReport, label_discrepancy
from rppgbench.logging import logger
from rppgbench.methods.pos import pos
from rppgbench.preprocess import detrend
from rppgbench.signals import FrameSequence, RgbTrace

SKIN_TONE_METHOD = "ITA"
UNKNOWN_TYPE = "UNKNOWN"
# lower ITA bounds (exclusive) of types I to V; type VI takes the rest
ITA_THRESHOLDS = ((55.0, 1), (41.0, 2), (28.0, 3), (10.0, 4), (-30.0, 5))
D65_WHITE = np.array([0.95047, 1.0, 1.08883])
SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
SKIN_CROP_FRACTION = 0.5
SKIN_TRIM_FRACTION = 0.1
MAX_SKIN_FRAMES = 10
LAG_FLAG_S = 0.1
COLOR_TOLERANCE = 1e-9


@dataclass(frozen=True)
class AlignmentReport:
    lag_s: float
    peak_correlation: float
    max_lag_s: float = DEFAULT_MAX_LAG_S

    @property
    def reliable(self) -> bool:
        return self.peak_correlation >= ALIGNMENT_RELIABILITY_THRESHOLD

    @property
    def status(self) -> str:
        return "OK" if self.reliable else UNRELIABLE

    def to_dict(self):
        return {
            "lag_s": self.lag_s,
            "peak_correlation": self.peak_correlation,
            "status": self.status,
        }


def _ncc(x: np.ndarray, y: np.ndarray) -> float:
    x = x - x.mean()
    y = y - y.mean()
    denom = np.sqrt(np.dot(x, x) * np.dot(y, y))
    return float(np.dot(x, y) / denom) if denom > 0 else 0.0


def cross_correlation_lag(
    signal: np.ndarray,
    label: np.ndarray,
    fs: float,
    max_lag_s: float,
    tolerance: float = ALIGNMENT_PEAK_TOLERANCE,
) -> Tuple[float, float]:
    """Lag in seconds maximizing the normalized cross-correlation.

    A positive lag means the label trails the signal. A periodic pulse
    correlates almost equally well one beat period off, so among the local
    maxima within `tolerance` of the best correlation the smallest |lag|
    wins.
    """
    n = min(len(signal), len(label))
    signal, label = signal[:n], label[:n]
    max_lag = min(int(round(max_lag_s * fs)), n - 2)
    lags = np.arange(-max_lag, max_lag + 1)
    corrs = np.array(
        [
            _ncc(signal[: n - k], label[k:]) if k >= 0 else _ncc(signal[-k:], label[: n + k])
            for k in lags
        ]
    )
    padded = np.concatenate([[-np.inf], corrs, [-np.inf]])
    peaks = np.flatnonzero((corrs >= padded[:-2]) & (corrs >= padded[2:]))
    candidates = peaks[corrs[peaks] >= corrs.max() - tolerance]
    best = min(candidates, key=lambda i: (abs(lags[i]), -corrs[i]))
    return float(lags[best] / fs), float(corrs[best])


def check_alignment(
    record: DatasetRecord, max_lag_s: float = DEFAULT_MAX_LAG_S
) -> AlignmentReport:
    """Lag between the PPG label and the POS pulse of the record's video."""
    if record.ppg_label is None:
        raise MissingLabel(
            f"Record {record.subject_id} has no PPG label to align.",
            position=str(record.path) if record.path else None,
        )
    bvp = pos(record.trace)
    label = detrend(np.asarray(record.ppg_label.samples, dtype=float))
    lag_s, corr = cross_correlation_lag(bvp.samples, label, bvp.fs, max_lag_s)
    return AlignmentReport(lag_s, corr, max_lag_s)


# skin tone


@dataclass(frozen=True)
class FitzpatrickResult:
    type: int
    ita_degrees: float
    mean_skin_lab: Tuple[float, float, float]

    def to_dict(self):
        return {
            "type": self.type,
            "ita_degrees": self.ita_degrees,
            "mean_skin_lab": list(self.mean_skin_lab),
            "method": SKIN_TONE_METHOD,
        }


def srgb_to_lab(rgb) -> Tuple[float, float, float]:
    """CIELAB (D65) coordinates of an 8-bit sRGB color."""
    c = np.asarray(rgb, dtype=float) / 255.0
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = SRGB_TO_XYZ @ linear / D65_WHITE
    delta = 6 / 29
    f = np.where(xyz > delta**3, np.cbrt(xyz), xyz / (3 * delta**2) + 4 / 29)
    return (
        float(116 * f[1] - 16),
        float(500 * (f[0] - f[1])),
        float(200 * (f[1] - f[2])),
    )


def ita(lightness: float, b: float) -> float:
    """Individual typology angle in degrees."""
    dl = lightness - 50.0
    if abs(b) <= COLOR_TOLERANCE:
        if abs(dl) <= COLOR_TOLERANCE:
            raise DegenerateColor(
                "ITA is undefined for L = 50 and b = 0; skin type UNKNOWN."
            )
        return 90.0 if dl > 0 else -90.0
    return float(np.degrees(np.arctan(dl / b)))


def fitzpatrick_type(ita_degrees: float) -> int:
    for bound, skin_type in ITA_THRESHOLDS:
        if ita_degrees > bound:
            return skin_type
    return 6


def classify_lab(lab) -> FitzpatrickResult:
    lightness, a, b = (float(v) for v in lab)
    angle = ita(lightness, b)
    return FitzpatrickResult(fitzpatrick_type(angle), angle, (lightness, a, b))


def skin_pixels(frames: FrameSequence) -> np.ndarray:
    """Pixels of the central crop of up to MAX_SKIN_FRAMES evenly spaced
    frames, the darkest and brightest tenth by luminance removed."""
    pixels = frames.roi_pixels()
    n, height, width, _ = pixels.shape
    ch = max(1, int(round(height * SKIN_CROP_FRACTION)))
    cw = max(1, int(round(width * SKIN_CROP_FRACTION)))
    y0, x0 = (height - ch) // 2, (width - cw) // 2
    picks = np.unique(np.linspace(0, n - 1, min(n, MAX_SKIN_FRAMES)).round().astype(int))
    flat = pixels[picks, y0 : y0 + ch, x0 : x0 + cw, :].reshape(-1, 3)
    luma = flat @ np.array([0.299, 0.587, 0.114])
    lo, hi = np.quantile(luma, [SKIN_TRIM_FRACTION, 1 - SKIN_TRIM_FRACTION])
    kept = flat[(luma >= lo) & (luma <= hi)]
    return kept if len(kept) else flat


def classify_fitzpatrick(
    source: Union[FrameSequence, RgbTrace, Sequence[float]]
) -> FitzpatrickResult:
    """Fitzpatrick type of the mean skin color of frames, a trace or an RGB triple."""
    if isinstance(source, FrameSequence):
        mean_rgb = skin_pixels(source).mean(axis=0)
    elif isinstance(source, RgbTrace):
        mean_rgb = source.samples.mean(axis=0)
    else:
        mean_rgb = np.asarray(source, dtype=float)
        if mean_rgb.shape != (3,):
            raise DegenerateColor(f"Expected an RGB triple, got shape {mean_rgb.shape}.")
    return classify_lab(srgb_to_lab(mean_rgb))


# dataset report


@dataclass(frozen=True)
class AnalyzerRow:
    subject_id: str
    discrepancy: Optional[DiscrepancyReport] = None
    alignment: Optional[AlignmentReport] = None
    fitzpatrick: Optional[FitzpatrickResult] = None
    errors: Tuple[Tuple[str, str], ...] = ()
    notes: Tuple[str, ...] = ()

    @property
    def skin_type(self):
        return self.fitzpatrick.type if self.fitzpatrick is not None else UNKNOWN_TYPE

    @property
    def flag_reasons(self) -> Tuple[str, ...]:
        reasons = [f"{stage}: {msg}" for stage, msg in self.errors]
        if self.discrepancy is not None and self.discrepancy.flagged:
            reasons.append("HR label disagrees with the PPG label")
        if self.alignment is not None:
            if not self.alignment.reliable:
                reasons.append("alignment " + UNRELIABLE)
            elif abs(self.alignment.lag_s) >= LAG_FLAG_S:
                reasons.append(f"label lag {self.alignment.lag_s:+.3f} s")
        return tuple(reasons)

    @property
    def flagged(self) -> bool:
        return bool(self.flag_reasons)

    def to_dict(self):
        return {
            "subject_id": self.subject_id,
            "discrepancy": None
            if self.discrepancy is None
            else self.discrepancy.summary(),
            "alignment": None if self.alignment is None else self.alignment.to_dict(),
            "fitzpatrick": None
            if self.fitzpatrick is None
            else self.fitzpatrick.to_dict(),
            "flagged": self.flagged,
            "flag_reasons": list(self.flag_reasons),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class AnalyzerReport:
    rows: Tuple[AnalyzerRow, ...]
    threshold_bpm: float = DISCREPANCY_THRESHOLD_BPM
    skin_tone_method: str = field(default=SKIN_TONE_METHOD)

    @property
    def flagged_rows(self) -> Tuple[AnalyzerRow, ...]:
        return tuple(row for row in self.rows if row.flagged)

    @property
    def histogram(self) -> Dict[str, int]:
        counts = Counter(str(row.skin_type) for row in self.rows)
        keys = [str(t) for t in range(1, 7)] + [UNKNOWN_TYPE]
        return {key: counts.get(key, 0) for key in keys}

    def mean_discrepancy(self, kind: str = "label_vs_fft") -> Optional[float]:
        values = [
            row.discrepancy.mean_abs(kind)
            for row in self.rows
            if row.discrepancy is not None
        ]
        values = [v for v in values if v is not None]
        return float(np.mean(values)) if values else None

    def summary(self):
        lags = [abs(row.alignment.lag_s) for row in self.rows if row.alignment]
        return {
            "n_records": len(self.rows),
            "n_flagged": len(self.flagged_rows),
            "mean_discrepancy_bpm": {
                kind: self.mean_discrepancy(kind) for kind in DELTA_KINDS
            },
            "mean_abs_lag_s": float(np.mean(lags)) if lags else None,
            "n_unreliable_alignment": sum(
                1 for row in self.rows if row.alignment and not row.alignment.reliable
            ),
            "fitzpatrick_histogram": self.histogram,
        }

    def to_dict(self):
        return {
            "records": [row.to_dict() for row in self.rows],
            "summary": self.summary(),
            "discrepancy_threshold_bpm": self.threshold_bpm,
            "skin_tone_method": self.skin_tone_method,
        }

    def format_table(self) -> str:
        from tabulate import tabulate

        rows = [
            {
                "subject": row.subject_id,
                "label vs fft": _fmt(row.discrepancy.mean_abs("label_vs_fft"))
                if row.discrepancy
                else "-",
                "lag [s]": _fmt(row.alignment.lag_s) if row.alignment else "-",
                "corr": _fmt(row.alignment.peak_correlation) if row.alignment else "-",
                "skin type": row.skin_type,
                "flagged": "yes" if row.flagged else "",
            }
            for row in self.rows
        ]
        return tabulate(rows, headers="keys")


def _fmt(value):
    return "-" if value is None else f"{value:.2f}"


def _error_entry(stage: str, subject_id: str, e: RppgError):
    logger.record_error(subject_id=subject_id, method=stage, reason=str(e))
    return stage, f"{e.__class__.__name__}: {e}"


def analyze_record(
    record: DatasetRecord,
    window_len_s: float = 10.0,
    band: Tuple[float, float] = DEFAULT_BAND,
    threshold_bpm: float = DISCREPANCY_THRESHOLD_BPM,
) -> AnalyzerRow:
    errors, notes = [], []
    discrepancy = alignment = fitzpatrick = None
    if record.ppg_label is not None and record.hr_label is not None:
        try:
            discrepancy = label_discrepancy(
                record.ppg_label, record.hr_label, window_len_s, band, threshold_bpm
            )
        except RppgError as e:
            errors.append(_error_entry("discrepancy", record.subject_id, e))
    else:
        notes.append("no HR label; discrepancy skipped")
    try:
        alignment = check_alignment(record)
    except RppgError as e:
        errors.append(_error_entry("alignment", record.subject_id, e))
    try:
        fitzpatrick = classify_fitzpatrick(record.input)
    except RppgError as e:
        errors.append(_error_entry("fitzpatrick", record.subject_id, e))
    return AnalyzerRow(
        record.subject_id,
        discrepancy,
        alignment,
        fitzpatrick,
        tuple(errors),
        tuple(notes),
    )


def analyze_dataset(
    records: Sequence[DatasetRecord],
    failures: Sequence[LoadFailure] = (),
    window_len_s: float = 10.0,
    band: Tuple[float, float] = DEFAULT_BAND,
    threshold_bpm: float = DISCREPANCY_THRESHOLD_BPM,
    workers: int = 1,
) -> AnalyzerReport:
    """Audit every record; per-record failures become flagged rows."""
    if not records and not failures:
        raise EmptyDataset("Cannot analyze an empty dataset.")

    def analyze(record):
        return analyze_record(record, window_len_s, band, threshold_bpm)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        rows = list(executor.map(analyze, records))
    rows.extend(
        AnalyzerRow(
            failure.subject_id,
            errors=(("load", f"{failure.error.__class__.__name__}: {failure.error}"),),
        )
        for failure in failures
    )
    rows.sort(key=lambda row: row.subject_id)
    report = AnalyzerReport(tuple(rows), threshold_bpm)
    logger.info(
        f"Analyzed {len(rows)} records, {len(report.flagged_rows)} flagged."
    )
    return report
