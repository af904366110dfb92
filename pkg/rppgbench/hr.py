import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal as sps

from rppgbench.common import (
    DEFAULT_BAND,
    DISCREPANCY_THRESHOLD_BPM,
    hz_to_bpm,
    min_fft_length,
)
from rppgbench.exceptions import EmptyBand, NoOverlap, TooFewPeaks, WindowTooShort
from rppgbench.settings import CalType, HrMethod
from rppgbench.signals import BvpSignal


@dataclass(frozen=True)
class HrEntry:
    window_start_s: float
    window_len_s: float
    hr_bpm: Optional[float]

    @property
    def center_s(self):
        return self.window_start_s + self.window_len_s / 2

    @property
    def present(self):
        return self.hr_bpm is not None


@dataclass(frozen=True)
class HrSeries:
    entries: Tuple[HrEntry, ...]
    method: HrMethod
    source_tag: str = ""

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[HrEntry]:
        return iter(self.entries)

    @property
    def values(self) -> np.ndarray:
        """Heart rates in bpm, NaN where a window yielded none."""
        return np.array(
            [e.hr_bpm if e.present else np.nan for e in self.entries], dtype=float
        )

    @property
    def span(self) -> Tuple[float, float]:
        if not self.entries:
            return (0.0, 0.0)
        first, last = self.entries[0], self.entries[-1]
        return first.window_start_s, last.window_start_s + last.window_len_s

    def mean_between(self, start_s: float, stop_s: float) -> Optional[float]:
        """Mean of the present entries centered in [start_s, stop_s)."""
        values = [
            e.hr_bpm
            for e in self.entries
            if e.present and start_s <= e.center_s < stop_s
        ]
        return float(np.mean(values)) if values else None

    @classmethod
    def from_samples(
        cls, times: Sequence[float], hr_bpm: Sequence[float], fs: float, source_tag=""
    ) -> "HrSeries":
        """One entry per label sample, as found in HR label files."""
        return cls(
            tuple(
                HrEntry(float(t) - 0.5 / fs, 1.0 / fs, float(hr))
                for t, hr in zip(times, hr_bpm)
            ),
            HrMethod.LABEL,
            source_tag,
        )


def window_bounds(
    n: int, fs: float, window_len_s: float, overlap_s: float = 0.0
) -> List[Tuple[int, int]]:
    """Sample bounds of the full windows over n samples; the tail is dropped."""
    length = int(round(window_len_s * fs))
    if length < 2:
        raise WindowTooShort(
            f"A window of {window_len_s} s at {fs} Hz holds fewer than two samples."
        )
    hop = length - int(round(overlap_s * fs))
    if hop < 1:
        raise WindowTooShort(f"Overlap {overlap_s} s leaves no hop between windows.")
    if n < length:
        raise WindowTooShort(
            f"Signal of {n} samples is shorter than one {window_len_s} s window."
        )
    return [(start, start + length) for start in range(0, n - length + 1, hop)]


def fft_hr(x: np.ndarray, fs: float, band: Tuple[float, float] = DEFAULT_BAND) -> float:
    """Heart rate of the strongest in-band frequency of a Hann-windowed segment.

    The segment is zero-padded to at least 60 fs samples, so the frequency
    grid resolves 1 bpm.
    """
    x = sps.detrend(np.asarray(x, dtype=float), type="linear")
    nfft = min_fft_length(fs, len(x))
    spectrum = np.abs(np.fft.rfft(x * sps.get_window("hann", len(x)), nfft))
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    inband = (freqs >= band[0]) & (freqs <= band[1])
    if band[0] >= band[1] or not inband.any():
        raise EmptyBand(f"No frequency bin of the spectrum lies in {band} Hz.")
    return hz_to_bpm(freqs[inband][np.argmax(spectrum[inband])])


def peak_hr(
    x: np.ndarray, fs: float, band: Tuple[float, float] = DEFAULT_BAND
) -> Optional[float]:
    """Heart rate from the mean inter-beat interval, None with fewer than two beats."""
    x = np.asarray(x, dtype=float)
    std = x.std()
    if std == 0:
        return None
    distance = max(1.0, fs / band[1])
    peaks, _ = sps.find_peaks(x, distance=distance, prominence=0.3 * std)
    if len(peaks) < 2:
        return None
    return 60.0 * fs / float(np.mean(np.diff(peaks)))


def _series(signal, window_len_s, overlap_s, method, estimate) -> HrSeries:
    entries = []
    for start, stop in window_bounds(len(signal), signal.fs, window_len_s, overlap_s):
        entries.append(
            HrEntry(
                signal.t0 + start / signal.fs,
                (stop - start) / signal.fs,
                estimate(signal.samples[start:stop]),
            )
        )
    return HrSeries(tuple(entries), method, signal.method_tag)


def hr_fft(
    signal: BvpSignal,
    window_len_s: float,
    overlap_s: float = 0.0,
    band: Tuple[float, float] = DEFAULT_BAND,
) -> HrSeries:
    return _series(
        signal,
        window_len_s,
        overlap_s,
        HrMethod.FFT,
        lambda x: fft_hr(x, signal.fs, band),
    )


def hr_peaks(
    signal: BvpSignal,
    window_len_s: float,
    overlap_s: float = 0.0,
    band: Tuple[float, float] = DEFAULT_BAND,
) -> HrSeries:
    """Peak-interval heart rate per window.

    Windows with fewer than two detected peaks carry no value; a signal
    where no window yields one raises TooFewPeaks.
    """
    series = _series(
        signal,
        window_len_s,
        overlap_s,
        HrMethod.PEAK,
        lambda x: peak_hr(x, signal.fs, band),
    )
    if not any(e.present for e in series):
        raise TooFewPeaks("No window contains two or more detectable peaks.")
    return series


def estimate_hr(
    signal: BvpSignal,
    cal_type: CalType,
    window_len_s: float,
    overlap_s: float = 0.0,
    band: Tuple[float, float] = DEFAULT_BAND,
) -> HrSeries:
    if cal_type == CalType.PEAK:
        return hr_peaks(signal, window_len_s, overlap_s, band)
    return hr_fft(signal, window_len_s, overlap_s, band)


@dataclass(frozen=True)
class DiscrepancyRow:
    window_start_s: float
    window_len_s: float
    hr_label: Optional[float]
    hr_fft: Optional[float]
    hr_peak: Optional[float]

    @staticmethod
    def _delta(a, b):
        return None if a is None or b is None else abs(a - b)

    @property
    def label_vs_fft(self):
        return self._delta(self.hr_label, self.hr_fft)

    @property
    def label_vs_peak(self):
        return self._delta(self.hr_label, self.hr_peak)

    @property
    def fft_vs_peak(self):
        return self._delta(self.hr_fft, self.hr_peak)


DELTA_KINDS = ("label_vs_fft", "label_vs_peak", "fft_vs_peak")


@dataclass(frozen=True)
class DiscrepancyReport:
    rows: Tuple[DiscrepancyRow, ...]
    threshold_bpm: float = DISCREPANCY_THRESHOLD_BPM

    def deltas(self, kind: str) -> np.ndarray:
        values = [getattr(row, kind) for row in self.rows]
        return np.array([v for v in values if v is not None], dtype=float)

    def mean_abs(self, kind: str) -> Optional[float]:
        d = self.deltas(kind)
        return float(d.mean()) if d.size else None

    def max_abs(self, kind: str) -> Optional[float]:
        d = self.deltas(kind)
        return float(d.max()) if d.size else None

    @property
    def flagged_rows(self) -> Tuple[DiscrepancyRow, ...]:
        return tuple(
            row
            for row in self.rows
            if any(
                (getattr(row, kind) or 0.0) > self.threshold_bpm for kind in DELTA_KINDS
            )
        )

    @property
    def flagged(self) -> bool:
        return bool(self.flagged_rows)

    def summary(self):
        return {
            kind: {"mean": self.mean_abs(kind), "max": self.max_abs(kind)}
            for kind in DELTA_KINDS
        }


def label_discrepancy(
    ppg_label: BvpSignal,
    hr_label: "HrSeries",
    window_len_s: float = 10.0,
    band: Tuple[float, float] = DEFAULT_BAND,
    threshold_bpm: float = DISCREPANCY_THRESHOLD_BPM,
) -> DiscrepancyReport:
    """Compare a recorded HR label with HR derived from the PPG label.

    Windows tile the time span shared by both labels; each row holds the
    mean recorded HR of the window next to its FFT and peak estimates.
    """
    label_start, label_stop = hr_label.span
    start_s = max(ppg_label.t0, label_start)
    stop_s = min(ppg_label.t0 + ppg_label.duration, label_stop)
    if stop_s - start_s < window_len_s:
        raise NoOverlap(
            f"PPG label [{ppg_label.t0:.2f}, {ppg_label.t0 + ppg_label.duration:.2f}] s "
            f"and HR label [{label_start:.2f}, {label_stop:.2f}] s "
            f"share less than one {window_len_s} s window."
        )
    fs = ppg_label.fs
    offset = int(math.ceil((start_s - ppg_label.t0) * fs - 1e-9))
    n = min(len(ppg_label), int(math.floor((stop_s - ppg_label.t0) * fs + 1e-9))) - offset
    rows = []
    for start, stop in window_bounds(n, fs, window_len_s):
        x = ppg_label.samples[offset + start : offset + stop]
        ws = ppg_label.t0 + (offset + start) / fs
        wl = (stop - start) / fs
        try:
            fft_value = fft_hr(x, fs, band)
        except EmptyBand:
            fft_value = None
        rows.append(
            DiscrepancyRow(
                ws,
                wl,
                hr_label.mean_between(ws, ws + wl),
                fft_value,
                peak_hr(x, fs, band),
            )
        )
    return DiscrepancyReport(tuple(rows), threshold_bpm)
