"""Agreement and quality metrics between predicted and reference heart rates."""

from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from rppgbench.common import (
    DEFAULT_SNR_BAND_BPM,
    DEFAULT_SNR_DELTA_BPM,
    EPSILON,
    min_fft_length,
)
from rppgbench.exceptions import (
    ConstantInput,
    HrOutOfBand,
    InvalidSignal,
    LengthMismatch,
    SignalTooShort,
    ZeroTruth,
)
from rppgbench.signals import BvpSignal

# SNR needs this much signal for a meaningful spectrum.
MIN_SNR_SECONDS = 5.0
BLAND_ALTMAN_Z = 1.96


def _pair(pred, truth, min_len=1) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise LengthMismatch(
            f"Prediction and truth lengths differ ({pred.shape} vs {truth.shape})."
        )
    if len(pred) < min_len:
        raise LengthMismatch(f"At least {min_len} pairs are required, got {len(pred)}.")
    return pred, truth


def mae(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


def mse(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def rmse(pred, truth) -> float:
    return float(np.sqrt(mse(pred, truth)))


def mape(pred, truth) -> float:
    """Mean absolute percentage error as a fraction (0.05 means 5 %)."""
    pred, truth = _pair(pred, truth)
    if np.any(truth == 0):
        raise ZeroTruth("MAPE is undefined for a zero reference value.")
    return float(np.mean(np.abs((pred - truth) / truth)))


def pearson(pred, truth) -> float:
    pred, truth = _pair(pred, truth, min_len=2)
    dp = pred - pred.mean()
    dt = truth - truth.mean()
    sp = np.sqrt(np.sum(dp * dp))
    st = np.sqrt(np.sum(dt * dt))
    if sp <= EPSILON * max(1.0, np.abs(pred).max()) or st <= EPSILON * max(
        1.0, np.abs(truth).max()
    ):
        raise ConstantInput("Pearson correlation is undefined for a constant input.")
    return float(np.clip(np.sum(dp * dt) / (sp * st), -1.0, 1.0))


def snr(
    bvp: BvpSignal,
    true_hr_bpm: float,
    band_bpm: Tuple[float, float] = DEFAULT_SNR_BAND_BPM,
    delta_bpm: float = DEFAULT_SNR_DELTA_BPM,
) -> float:
    """Ratio in dB of spectral power near the reference HR and its first
    harmonic to the remaining power inside band_bpm.
    """
    lo, hi = band_bpm
    if not lo <= true_hr_bpm <= hi:
        raise HrOutOfBand(f"Reference HR {true_hr_bpm} bpm lies outside {band_bpm}.")
    if bvp.duration < MIN_SNR_SECONDS:
        raise SignalTooShort(
            f"SNR needs at least {MIN_SNR_SECONDS} s of signal, got {bvp.duration:.2f} s."
        )
    x = bvp.samples - bvp.samples.mean()
    nfft = min_fft_length(bvp.fs, len(x))
    power = np.abs(np.fft.rfft(x * np.hanning(len(x)), nfft)) ** 2
    bpm = 60.0 * np.fft.rfftfreq(nfft, 1.0 / bvp.fs)
    inband = (bpm >= lo) & (bpm <= hi)
    template = (np.abs(bpm - true_hr_bpm) <= delta_bpm) | (
        np.abs(bpm - 2 * true_hr_bpm) <= delta_bpm
    )
    signal_power = power[inband & template].sum()
    noise_power = power[inband & ~template].sum()
    if signal_power <= 0 or noise_power <= 0:
        raise InvalidSignal("SNR is undefined for an empty signal or noise band.")
    return float(10 * np.log10(signal_power / noise_power))


@dataclass(frozen=True)
class BlandAltman:
    bias: float
    sd: float
    loa_lo: float
    loa_hi: float
    means: Tuple[float, ...]
    diffs: Tuple[float, ...]

    def to_dict(self, with_pairs=True):
        result = asdict(self)
        if not with_pairs:
            del result["means"], result["diffs"]
        return result


def bland_altman(pred, truth) -> BlandAltman:
    pred, truth = _pair(pred, truth, min_len=2)
    diffs = pred - truth
    bias = float(diffs.mean())
    sd = float(diffs.std())
    return BlandAltman(
        bias,
        sd,
        bias - BLAND_ALTMAN_Z * sd,
        bias + BLAND_ALTMAN_Z * sd,
        tuple(float(v) for v in (pred + truth) / 2),
        tuple(float(v) for v in diffs),
    )


@dataclass(frozen=True)
class MetricSet:
    """Metric values of one (method, window length) cell; None where undefined."""

    n_windows: int
    mae_bpm: Optional[float] = None
    rmse_bpm: Optional[float] = None
    mse: Optional[float] = None
    mape_pct: Optional[float] = None
    pearson_r: Optional[float] = None
    snr_db: Optional[float] = None
    bland_altman: Optional[BlandAltman] = None

    def to_dict(self):
        result = asdict(self)
        if self.bland_altman is not None:
            result["bland_altman"] = self.bland_altman.to_dict()
        return result

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        ba = data.get("bland_altman")
        if ba is not None:
            ba = dict(ba)
            ba["means"] = tuple(ba.get("means", ()))
            ba["diffs"] = tuple(ba.get("diffs", ()))
            data["bland_altman"] = BlandAltman(**ba)
        return cls(**data)


def mean_or_none(values: Sequence[Optional[float]]) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None
