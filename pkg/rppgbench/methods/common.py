import math
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy import signal as sps

from rppgbench.common import EPSILON, min_fft_length
from rppgbench.exceptions import TraceTooShort, WindowLongerThanTrace
from rppgbench.preprocess import bandpass
from rppgbench.settings import ComponentSelection, MethodConfig
from rppgbench.signals import BvpSignal, RgbTrace


def spectral_peak_fraction(x: np.ndarray, fs: float, band: Tuple[float, float]) -> float:
    """Share of the total power held by the strongest in-band periodogram bin."""
    x = np.asarray(x, dtype=float)
    freqs, power = sps.periodogram(
        x, fs, window="hann", nfft=min_fft_length(fs, len(x)), detrend="constant"
    )
    total = power.sum()
    inband = (freqs >= band[0]) & (freqs <= band[1])
    if total <= EPSILON or not inband.any():
        return 0.0
    return float(power[inband].max() / total)


def select_component(
    components: np.ndarray,
    fs: float,
    selection: ComponentSelection,
    band: Tuple[float, float],
) -> int:
    if selection == ComponentSelection.FIXED_SECOND:
        return min(1, components.shape[0] - 1)
    scores = [spectral_peak_fraction(c, fs, band) for c in components]
    return int(np.argmax(scores))


def require_duration(trace: RgbTrace, seconds: float, method: str):
    if trace.duration < seconds - 0.5 / trace.fs:
        raise TraceTooShort(
            f"{method} needs at least {seconds:g} s of samples, "
            f"got {trace.duration:.3g} s."
        )


def window_frames(fs: float, seconds: float, n: int, even: bool = False) -> int:
    length = int(math.ceil(seconds * fs))
    if even:
        length += length % 2
    if length > n:
        raise WindowLongerThanTrace(
            f"Window of {length} frames ({seconds} s) exceeds the trace length {n}."
        )
    return max(length, 2)


def sliding_windows(n: int, length: int, hop: int) -> Iterator[Tuple[int, int]]:
    """Window bounds covering [0, n); a last window is aligned to the end if needed."""
    start = 0
    last = None
    while start + length <= n:
        last = (start, start + length)
        yield last
        start += hop
    if last is not None and last[1] < n:
        yield n - length, n


def normalize_by_mean(x: np.ndarray) -> np.ndarray:
    """Divide each channel by its temporal mean; all-zero channels stay zero."""
    mean = x.mean(axis=0)
    out = np.zeros_like(x, dtype=float)
    np.divide(x, mean, out=out, where=np.abs(mean) > EPSILON)
    return out


def std_ratio(a: np.ndarray, b: np.ndarray) -> float:
    sb = b.std()
    return float(a.std() / sb) if sb > EPSILON else 0.0


def to_bvp(
    samples: np.ndarray,
    trace: RgbTrace,
    cfg: MethodConfig,
    tag: str,
    filtered: bool = True,
) -> BvpSignal:
    if filtered:
        samples = bandpass(samples, trace.fs, cfg.band)
    return BvpSignal(samples, trace.fs, method_tag=tag, t0=trace.t0)


def resolve_config(cfg: Optional[MethodConfig]) -> MethodConfig:
    return cfg if cfg is not None else MethodConfig()
