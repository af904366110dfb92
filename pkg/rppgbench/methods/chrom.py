import numpy as np
from scipy import signal as sps

from rppgbench.methods.common import (
    normalize_by_mean,
    resolve_config,
    sliding_windows,
    std_ratio,
    to_bvp,
    window_frames,
)
from rppgbench.settings import MethodConfig
from rppgbench.signals import BvpSignal, RgbTrace


def chrom_window(c: np.ndarray) -> np.ndarray:
    """Chrominance pulse of one window of RGB samples (L, 3), zero mean."""
    cn = normalize_by_mean(c)
    x = 3 * cn[:, 0] - 2 * cn[:, 1]
    y = 1.5 * cn[:, 0] + cn[:, 1] - 1.5 * cn[:, 2]
    s = x - std_ratio(x, y) * y
    return s - s.mean()


def chrom(trace: RgbTrace, cfg: MethodConfig = None) -> BvpSignal:
    """Chrominance-based pulse, Hann overlap-added over half-overlapping windows."""
    cfg = resolve_config(cfg)
    n = len(trace)
    length = window_frames(trace.fs, cfg.window_seconds, n, even=True)
    hann = sps.get_window("hann", length)
    out = np.zeros(n)
    for start, stop in sliding_windows(n, length, length // 2):
        out[start:stop] += hann * chrom_window(trace.samples[start:stop])
    return to_bvp(out, trace, cfg, "CHROM")
