import numpy as np

from rppgbench.methods.common import (
    normalize_by_mean,
    resolve_config,
    std_ratio,
    to_bvp,
    window_frames,
)
from rppgbench.settings import MethodConfig
from rppgbench.signals import BvpSignal, RgbTrace

# Projection onto the plane orthogonal to the skin tone.
PROJECTION = np.array([[0.0, 1.0, -1.0], [-2.0, 1.0, 1.0]])


def pos(trace: RgbTrace, cfg: MethodConfig = None) -> BvpSignal:
    """Plane-orthogonal-to-skin pulse, overlap-added with a stride of one frame."""
    cfg = resolve_config(cfg)
    n = len(trace)
    length = window_frames(trace.fs, cfg.window_seconds, n)
    out = np.zeros(n)
    for stop in range(length, n + 1):
        start = stop - length
        cn = normalize_by_mean(trace.samples[start:stop])
        s = PROJECTION @ cn.T
        h = s[0] + std_ratio(s[0], s[1]) * s[1]
        out[start:stop] += h - h.mean()
    return to_bvp(out, trace, cfg, "POS")
