import numpy as np

from rppgbench.common import MIN_DECOMPOSITION_SECONDS, lexicographic_sign
from rppgbench.methods.common import (
    require_duration,
    resolve_config,
    select_component,
    to_bvp,
)
from rppgbench.settings import ComponentSelection, MethodConfig
from rppgbench.signals import BvpSignal, RgbTrace


def lgi_residual(trace: RgbTrace) -> np.ndarray:
    """Project the zero-mean trace off its dominant color direction.

    The direction is the leading left singular vector of the raw (3, N)
    trace, which follows skin tone and global illumination. Returns (3, N).
    """
    C = trace.samples.T
    u, _, _ = np.linalg.svd(C, full_matrices=False)
    u1 = lexicographic_sign(u[:, :1])[:, 0]
    P = np.eye(3) - np.outer(u1, u1)
    return P @ (C - C.mean(axis=1, keepdims=True))


def lgi(trace: RgbTrace, cfg: MethodConfig = None) -> BvpSignal:
    cfg = resolve_config(cfg)
    require_duration(trace, MIN_DECOMPOSITION_SECONDS, "LGI")
    F = lgi_residual(trace)
    selection = cfg.selection_for(ComponentSelection.MAX_SPECTRAL_PEAK)
    idx = select_component(F, trace.fs, selection, cfg.band)
    return to_bvp(F[idx], trace, cfg, "LGI")
