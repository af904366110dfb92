import numpy as np

from rppgbench.common import EPSILON, GRAM_EPSILON, MIN_DECOMPOSITION_SECONDS
from rppgbench.exceptions import SingularGram
from rppgbench.methods.common import (
    normalize_by_mean,
    require_duration,
    resolve_config,
    to_bvp,
)
from rppgbench.settings import MethodConfig
from rppgbench.signals import BvpSignal, RgbTrace


def pbv(trace: RgbTrace, cfg: MethodConfig = None) -> BvpSignal:
    """Blood-volume pulse signature projection.

    The projection w = Q^-1 sig, with Q the regularized Gram matrix of the
    mean-normalized, zero-mean channels, is scaled so that sig'w = 1.
    """
    cfg = resolve_config(cfg)
    require_duration(trace, MIN_DECOMPOSITION_SECONDS, "PBV")
    sig = cfg.unit_pbv_signature
    cn = normalize_by_mean(trace.samples)
    C = (cn - cn.mean(axis=0)).T
    Q = C @ C.T + GRAM_EPSILON * np.eye(3)
    try:
        w = np.linalg.solve(Q, sig)
    except np.linalg.LinAlgError as e:
        raise SingularGram(f"Cannot invert the channel Gram matrix: {e}")
    denom = sig @ w
    if not np.all(np.isfinite(w)) or abs(denom) <= EPSILON:
        raise SingularGram("Channel Gram matrix is numerically singular.")
    return to_bvp(C.T @ w / denom, trace, cfg, "PBV")
