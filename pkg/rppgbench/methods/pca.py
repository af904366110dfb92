import numpy as np

from rppgbench.common import (
    MIN_DECOMPOSITION_SECONDS,
    RANK_TOLERANCE,
    lexicographic_sign,
)
from rppgbench.exceptions import RankDeficient
from rppgbench.methods.common import (
    require_duration,
    resolve_config,
    select_component,
    to_bvp,
)
from rppgbench.preprocess import detrend, zscore
from rppgbench.settings import ComponentSelection, MethodConfig
from rppgbench.signals import BvpSignal, RgbTrace


def principal_components(x: np.ndarray):
    """Eigenvalues (descending), components (k, N) and eigenvectors of x (N, k)."""
    xc = x - x.mean(axis=0)
    w, v = np.linalg.eigh(xc.T @ xc / xc.shape[0])
    order = np.argsort(w)[::-1]
    v = lexicographic_sign(v[:, order])
    return w[order], (xc @ v).T, v


def pca(trace: RgbTrace, cfg: MethodConfig = None) -> BvpSignal:
    cfg = resolve_config(cfg)
    require_duration(trace, MIN_DECOMPOSITION_SECONDS, "PCA")
    x = zscore(detrend(trace.samples, cfg.detrend_lambda))
    eigvals, components, _ = principal_components(x)
    if eigvals[-1] <= RANK_TOLERANCE * eigvals[0]:
        raise RankDeficient("Channel covariance is rank deficient.")
    selection = cfg.selection_for(ComponentSelection.MAX_SPECTRAL_PEAK)
    idx = select_component(components, trace.fs, selection, cfg.band)
    return to_bvp(components[idx], trace, cfg, "PCA")
