import numpy as np

from rppgbench.common import MIN_ICA_SECONDS, RANK_TOLERANCE
from rppgbench.exceptions import RankDeficient
from rppgbench.methods.common import (
    require_duration,
    resolve_config,
    select_component,
    to_bvp,
)
from rppgbench.methods.jade import jade
from rppgbench.preprocess import detrend, zscore
from rppgbench.settings import ComponentSelection, MethodConfig
from rppgbench.signals import BvpSignal, RgbTrace


def check_rank(x: np.ndarray):
    eig = np.linalg.eigvalsh(np.cov(x.T, bias=True))
    if eig.min() <= RANK_TOLERANCE * eig.max():
        raise RankDeficient(
            "Channel covariance is rank deficient; channels are linearly dependent."
        )


def ica_components(trace: RgbTrace, cfg: MethodConfig = None) -> np.ndarray:
    """Independent components (3, N) of the detrended, z-scored channels."""
    cfg = resolve_config(cfg)
    require_duration(trace, MIN_ICA_SECONDS, "ICA")
    x = zscore(detrend(trace.samples, cfg.detrend_lambda))
    check_rank(x)
    B = jade(x.T)
    return B @ x.T


def ica(trace: RgbTrace, cfg: MethodConfig = None) -> BvpSignal:
    cfg = resolve_config(cfg)
    components = ica_components(trace, cfg)
    selection = cfg.selection_for(ComponentSelection.FIXED_SECOND)
    s = components[select_component(components, trace.fs, selection, cfg.band)]
    # pulse darkens the skin, so the component follows -G
    if np.corrcoef(s, -trace.g)[0, 1] < 0:
        s = -s
    return to_bvp(s, trace, cfg, "ICA")
