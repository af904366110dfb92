from rppgbench.methods.common import normalize_by_mean, resolve_config, to_bvp
from rppgbench.preprocess import detrend
from rppgbench.settings import MethodConfig
from rppgbench.signals import BvpSignal, RgbTrace


def green(trace: RgbTrace, cfg: MethodConfig = None) -> BvpSignal:
    """Detrended, bandpassed green channel."""
    cfg = resolve_config(cfg)
    g = normalize_by_mean(trace.samples[:, 1:2])[:, 0]
    g = g - g.mean()
    return to_bvp(detrend(g, cfg.detrend_lambda), trace, cfg, "GREEN")
