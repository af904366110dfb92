from dataclasses import dataclass
from typing import Callable, Optional, Union

from rppgbench.exceptions import RequiresPixelData
from rppgbench.methods.chrom import chrom
from rppgbench.methods.green import green
from rppgbench.methods.ica import ica
from rppgbench.methods.lgi import lgi
from rppgbench.methods.pbv import pbv
from rppgbench.methods.pca import pca
from rppgbench.methods.pos import pos
from rppgbench.methods.ssr import ssr
from rppgbench.preprocess import as_trace
from rppgbench.settings import MethodConfig, MethodId
from rppgbench.signals import BvpSignal, FrameSequence, RgbTrace


@dataclass(frozen=True)
class MethodSpec:
    method_id: MethodId
    func: Callable
    needs_frames: bool = False


METHODS = {
    spec.method_id: spec
    for spec in (
        MethodSpec(MethodId.GREEN, green),
        MethodSpec(MethodId.ICA, ica),
        MethodSpec(MethodId.PCA, pca),
        MethodSpec(MethodId.CHROM, chrom),
        MethodSpec(MethodId.PBV, pbv),
        MethodSpec(MethodId.POS, pos),
        MethodSpec(MethodId.SSR, ssr, needs_frames=True),
        MethodSpec(MethodId.LGI, lgi),
    )
}


def run_method(
    method: Union[MethodId, str],
    source: Union[RgbTrace, FrameSequence],
    cfg: Optional[MethodConfig] = None,
) -> BvpSignal:
    """Run one pulse extraction method.

    Trace-based methods reduce a frame sequence to its spatial mean first.
    """
    spec = METHODS[MethodId.parse_choice(method, "method")]
    if spec.needs_frames:
        if not isinstance(source, FrameSequence):
            raise RequiresPixelData(spec.method_id)
        return spec.func(source, cfg)
    return spec.func(as_trace(source), cfg)
