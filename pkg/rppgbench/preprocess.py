from typing import Tuple, Union

import numpy as np
from scipy import signal as sps
from scipy import sparse
from scipy.sparse.linalg import spsolve

from rppgbench.common import DEFAULT_BAND, DEFAULT_DETREND_LAMBDA, DEFAULT_FILTER_ORDER, EPSILON
from rppgbench.exceptions import (
    ConstantSignal,
    GridLargerThanRoi,
    InvalidFrames,
    SignalTooShort,
    TraceTooShort,
)
from rppgbench.settings import ChannelSpace, PreprocessKind, check_band
from rppgbench.signals import BvpSignal, FrameSequence, RgbTrace, StMap

# ITU-R BT.601 RGB to YUV.
YUV_MATRIX = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.14713, -0.28886, 0.436],
        [0.615, -0.51499, -0.10001],
    ]
)


def spatial_mean(frames: FrameSequence) -> RgbTrace:
    """Mean RoI color per frame."""
    pixels = frames.roi_pixels()
    return RgbTrace(
        pixels.mean(axis=(1, 2)),
        frames.fs,
        subject_id=frames.subject_id,
        t0=frames.t0,
    )


def as_trace(source: Union[RgbTrace, FrameSequence]) -> RgbTrace:
    if isinstance(source, FrameSequence):
        return spatial_mean(source)
    return source


def normalized_difference(x: np.ndarray) -> np.ndarray:
    """(c[t+1] - c[t]) / (c[t+1] + c[t]) along the first axis, 0 where the sum vanishes."""
    x = np.asarray(x, dtype=float)
    num = x[1:] - x[:-1]
    den = x[1:] + x[:-1]
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=np.abs(den) > EPSILON)
    return out


def diff_normalize(trace: RgbTrace) -> Tuple[BvpSignal, BvpSignal, BvpSignal]:
    """Per-channel normalized frame difference scaled to unit standard deviation.

    Returns one signal per channel, each one sample shorter than the trace.
    """
    if len(trace) < 2:
        raise TraceTooShort("Normalized differences need at least two samples.")
    diff = normalized_difference(trace.samples)
    channels = []
    for c, name in enumerate("RGB"):
        d = diff[:, c]
        std = d.std()
        if std > EPSILON:
            d = d / std
        channels.append(
            BvpSignal(
                d,
                trace.fs,
                method_tag=f"DIFF_NORM.{name}",
                t0=trace.t0 + 1 / trace.fs,
            )
        )
    return tuple(channels)


def zscore(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise SignalTooShort("z-scoring needs at least two samples.")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.maximum(np.abs(x).max(axis=0), 1.0)
    if np.any(std <= EPSILON * scale):
        raise ConstantSignal("Cannot z-score a constant signal.")
    return (x - mean) / std


def filter_padlen(sos: np.ndarray) -> int:
    return 3 * (2 * len(sos) + 1)


def bandpass(
    x: np.ndarray,
    fs: float,
    band: Tuple[float, float] = DEFAULT_BAND,
    order: int = DEFAULT_FILTER_ORDER,
) -> np.ndarray:
    """Zero-phase Butterworth bandpass along the first axis."""
    check_band(band, fs)
    sos = sps.butter(order, band, btype="bandpass", fs=fs, output="sos")
    x = np.asarray(x, dtype=float)
    padlen = filter_padlen(sos)
    if x.shape[0] <= padlen:
        raise SignalTooShort(
            f"Bandpass filtering needs more than {padlen} samples, got {x.shape[0]}."
        )
    return sps.sosfiltfilt(sos, x, axis=0, padlen=padlen)


def bandpass_signal(
    signal: BvpSignal, band: Tuple[float, float] = DEFAULT_BAND
) -> BvpSignal:
    return signal.with_samples(bandpass(signal.samples, signal.fs, band))


def detrend(x: np.ndarray, lam: float = DEFAULT_DETREND_LAMBDA) -> np.ndarray:
    """Smoothness-priors detrending along the first axis.

    Removes the trend (I + lam^2 D2'D2)^-1 x, where D2 is the second
    order difference operator.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 3:
        return x - x.mean(axis=0)
    ones = np.ones(n - 2)
    d2 = sparse.diags([ones, -2 * ones, ones], [0, 1, 2], shape=(n - 2, n), format="csc")
    identity = sparse.identity(n, format="csc")
    trend = spsolve(identity + lam**2 * (d2.T @ d2), x)
    return x - np.reshape(trend, x.shape)


def make_stmap(
    frames: FrameSequence,
    grid: Tuple[int, int],
    channel_space: ChannelSpace = ChannelSpace.RGB,
    normalize: bool = True,
) -> StMap:
    """Average RoI blocks per frame into a spatio-temporal map.

    Blocks are taken row-major over a rows x cols grid; remainder pixels
    at the right and bottom edges are dropped. With normalize, every row
    is min-max scaled per channel to [0, 1] (constant rows become 0.5).
    """
    rows, cols = grid
    if rows < 1 or cols < 1:
        raise InvalidFrames(f"Grid {grid} must have at least one row and column.")
    pixels = frames.roi_pixels()
    _, height, width, _ = pixels.shape
    if rows > height or cols > width:
        raise GridLargerThanRoi(
            f"Grid {rows}x{cols} does not fit a {width}x{height} RoI."
        )
    if channel_space == ChannelSpace.YUV:
        pixels = pixels @ YUV_MATRIX.T
    bh, bw = height // rows, width // cols
    blocks = []
    for i in range(rows):
        for j in range(cols):
            block = pixels[:, i * bh : (i + 1) * bh, j * bw : (j + 1) * bw, :]
            blocks.append(block.mean(axis=(1, 2)))
    stmap = np.stack(blocks)
    if normalize:
        lo = stmap.min(axis=1, keepdims=True)
        span = stmap.max(axis=1, keepdims=True) - lo
        flat = span <= EPSILON
        stmap = np.where(flat, 0.5, (stmap - lo) / np.where(flat, 1.0, span))
    return StMap(stmap, (rows, cols), frames.fs, channel_space, normalized=normalize)


def raw(trace: RgbTrace) -> np.ndarray:
    """The trace samples unchanged, as a writable copy."""
    return np.array(trace.samples)


def preprocess(
    kind: PreprocessKind,
    source: Union[RgbTrace, FrameSequence],
    grid: Tuple[int, int] = (5, 5),
    channel_space: ChannelSpace = ChannelSpace.RGB,
) -> np.ndarray:
    """Transform an input into the array form named by kind.

    RAW and ZSCORE give (N, 3) arrays, DIFF_NORM (N-1, 3) and STMAP
    (blocks, N, 3). STMAP requires frames.
    """
    if kind == PreprocessKind.STMAP:
        if not isinstance(source, FrameSequence):
            raise InvalidFrames("A spatio-temporal map needs a frame sequence.")
        return make_stmap(source, grid, channel_space).rows
    trace = as_trace(source)
    if kind == PreprocessKind.RAW:
        return raw(trace)
    elif kind == PreprocessKind.DIFF_NORM:
        return np.column_stack([c.samples for c in diff_normalize(trace)])
    elif kind == PreprocessKind.ZSCORE:
        return zscore(trace.samples)
    raise ValueError(f"bug: unhandled preprocessing kind {kind}")
