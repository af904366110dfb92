"""Signal containers shared by every stage of the benchmark, and their
on-disk formats.

Traces and pulse signals are stored as CSV files with a time column
(``t,r,g,b`` and ``t,bvp``). Frame sequences are stored as raw planar
8-bit files, each frame laid out as three HxW channel planes in R, G, B
order, next to a JSON sidecar with ``height``, ``width``, ``channels``,
``fps`` and ``count``.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from rppgbench.exceptions import (
    EmptyRoi,
    InvalidFrames,
    InvalidSignal,
    InvalidTrace,
    IoFailure,
    MalformedFile,
    NonFiniteInput,
    TraceTooShort,
)
from rppgbench.settings import ChannelSpace

PathLike = Union[str, Path]

TRACE_COLUMNS = ("t", "r", "g", "b")
BVP_COLUMNS = ("t", "bvp")
CSV_FLOAT_FORMAT = "%.17g"


def _frozen(array, dtype=float):
    array = np.array(array, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


def _check_fs(fs, error=InvalidSignal):
    if not np.isfinite(fs) or fs <= 0:
        raise error(f"Sampling rate must be positive and finite, got {fs}.")


@dataclass(frozen=True)
class Roi:
    x: int
    y: int
    w: int
    h: int

    @property
    def empty(self):
        return self.w <= 0 or self.h <= 0


@dataclass(frozen=True)
class RgbTrace:
    """Per-frame spatial mean color of the skin region.

    Samples are linear 8-bit values in [0, 255], or in [0, 1] when
    normalized. A rescaled trace is a linear trace multiplied by a global
    gain; only its lower bound is enforced.
    """

    samples: np.ndarray
    fs: float
    subject_id: str = ""
    t0: float = 0.0
    normalized: bool = False
    rescaled: bool = False

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.ndim != 2 or samples.shape[1] != 3:
            raise InvalidTrace(
                f"Trace must have shape (N, 3), got {samples.shape}."
            )
        if samples.shape[0] < 2:
            raise TraceTooShort(
                f"Trace needs at least two samples, got {samples.shape[0]}."
            )
        if not np.all(np.isfinite(samples)):
            raise NonFiniteInput("Trace contains non-finite values.")
        upper = 1.0 if self.normalized else 255.0
        if samples.min() < 0:
            raise InvalidTrace("Trace values must not be negative.")
        if not self.rescaled and samples.max() > upper:
            raise InvalidTrace(f"Trace values must lie in [0, {upper:g}].")
        _check_fs(self.fs, InvalidTrace)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def times(self):
        return self.t0 + np.arange(len(self)) / self.fs

    @property
    def duration(self):
        return len(self) / self.fs

    @property
    def r(self):
        return self.samples[:, 0]

    @property
    def g(self):
        return self.samples[:, 1]

    @property
    def b(self):
        return self.samples[:, 2]

    def scaled(self, gain: float) -> "RgbTrace":
        return RgbTrace(
            self.samples * gain,
            self.fs,
            subject_id=self.subject_id,
            t0=self.t0,
            normalized=self.normalized,
            rescaled=True,
        )

    def segment(self, start: int, stop: int) -> "RgbTrace":
        return RgbTrace(
            self.samples[start:stop],
            self.fs,
            subject_id=self.subject_id,
            t0=self.t0 + start / self.fs,
            normalized=self.normalized,
            rescaled=self.rescaled,
        )


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray
    fs: float
    roi: Optional[Roi] = None
    subject_id: str = ""
    t0: float = 0.0

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 4 or frames.shape[3] != 3:
            raise InvalidFrames(
                f"Frames must have shape (T, H, W, 3), got {frames.shape}."
            )
        if frames.shape[0] == 0:
            raise InvalidFrames("Frame sequence is empty.")
        _check_fs(self.fs, InvalidFrames)
        height, width = frames.shape[1:3]
        roi = self.roi if self.roi is not None else Roi(0, 0, width, height)
        if (
            roi.x < 0
            or roi.y < 0
            or roi.x + max(roi.w, 0) > width
            or roi.y + max(roi.h, 0) > height
        ):
            raise InvalidFrames(f"RoI {roi} exceeds frame bounds {width}x{height}.")
        frames = frames.copy()
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "roi", roi)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self):
        return self.frames.shape[0]

    @property
    def shape(self):
        return self.frames.shape[1:3]

    def roi_pixels(self) -> np.ndarray:
        """RoI pixels as float array of shape (T, h, w, 3)."""
        roi = self.roi
        if roi.empty:
            raise EmptyRoi(f"RoI {roi} contains no pixels.")
        return self.frames[:, roi.y : roi.y + roi.h, roi.x : roi.x + roi.w, :].astype(
            float
        )


@dataclass(frozen=True)
class BvpSignal:
    samples: np.ndarray
    fs: float
    method_tag: str = ""
    t0: float = 0.0

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.ndim != 1:
            raise InvalidSignal(
                f"Pulse signal must be one-dimensional, got shape {samples.shape}."
            )
        if not np.all(np.isfinite(samples)):
            raise InvalidSignal("Pulse signal contains non-finite values.")
        _check_fs(self.fs)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def times(self):
        return self.t0 + np.arange(len(self)) / self.fs

    @property
    def duration(self):
        return len(self) / self.fs

    def with_samples(self, samples, method_tag=None) -> "BvpSignal":
        return BvpSignal(
            samples,
            self.fs,
            method_tag=self.method_tag if method_tag is None else method_tag,
            t0=self.t0,
        )

    def segment(self, start: int, stop: int) -> "BvpSignal":
        return BvpSignal(
            self.samples[start:stop],
            self.fs,
            method_tag=self.method_tag,
            t0=self.t0 + start / self.fs,
        )


@dataclass(frozen=True)
class StMap:
    """Spatio-temporal map with one row per RoI block.

    rows has shape (n_blocks, n_frames, 3); blocks are ordered row-major
    over the grid.
    """

    rows: np.ndarray
    block_grid: Tuple[int, int]
    fs: float
    channel_space: ChannelSpace = ChannelSpace.RGB
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "rows", _frozen(self.rows))

    @property
    def n_blocks(self):
        return self.rows.shape[0]


# file I/O


def read_numeric_csv(
    path: PathLike, columns: Sequence[str], optional: Sequence[str] = ()
) -> pd.DataFrame:
    """Read a numeric CSV file whose leading columns must match the given header.

    Optional columns are picked up by name when present. Rows with missing
    or non-numeric fields raise MalformedFile naming the offending line
    (the header is line 1).
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, skipinitialspace=True, dtype=str)
    except FileNotFoundError as e:
        raise IoFailure(path, e)
    except pd.errors.EmptyDataError:
        raise MalformedFile(path, "file is empty", line=1)
    except pd.errors.ParserError as e:
        raise MalformedFile(path, f"cannot parse CSV: {e}")
    except OSError as e:
        raise IoFailure(path, e)

    header = [str(c).strip() for c in frame.columns]
    if header[: len(columns)] != list(columns):
        raise MalformedFile(
            path,
            f"expected header {','.join(columns)}, found {','.join(header)}",
            line=1,
        )
    frame.columns = header
    columns = list(columns) + [c for c in optional if c in header and c not in columns]
    numeric = frame[columns].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1).to_numpy() | ~np.isfinite(
        numeric.to_numpy(dtype=float, na_value=np.nan)
    ).all(axis=1)
    if bad.any():
        line = int(np.flatnonzero(bad)[0]) + 2
        raise MalformedFile(path, "missing or non-numeric field", line=line)
    if numeric.empty:
        raise MalformedFile(path, "no data rows", line=2)
    # python float parsing keeps the written decimal representation exact
    return pd.DataFrame(
        np.asarray(frame[columns].to_numpy(), dtype=float), columns=columns
    )


def estimate_fs(times: np.ndarray) -> float:
    if len(times) < 2:
        raise InvalidSignal("Cannot infer a sampling rate from fewer than two samples.")
    step = float(np.median(np.diff(times)))
    if step <= 0:
        raise InvalidSignal("Time column must be strictly increasing.")
    return 1.0 / step


def _write_csv(frame: pd.DataFrame, path: PathLike):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise IoFailure(path, e)


def write_trace_csv(trace: RgbTrace, path: PathLike):
    frame = pd.DataFrame(
        {
            "t": trace.times,
            "r": trace.r,
            "g": trace.g,
            "b": trace.b,
        }
    )
    _write_csv(frame, path)


def read_trace_csv(
    path: PathLike, fs: Optional[float] = None, subject_id: str = ""
) -> RgbTrace:
    frame = read_numeric_csv(path, TRACE_COLUMNS)
    times = frame["t"].to_numpy()
    if fs is None:
        fs = estimate_fs(times)
    try:
        return RgbTrace(
            frame[["r", "g", "b"]].to_numpy(),
            fs,
            subject_id=subject_id,
            t0=float(times[0]),
        )
    except InvalidTrace as e:
        raise MalformedFile(path, str(e))


def write_bvp_csv(signal: BvpSignal, path: PathLike):
    _write_csv(pd.DataFrame({"t": signal.times, "bvp": signal.samples}), path)


def read_bvp_csv(path: PathLike, fs: Optional[float] = None) -> BvpSignal:
    frame = read_numeric_csv(path, BVP_COLUMNS)
    times = frame["t"].to_numpy()
    if fs is None:
        fs = estimate_fs(times)
    return BvpSignal(frame["bvp"].to_numpy(), fs, method_tag=Path(path).stem, t0=float(times[0]))


def frames_sidecar(path: PathLike) -> Path:
    path = Path(path)
    return path.with_suffix(".json")


def write_raw_frames(frames: FrameSequence, path: PathLike):
    path = Path(path)
    count, height, width, _ = frames.frames.shape
    planar = np.ascontiguousarray(
        np.transpose(np.clip(np.rint(frames.frames), 0, 255).astype(np.uint8), (0, 3, 1, 2))
    )
    sidecar = dict(
        height=height,
        width=width,
        channels=3,
        fps=frames.fs,
        count=count,
        roi=[frames.roi.x, frames.roi.y, frames.roi.w, frames.roi.h],
    )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        planar.tofile(path)
        with open(frames_sidecar(path), "w") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
    except OSError as e:
        raise IoFailure(path, e)


def read_raw_frames(path: PathLike, subject_id: str = "") -> FrameSequence:
    path = Path(path)
    sidecar_path = frames_sidecar(path)
    try:
        with open(sidecar_path) as f:
            sidecar = json.load(f)
    except FileNotFoundError as e:
        raise IoFailure(sidecar_path, e)
    except ValueError as e:
        raise MalformedFile(sidecar_path, f"invalid JSON sidecar: {e}")
    try:
        height = int(sidecar["height"])
        width = int(sidecar["width"])
        count = int(sidecar["count"])
        fps = float(sidecar["fps"])
        channels = int(sidecar.get("channels", 3))
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedFile(sidecar_path, f"sidecar field missing or invalid: {e}")
    if channels != 3:
        raise MalformedFile(sidecar_path, f"expected 3 channels, found {channels}")

    try:
        data = np.fromfile(path, dtype=np.uint8)
    except OSError as e:
        raise IoFailure(path, e)
    expected = count * channels * height * width
    if data.size != expected:
        raise MalformedFile(
            path,
            f"expected {expected} bytes for {count} frames of {width}x{height}, "
            f"found {data.size}",
            byte=min(data.size, expected),
        )
    frames = np.transpose(data.reshape(count, channels, height, width), (0, 2, 3, 1))
    roi = sidecar.get("roi")
    return FrameSequence(
        frames,
        fps,
        roi=Roi(*roi) if roi is not None else None,
        subject_id=subject_id,
    )
