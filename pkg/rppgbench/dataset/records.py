import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import immutables
import numpy as np

from rppgbench.common import CLOCK_TOLERANCE_S
from rppgbench.exceptions import (
    ClockMismatch,
    EmptyDataset,
    IoFailure,
    MalformedFile,
    MissingLabel,
    RppgError,
)
from rppgbench.hr import HrSeries
from rppgbench.logging import logger
from rppgbench.preprocess import as_trace
from rppgbench.settings import Layout
from rppgbench.signals import (
    BvpSignal,
    FrameSequence,
    RgbTrace,
    read_numeric_csv,
    read_raw_frames,
    read_trace_csv,
)

TRACE_FILE = "trace.csv"
FRAMES_FILE = "frames.raw"
LABEL_FILE = "label.csv"
META_FILE = "meta.json"
LABEL_COLUMNS = ("t", "ppg")


@dataclass(frozen=True)
class DatasetRecord:
    subject_id: str
    input: Union[RgbTrace, FrameSequence]
    ppg_label: Optional[BvpSignal] = None
    hr_label: Optional[HrSeries] = None
    meta: immutables.Map = field(default_factory=immutables.Map)
    path: Optional[Path] = None

    @property
    def fs(self) -> float:
        return self.input.fs

    @property
    def trace(self) -> RgbTrace:
        return as_trace(self.input)

    @property
    def has_labels(self) -> bool:
        return self.ppg_label is not None or self.hr_label is not None


@dataclass(frozen=True)
class LoadFailure:
    path: Path
    error: RppgError

    @property
    def subject_id(self):
        return self.path.name


@dataclass(frozen=True)
class DatasetLoadResult:
    records: Tuple[DatasetRecord, ...]
    failures: Tuple[LoadFailure, ...] = ()


def _read_meta(path: Path) -> dict:
    meta_path = path / META_FILE
    if not meta_path.exists():
        return {}
    try:
        with open(meta_path) as f:
            meta = json.load(f)
    except ValueError as e:
        raise MalformedFile(meta_path, f"invalid JSON: {e}")
    except OSError as e:
        raise IoFailure(meta_path, e)
    if not isinstance(meta, dict):
        raise MalformedFile(meta_path, "metadata must be a JSON object")
    return meta


def _detect_layout(path: Path, meta: dict) -> Layout:
    if "layout" in meta:
        return Layout.parse_choice(meta["layout"], "layout")
    if (path / FRAMES_FILE).exists():
        return Layout.RAW_FRAMES
    return Layout.TRACE_CSV


def resample_to_clock(
    video_times: np.ndarray, label_times: np.ndarray, values: np.ndarray, path=None
) -> np.ndarray:
    """Linearly interpolate label values onto the video timestamps."""
    start_gap = abs(label_times[0] - video_times[0])
    stop_gap = abs(label_times[-1] - video_times[-1])
    if max(start_gap, stop_gap) > CLOCK_TOLERANCE_S:
        raise ClockMismatch(
            f"Label clock [{label_times[0]:.3f}, {label_times[-1]:.3f}] s does not match "
            f"video clock [{video_times[0]:.3f}, {video_times[-1]:.3f}] s "
            f"within {CLOCK_TOLERANCE_S} s.",
            position=str(path) if path else None,
        )
    return np.interp(video_times, label_times, values)


def _read_labels(path: Path, video_times: np.ndarray, fs: float):
    label_path = path / LABEL_FILE
    if not label_path.exists():
        raise MissingLabel(f"Record {path} has no {LABEL_FILE}.", position=str(path))
    frame = read_numeric_csv(label_path, LABEL_COLUMNS, optional=("hr",))
    times = frame["t"].to_numpy()
    t0 = float(video_times[0])
    ppg = resample_to_clock(video_times, times, frame["ppg"].to_numpy(), label_path)
    ppg_label = BvpSignal(ppg, fs, method_tag="PPG_LABEL", t0=t0)
    hr_label = None
    if "hr" in frame:
        hr = resample_to_clock(video_times, times, frame["hr"].to_numpy(), label_path)
        hr_label = HrSeries.from_samples(video_times, hr, fs, source_tag="HR_LABEL")
    return ppg_label, hr_label


def load_record(
    path: Union[str, Path], layout: Optional[Layout] = None
) -> DatasetRecord:
    """Load a record directory holding the input, labels and metadata.

    Labels are linearly interpolated onto the video clock.
    """
    path = Path(path)
    if not path.is_dir():
        raise IoFailure(path, FileNotFoundError("record directory not found"))
    meta = _read_meta(path)
    layout = layout or _detect_layout(path, meta)
    subject_id = str(meta.get("subject_id", path.name))
    fs_video = meta.get("fs_video")

    if layout == Layout.RAW_FRAMES:
        source = read_raw_frames(path / FRAMES_FILE, subject_id=subject_id)
    else:
        source = read_trace_csv(path / TRACE_FILE, fs=fs_video, subject_id=subject_id)
    video_times = source.t0 + np.arange(len(source)) / source.fs
    ppg_label, hr_label = _read_labels(path, video_times, source.fs)
    return DatasetRecord(
        subject_id,
        source,
        ppg_label=ppg_label,
        hr_label=hr_label,
        meta=immutables.Map(meta),
        path=path,
    )


def record_dirs(root: Path) -> List[Path]:
    return sorted(
        p
        for p in root.iterdir()
        if p.is_dir()
        and any((p / name).exists() for name in (META_FILE, TRACE_FILE, FRAMES_FILE))
    )


def load_dataset(
    root: Union[str, Path], layout: Optional[Layout] = None, workers: int = 1
) -> DatasetLoadResult:
    """Load every record directory below root.

    Records that fail to load are collected as failures; the batch goes on.
    """
    root = Path(root)
    if not root.is_dir():
        raise IoFailure(root, FileNotFoundError("dataset directory not found"))
    dirs = record_dirs(root)
    if not dirs:
        raise EmptyDataset(f"No records found in {root}.")

    def load(path):
        try:
            return load_record(path, layout)
        except RppgError as e:
            logger.record_error(subject_id=path.name, method="load", reason=str(e))
            return LoadFailure(path, e)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(load, dirs))
    records = sorted(
        (r for r in results if isinstance(r, DatasetRecord)), key=lambda r: r.subject_id
    )
    failures = tuple(r for r in results if isinstance(r, LoadFailure))
    logger.info(f"Loaded {len(records)} records from {root} ({len(failures)} failed).")
    return DatasetLoadResult(tuple(records), failures)


@dataclass(frozen=True)
class SubjectSplit:
    held_out: Tuple[DatasetRecord, ...]
    rest: Tuple[DatasetRecord, ...]

    @property
    def held_out_subjects(self):
        return sorted({r.subject_id for r in self.held_out})

    @property
    def rest_subjects(self):
        return sorted({r.subject_id for r in self.rest})


def split_by_subject(
    records: Sequence[DatasetRecord], fraction: float, seed: int
) -> SubjectSplit:
    """Partition records so no subject appears on both sides.

    At least one subject is held out; with two or more subjects at least
    one remains.
    """
    subjects = sorted({r.subject_id for r in records})
    if not subjects:
        raise EmptyDataset("Cannot split an empty record list.")
    n_held = int(round(fraction * len(subjects)))
    n_held = min(max(n_held, 1), max(len(subjects) - 1, 1))
    order = np.random.default_rng(seed).permutation(len(subjects))
    held = {subjects[i] for i in order[:n_held]}
    return SubjectSplit(
        tuple(r for r in records if r.subject_id in held),
        tuple(r for r in records if r.subject_id not in held),
    )
