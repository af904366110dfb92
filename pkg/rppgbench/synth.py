"""Synthetic skin-color recordings with a known pulse.

Every channel follows

    C(t) = baseline * (1 + drift(t)) * (1 + amplitude * pulse(t) * pulse_color)
           + motion(t) + noise(t)

where pulse(t) = sin(phi) + harmonic * sin(2 phi) runs at the instantaneous
heart rate, drift is a sinusoidal illumination flicker, motion is low-pass
Gaussian noise along a color direction and noise is i.i.d. Gaussian sensor
noise. Draws from the seeded generator always happen in the same order
(motion, then sensor noise) so output is reproducible bit for bit.
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import signal as sps

from rppgbench.common import DEFAULT_PBV_SIGNATURE, EPSILON
from rppgbench.dataset.records import (
    FRAMES_FILE,
    LABEL_FILE,
    META_FILE,
    TRACE_FILE,
    load_record,
)
from rppgbench.exceptions import InvalidSpec, IoFailure
from rppgbench.hr import HrSeries
from rppgbench.logging import logger
from rppgbench.preprocess import filter_padlen
from rppgbench.settings import Layout, SettingsBase
from rppgbench.signals import (
    CSV_FLOAT_FORMAT,
    BvpSignal,
    FrameSequence,
    RgbTrace,
    write_raw_frames,
    write_trace_csv,
)

MOTION_CUTOFF_HZ = 1.0
MIN_FRAME_SIZE = 4


@dataclass(frozen=True)
class SynthSpec(SettingsBase):
    """
    Parameters
    ----------

    hr_bpm:
        constant heart rate, or knots of a piecewise-linear ramp spread evenly
        over the duration
    illumination_drift:
        (relative amplitude, frequency in Hz) of the multiplicative flicker
    motion_noise:
        (relative amplitude, color direction) of additive motion artifacts
    sensor_noise_std:
        standard deviation of the Gaussian sensor noise in 8-bit units
    label_lag_s:
        delay of the PPG label behind the video
    hr_label_offset_bpm:
        bias added to the recorded HR label
    """

    duration_s: float = 20.0
    fs: float = 30.0
    hr_bpm: Union[float, Tuple[float, ...]] = 72.0
    pulse_amplitude: float = 0.005
    harmonic_amplitude: float = 0.3
    pulse_color: Tuple[float, float, float] = DEFAULT_PBV_SIGNATURE
    baseline_skin_rgb: Tuple[float, float, float] = (170.0, 120.0, 100.0)
    illumination_drift: Tuple[float, float] = (0.0, 0.2)
    motion_noise: Tuple[float, Tuple[float, float, float]] = (0.0, (1.0, 1.0, 1.0))
    sensor_noise_std: float = 0.0
    quantize_8bit: bool = False
    seed: int = 0
    subject_id: Optional[str] = None
    fs_label: Optional[float] = None
    label_lag_s: float = 0.0
    hr_label_offset_bpm: float = 0.0

    def _check(self):
        knots = self.hr_knots
        if self.duration_s <= 0:
            raise InvalidSpec("duration_s must be positive.")
        if np.any(knots <= 0):
            raise InvalidSpec("hr_bpm must be positive.")
        for name, fs in (("fs", self.fs), ("fs_label", self.label_fs)):
            if not fs > 2 * knots.max() / 60:
                raise InvalidSpec(
                    f"{name}={fs} Hz cannot represent a heart rate of {knots.max()} bpm."
                )
        if min(
            self.pulse_amplitude,
            self.harmonic_amplitude,
            self.illumination_drift[0],
            self.motion_noise[0],
            self.sensor_noise_std,
        ) < 0:
            raise InvalidSpec("Amplitudes and noise levels must be non-negative.")
        if len(self.baseline_skin_rgb) != 3 or not all(
            0 < v <= 255 for v in self.baseline_skin_rgb
        ):
            raise InvalidSpec("baseline_skin_rgb must be three values in (0, 255].")
        if len(self.pulse_color) != 3 or len(self.motion_noise[1]) != 3:
            raise InvalidSpec("Color directions must have three components.")
        if not np.any(self.motion_noise[1]):
            raise InvalidSpec("Motion color direction must be non-zero.")

    @property
    def hr_knots(self) -> np.ndarray:
        knots = np.atleast_1d(np.asarray(self.hr_bpm, dtype=float))
        return np.repeat(knots, 2) if knots.size == 1 else knots

    @property
    def label_fs(self) -> float:
        return self.fs_label if self.fs_label is not None else self.fs

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.fs))

    @property
    def record_id(self) -> str:
        return self.subject_id or f"synth-{self.seed:04d}"

    def hr_at(self, t: np.ndarray) -> np.ndarray:
        """Instantaneous heart rate in bpm, held constant outside the duration."""
        knots = self.hr_knots
        return np.interp(t, np.linspace(0, self.duration_s, knots.size), knots)

    def phase_at(self, t: np.ndarray) -> np.ndarray:
        """Pulse phase 2 pi * integral of HR/60, linear ramps extrapolated."""
        t = np.asarray(t, dtype=float)
        f = self.hr_knots / 60.0
        knot_t = np.linspace(0, self.duration_s, f.size)
        seg = (f[1:] + f[:-1]) / 2 * np.diff(knot_t)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        idx = np.clip(np.searchsorted(knot_t, t, side="right") - 1, 0, f.size - 2)
        dt = t - knot_t[idx]
        slope = (f[idx + 1] - f[idx]) / (knot_t[idx + 1] - knot_t[idx])
        return 2 * np.pi * (cum[idx] + f[idx] * dt + 0.5 * slope * dt**2)

    def pulse_at(self, t: np.ndarray) -> np.ndarray:
        phase = self.phase_at(t)
        return np.sin(phase) + self.harmonic_amplitude * np.sin(2 * phase)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class GroundTruth:
    bvp: BvpSignal
    hr: HrSeries


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _clean_trace(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.n_samples
    t = np.arange(n) / spec.fs
    base = np.asarray(spec.baseline_skin_rgb, dtype=float)
    amp, freq = spec.illumination_drift
    drift = amp * np.sin(2 * np.pi * freq * t)
    pulse = spec.pulse_at(t)
    color = np.asarray(spec.pulse_color, dtype=float)
    c = base * (1 + drift)[:, None] * (1 + spec.pulse_amplitude * pulse[:, None] * color)

    motion_amp, motion_dir = spec.motion_noise
    white = rng.standard_normal(n)
    sos = sps.butter(4, MOTION_CUTOFF_HZ, btype="lowpass", fs=spec.fs, output="sos")
    padlen = filter_padlen(sos)
    motion = sps.sosfiltfilt(sos, white, padlen=padlen) if n > padlen else white
    motion = motion / max(motion.std(), EPSILON)
    c = c + motion_amp * motion[:, None] * (base * _unit(motion_dir))
    return c


def _finish(values: np.ndarray, spec: SynthSpec) -> np.ndarray:
    values = np.clip(values, 0, 255)
    return np.rint(values) if spec.quantize_8bit else values


def _ground_truth(spec: SynthSpec) -> GroundTruth:
    t = np.arange(spec.n_samples) / spec.fs
    bvp = BvpSignal(spec.pulse_at(t), spec.fs, method_tag="GROUND_TRUTH")
    hr = HrSeries.from_samples(t, spec.hr_at(t), spec.fs, source_tag="GROUND_TRUTH")
    return GroundTruth(bvp, hr)


def generate_trace(spec: SynthSpec) -> Tuple[RgbTrace, BvpSignal, HrSeries]:
    rng = np.random.default_rng(spec.seed)
    c = _clean_trace(spec, rng)
    c = c + rng.normal(0.0, spec.sensor_noise_std, c.shape)
    truth = _ground_truth(spec)
    trace = RgbTrace(_finish(c, spec), spec.fs, subject_id=spec.record_id)
    return trace, truth.bvp, truth.hr


def generate_frames(
    spec: SynthSpec, h: int, w: int
) -> Tuple[FrameSequence, BvpSignal, HrSeries]:
    """Frames whose pixels share the trace dynamics plus i.i.d. sensor noise."""
    if h < MIN_FRAME_SIZE or w < MIN_FRAME_SIZE:
        raise InvalidSpec(f"Frames must be at least {MIN_FRAME_SIZE}x{MIN_FRAME_SIZE}.")
    rng = np.random.default_rng(spec.seed)
    c = _clean_trace(spec, rng)
    frames = np.broadcast_to(c[:, None, None, :], (len(c), h, w, 3))
    frames = frames + rng.normal(0.0, spec.sensor_noise_std, frames.shape)
    frames = _finish(frames, spec)
    if spec.quantize_8bit:
        frames = frames.astype(np.uint8)
    truth = _ground_truth(spec)
    return (
        FrameSequence(frames, spec.fs, subject_id=spec.record_id),
        truth.bvp,
        truth.hr,
    )


def label_frame(spec: SynthSpec):
    """Label table (t, ppg, hr) sampled at the label rate, lag and offset applied."""
    n = int(round(spec.duration_s * spec.label_fs))
    t = np.arange(n) / spec.label_fs
    source_t = t - spec.label_lag_s
    return pd.DataFrame(
        {
            "t": t,
            "ppg": spec.pulse_at(source_t),
            "hr": spec.hr_at(source_t) + spec.hr_label_offset_bpm,
        }
    )


def generate_record(
    spec: SynthSpec,
    root: Union[str, Path],
    layout: Layout = Layout.TRACE_CSV,
    frame_size: Tuple[int, int] = (16, 16),
):
    """Write a record directory under root and load it back."""
    path = Path(root) / spec.record_id
    if layout == Layout.RAW_FRAMES:
        frames, _, _ = generate_frames(spec, *frame_size)
        write_raw_frames(frames, path / FRAMES_FILE)
    else:
        trace, _, _ = generate_trace(spec)
        write_trace_csv(trace, path / TRACE_FILE)
    meta = dict(
        subject_id=spec.record_id,
        fs_video=spec.fs,
        fs_label=spec.label_fs,
        notes="synthetic",
        layout=layout.name,
        synth=spec.to_dict(),
    )
    try:
        label_frame(spec).to_csv(
            path / LABEL_FILE,
            index=False,
            float_format=CSV_FLOAT_FORMAT,
            lineterminator="\n",
        )
        with open(path / META_FILE, "w") as f:
            json.dump(meta, f, indent=2, sort_keys=True)
    except OSError as e:
        raise IoFailure(path, e)
    return load_record(path, layout)


def suite_specs(
    n: int,
    hr_range: Tuple[float, float] = (72.0, 120.0),
    first_seed: int = 0,
    **overrides,
) -> List[SynthSpec]:
    """n specs with distinct seeds and heart rates spread evenly over hr_range."""
    hrs = np.linspace(hr_range[0], hr_range[1], n) if n > 1 else [hr_range[0]]
    return [
        SynthSpec(hr_bpm=float(hr), seed=first_seed + i, **overrides)
        for i, hr in enumerate(hrs)
    ]


def generate_dataset(
    specs: Sequence[SynthSpec],
    root: Union[str, Path],
    layout: Layout = Layout.TRACE_CSV,
    frame_size: Tuple[int, int] = (16, 16),
):
    records = []
    for i, spec in enumerate(specs, 1):
        records.append(generate_record(spec, root, layout, frame_size))
        logger.progress(done=i, total=len(specs))
    return records
