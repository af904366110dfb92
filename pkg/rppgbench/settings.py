from abc import ABC
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Tuple

import numpy as np

from rppgbench.common import (
    DEFAULT_BAND,
    DEFAULT_DETREND_LAMBDA,
    DEFAULT_EVAL_TIME_LENGTHS,
    DEFAULT_PBV_SIGNATURE,
    DEFAULT_SSR_STRIDE,
    DEFAULT_WINDOW_SECONDS,
)
from rppgbench.exceptions import ConfigInvalid, InvalidBand, OutOfScopeConfig


class SettingsEnumBase(Enum):
    """Enum whose members are parsed from and rendered to CLI/config choices."""

    @classmethod
    def choices(cls):
        return sorted(item.item_to_choice() for item in cls)

    @classmethod
    def _normalize(cls, choice: str) -> str:
        return choice.replace("-", "").replace("_", "").upper()

    @classmethod
    def parse_choice(cls, choice, field_name: Optional[str] = None):
        if isinstance(choice, cls):
            return choice
        if isinstance(choice, str):
            key = cls._normalize(choice)
            for item in cls:
                if cls._normalize(item.name) == key:
                    return item
        raise ConfigInvalid(
            f"invalid choice {choice!r}, choose from {', '.join(cls.choices())}",
            field=field_name,
        )

    @classmethod
    def parse_choices_list(cls, choices, field_name: Optional[str] = None):
        if isinstance(choices, str):
            choices = [choices]
        return tuple(cls.parse_choice(choice, field_name) for choice in choices)

    def item_to_choice(self):
        return self.name

    def __str__(self):
        return self.item_to_choice()


class MethodId(SettingsEnumBase):
    GREEN = 0
    ICA = 1
    PCA = 2
    CHROM = 3
    PBV = 4
    POS = 5
    SSR = 6
    LGI = 7


class CalType(SettingsEnumBase):
    FFT = 0
    PEAK = 1


class HrMethod(SettingsEnumBase):
    FFT = 0
    PEAK = 1
    LABEL = 2


class ComponentSelection(SettingsEnumBase):
    FIXED_SECOND = 0
    MAX_SPECTRAL_PEAK = 1


class ChannelSpace(SettingsEnumBase):
    RGB = 0
    YUV = 1


class MetricName(SettingsEnumBase):
    MAE = 0
    RMSE = 1
    MSE = 2
    MAPE = 3
    PEARSON = 4
    SNR = 5
    BLAND_ALTMAN = 6

    def item_to_choice(self):
        return {
            MetricName.PEARSON: "Pearson",
            MetricName.BLAND_ALTMAN: "BlandAltman",
        }.get(self, self.name)


class SplitKind(SettingsEnumBase):
    ALL = 0
    SUBJECT_HOLDOUT = 1


class TruthSource(SettingsEnumBase):
    PPG_LABEL = 0
    HR_LABEL = 1


class ReportFormat(SettingsEnumBase):
    JSON = 0
    CSV = 1
    SVG = 2


class PreprocessKind(SettingsEnumBase):
    RAW = 0
    DIFF_NORM = 1
    ZSCORE = 2
    STMAP = 3


class Layout(SettingsEnumBase):
    TRACE_CSV = 0
    RAW_FRAMES = 1


class SettingsBase(ABC):
    def __post_init__(self):
        self._check()

    def _check(self):
        # by default, nothing to check
        # override this method in subclasses if needed
        pass


def check_band(band: Tuple[float, float], fs: Optional[float] = None):
    lo, hi = band
    if not (0 < lo < hi):
        raise InvalidBand(f"Band ({lo}, {hi}) must satisfy 0 < lo < hi.")
    if fs is not None and not hi < fs / 2:
        raise InvalidBand(
            f"Band upper edge {hi} Hz must lie below Nyquist ({fs / 2} Hz)."
        )


@dataclass(frozen=True)
class MethodConfig(SettingsBase):
    """
    Parameters
    ----------

    window_seconds:
        sliding window length used by CHROM and POS
    component_selection:
        how ICA, PCA and LGI pick their output component; None selects the
        per-method default
    pbv_signature:
        blood-volume color signature used by PBV (normalized to unit norm)
    ssr_stride_frames:
        temporal stride of the SSR rotation estimate
    band:
        passband in Hz applied by every method
    detrend_lambda:
        smoothness-prior regularization used by GREEN, ICA and PCA
    """

    window_seconds: float = DEFAULT_WINDOW_SECONDS
    component_selection: Optional[ComponentSelection] = None
    pbv_signature: Tuple[float, float, float] = DEFAULT_PBV_SIGNATURE
    ssr_stride_frames: int = DEFAULT_SSR_STRIDE
    band: Tuple[float, float] = DEFAULT_BAND
    detrend_lambda: float = DEFAULT_DETREND_LAMBDA

    def _check(self):
        if self.window_seconds <= 0:
            raise ConfigInvalid("must be positive", field="window_seconds")
        if self.ssr_stride_frames < 1:
            raise ConfigInvalid("must be at least 1", field="ssr_stride_frames")
        if len(self.pbv_signature) != 3 or not np.any(self.pbv_signature):
            raise ConfigInvalid(
                "must be a non-zero RGB triple", field="pbv_signature"
            )
        try:
            check_band(self.band)
        except InvalidBand as e:
            raise ConfigInvalid(str(e), field="band")

    @property
    def unit_pbv_signature(self) -> np.ndarray:
        sig = np.asarray(self.pbv_signature, dtype=float)
        return sig / np.linalg.norm(sig)

    def selection_for(self, default: ComponentSelection) -> ComponentSelection:
        return self.component_selection or default

    @classmethod
    def from_config(cls, config: Mapping[str, Any], band=DEFAULT_BAND):
        kwargs = dict(band=tuple(band))
        if "window_seconds" in config:
            kwargs["window_seconds"] = float(config["window_seconds"])
        if config.get("component_selection") is not None:
            kwargs["component_selection"] = ComponentSelection.parse_choice(
                config["component_selection"], "method_config.component_selection"
            )
        if "pbv_signature" in config:
            kwargs["pbv_signature"] = tuple(float(v) for v in config["pbv_signature"])
        if "ssr_stride_frames" in config:
            kwargs["ssr_stride_frames"] = int(config["ssr_stride_frames"])
        if "detrend_lambda" in config:
            kwargs["detrend_lambda"] = float(config["detrend_lambda"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SplitSettings(SettingsBase):
    kind: SplitKind = SplitKind.ALL
    fraction: float = 0.2
    seed: int = 0

    def _check(self):
        if not 0 < self.fraction < 1:
            raise ConfigInvalid("must lie in (0, 1)", field="split.fraction")


# Keys that only make sense for neural-network training.
OUT_OF_SCOPE_KEYS = {
    "": ("wandb", "model_save_path", "meta", "model", "train"),
    "fit": ("train", "model", "meta", "wandb", "model_save_path"),
}


@dataclass(frozen=True)
class BenchConfig(SettingsBase):
    dataset_path: Path
    methods: Sequence[MethodId] = tuple(
        m for m in MethodId if m is not MethodId.SSR
    )
    cal_type: CalType = CalType.FFT
    metrics: Sequence[MetricName] = (
        MetricName.MAE,
        MetricName.RMSE,
        MetricName.MAPE,
        MetricName.PEARSON,
    )
    eval_time_lengths: Sequence[float] = DEFAULT_EVAL_TIME_LENGTHS
    overlap_s: float = 0.0
    split: SplitSettings = field(default_factory=SplitSettings)
    truth: TruthSource = TruthSource.PPG_LABEL
    output_dir: Path = Path("results")
    formats: Sequence[ReportFormat] = (ReportFormat.JSON, ReportFormat.CSV)
    method_config: MethodConfig = field(default_factory=MethodConfig)
    layout: Layout = Layout.TRACE_CSV
    expected_fs: Optional[float] = None
    workers: int = 1
    source: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def _check(self):
        if not self.methods:
            raise ConfigInvalid("at least one method is required", field="methods")
        if not self.metrics:
            raise ConfigInvalid(
                "at least one metric is required", field="fit.test.metric"
            )
        lengths = list(self.eval_time_lengths)
        if not lengths or any(length <= 0 for length in lengths):
            raise ConfigInvalid(
                "window lengths must be positive", field="fit.test.eval_time_length"
            )
        if lengths != sorted(set(lengths)):
            raise ConfigInvalid(
                "window lengths must be strictly ascending",
                field="fit.test.eval_time_length",
            )
        if not 0 <= self.overlap_s < min(lengths):
            raise ConfigInvalid(
                "must be non-negative and shorter than the shortest window",
                field="fit.overlap_interval",
            )
        if self.workers < 1:
            raise ConfigInvalid("must be at least 1", field="workers")

    @property
    def band(self):
        return self.method_config.band

    def with_overrides(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    @classmethod
    def from_config(
        cls, config: Mapping[str, Any], base_dir: Optional[Path] = None
    ) -> "BenchConfig":
        """Build settings from a validated config mapping.

        Relative paths are resolved against base_dir.
        """
        check_out_of_scope(config)
        base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

        def resolve(path):
            path = Path(path)
            return path if path.is_absolute() else base_dir / path

        fit = config.get("fit", {})
        test = fit.get("test", {})
        if "dataset" not in test:
            raise ConfigInvalid("missing dataset path", field="fit.test.dataset")
        band = tuple(config.get("band", DEFAULT_BAND))
        if len(band) != 2:
            raise ConfigInvalid("must be a pair [lo, hi]", field="band")
        split = config.get("split", {})
        return cls(
            dataset_path=resolve(test["dataset"]),
            methods=MethodId.parse_choices_list(
                config.get("methods", [m.name for m in cls.methods]), "methods"
            ),
            cal_type=CalType.parse_choice(
                test.get("cal_type", "FFT"), "fit.test.cal_type"
            ),
            metrics=MetricName.parse_choices_list(
                test.get("metric", [m.item_to_choice() for m in cls.metrics]),
                "fit.test.metric",
            ),
            eval_time_lengths=tuple(
                float(v)
                for v in np.atleast_1d(
                    test.get("eval_time_length", DEFAULT_EVAL_TIME_LENGTHS)
                )
            ),
            overlap_s=float(fit.get("overlap_interval", 0.0)),
            split=SplitSettings(
                kind=SplitKind.parse_choice(split.get("kind", "ALL"), "split.kind"),
                fraction=float(split.get("fraction", 0.2)),
                seed=int(split.get("seed", 0)),
            ),
            truth=TruthSource.parse_choice(config.get("truth", "PPG_LABEL"), "truth"),
            output_dir=resolve(config.get("output_dir", "results")),
            formats=ReportFormat.parse_choices_list(
                config.get("formats", ["JSON", "CSV"]), "formats"
            ),
            method_config=MethodConfig.from_config(
                config.get("method_config", {}), band=band
            ),
            layout=Layout.parse_choice(test.get("layout", "TRACE_CSV"), "fit.test.layout"),
            expected_fs=float(test["fs"]) if test.get("fs") is not None else None,
            workers=int(config.get("workers", 1)),
            source=dict(config),
        )


def check_out_of_scope(config: Mapping[str, Any]):
    for section, keys in OUT_OF_SCOPE_KEYS.items():
        scope = config.get(section, {}) if section else config
        if not isinstance(scope, Mapping):
            continue
        for key in keys:
            if key in scope:
                raise OutOfScopeConfig(f"{section}.{key}" if section else key)
