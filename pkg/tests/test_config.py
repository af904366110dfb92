from pathlib import Path

import pytest

from .common import dpath
from rppgbench.common import DEFAULT_EVAL_TIME_LENGTHS
from rppgbench.common.configfile import load_configfile, validate
from rppgbench.exceptions import (
    ConfigFileNotFound,
    ConfigInvalid,
    InvalidBand,
    OutOfScopeConfig,
)
from rppgbench.settings import (
    BenchConfig,
    CalType,
    ComponentSelection,
    Layout,
    MethodConfig,
    MethodId,
    MetricName,
    ReportFormat,
    SplitKind,
    TruthSource,
    check_band,
    check_out_of_scope,
)


def load(name):
    config = load_configfile(dpath(f"data/{name}"))
    check_out_of_scope(config)
    validate(config)
    return BenchConfig.from_config(config, base_dir=Path(dpath("data")))


def test_full_yaml_config():
    config = load("bench.yaml")
    assert config.dataset_path == Path(dpath("data/synthetic"))
    assert config.output_dir == Path(dpath("data/results"))
    assert config.methods == (MethodId.GREEN, MethodId.CHROM, MethodId.POS)
    assert config.metrics == (
        MetricName.MAE,
        MetricName.RMSE,
        MetricName.MAPE,
        MetricName.PEARSON,
    )
    assert config.eval_time_lengths == (5.0, 10.0)
    assert config.cal_type == CalType.FFT
    assert config.expected_fs == 30.0
    assert config.band == (0.66, 3.0)
    assert config.method_config.component_selection == ComponentSelection.MAX_SPECTRAL_PEAK
    assert config.formats == (ReportFormat.JSON, ReportFormat.CSV)
    assert config.source["methods"] == ["GREEN", "CHROM", "POS"]


def test_json_config_with_scalars():
    config = load("bench.json")
    assert config.methods == (MethodId.POS,)
    assert config.metrics == (MetricName.MAE,)
    assert config.eval_time_lengths == (10.0,)


def test_minimal_config_defaults():
    config = load("minimal.yaml")
    assert MethodId.SSR not in config.methods
    assert len(config.methods) == 7
    assert config.eval_time_lengths == DEFAULT_EVAL_TIME_LENGTHS
    assert config.truth == TruthSource.PPG_LABEL
    assert config.split.kind == SplitKind.ALL
    assert config.layout == Layout.TRACE_CSV
    assert config.expected_fs is None
    assert config.overlap_s == 0.0
    assert config.workers == 1
    assert config.method_config == MethodConfig()


def test_validate_fills_defaults():
    config = load_configfile(dpath("data/minimal.yaml"))
    validate(config)
    assert config["truth"] == "PPG_LABEL"
    assert config["output_dir"] == "results"
    assert config["fit"]["overlap_interval"] == 0
    assert config["fit"]["test"]["cal_type"] == "FFT"


def test_yte_config():
    config = load("yte.yaml")
    assert config.eval_time_lengths == (5.0, 10.0)
    assert "__use_yte__" not in config.source


def test_out_of_scope_keys():
    config = load_configfile(dpath("data/out_of_scope.yaml"))
    with pytest.raises(OutOfScopeConfig):
        check_out_of_scope(config)
    with pytest.raises(OutOfScopeConfig):
        BenchConfig.from_config(config)
    with pytest.raises(OutOfScopeConfig):
        check_out_of_scope({"fit": {"train": {}}})


def test_unknown_key_is_rejected():
    config = load_configfile(dpath("data/unknown_key.yaml"))
    with pytest.raises(ConfigInvalid) as e:
        validate(config)
    assert e.value.exit_code == 1


def test_unknown_method():
    with pytest.raises(ConfigInvalid) as e:
        load("bad_method.yaml")
    assert "DEEPPHYS" in str(e.value)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigFileNotFound):
        load_configfile(tmp_path / "missing.yaml")
    with pytest.raises(ConfigInvalid):
        load_configfile(dpath("data/not_a_mapping.yaml"))
    broken = tmp_path / "broken.yaml"
    broken.write_text("fit:\n  test: [\n")
    with pytest.raises(ConfigInvalid):
        load_configfile(broken)


def test_schema_type_errors():
    with pytest.raises(ConfigInvalid):
        validate({"fit": {"test": {"dataset": "d", "eval_time_length": -5}}})
    with pytest.raises(ConfigInvalid):
        validate({"fit": {"test": {}}})
    with pytest.raises(ConfigInvalid):
        validate({"fit": {"test": {"dataset": "d"}}, "workers": 0})


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(methods=()),
        dict(metrics=()),
        dict(eval_time_lengths=(10.0, 5.0)),
        dict(eval_time_lengths=(5.0, 5.0)),
        dict(eval_time_lengths=(0.0,)),
        dict(eval_time_lengths=(5.0,), overlap_s=5.0),
        dict(workers=0),
    ],
)
def test_bench_config_checks(kwargs):
    with pytest.raises(ConfigInvalid):
        BenchConfig(dataset_path=Path("d"), **kwargs)


def test_band_in_config():
    config = {"fit": {"test": {"dataset": "d"}}, "band": [3.0, 0.5]}
    with pytest.raises(ConfigInvalid) as e:
        BenchConfig.from_config(config)
    assert e.value.field == "band"


def test_check_band():
    check_band((0.66, 3.0), fs=30.0)
    with pytest.raises(InvalidBand):
        check_band((3.0, 0.66))
    with pytest.raises(InvalidBand):
        check_band((0.66, 3.0), fs=5.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(window_seconds=0.0),
        dict(ssr_stride_frames=0),
        dict(pbv_signature=(0.0, 0.0, 0.0)),
        dict(band=(0.0, 3.0)),
    ],
)
def test_method_config_checks(kwargs):
    with pytest.raises(ConfigInvalid):
        MethodConfig(**kwargs)


def test_method_config_from_config():
    cfg = MethodConfig.from_config(
        {"window_seconds": 2, "pbv_signature": [1, 2, 2], "ssr_stride_frames": 10}
    )
    assert cfg.window_seconds == 2.0
    assert cfg.ssr_stride_frames == 10
    assert list(cfg.unit_pbv_signature) == pytest.approx([1 / 3, 2 / 3, 2 / 3])
    assert cfg.selection_for(ComponentSelection.FIXED_SECOND) == ComponentSelection.FIXED_SECOND


@pytest.mark.parametrize(
    "choice, expected",
    [
        ("pos", MethodId.POS),
        ("Pearson", MetricName.PEARSON),
        ("bland-altman", MetricName.BLAND_ALTMAN),
        ("subject_holdout", SplitKind.SUBJECT_HOLDOUT),
        (MethodId.ICA, MethodId.ICA),
    ],
)
def test_parse_choice(choice, expected):
    assert type(expected).parse_choice(choice) == expected


def test_parse_choice_errors():
    with pytest.raises(ConfigInvalid) as e:
        MethodId.parse_choice("PhysNet", "methods")
    assert e.value.field == "methods"
    with pytest.raises(ConfigInvalid):
        MetricName.parse_choice(3)
    assert str(MetricName.BLAND_ALTMAN) == "BlandAltman"
    assert "BlandAltman" in MetricName.choices()


def test_with_overrides_ignores_none():
    config = BenchConfig(dataset_path=Path("d"))
    updated = config.with_overrides(workers=3, truth=None)
    assert updated.workers == 3
    assert updated.truth == config.truth
