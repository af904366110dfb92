import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from .common import sine
from rppgbench.common import UNRELIABLE
from rppgbench.dataset import (
    AnalyzerReport,
    DatasetRecord,
    LoadFailure,
    analyze_dataset,
    check_alignment,
    classify_fitzpatrick,
    format_catalog,
    load_catalog,
    load_dataset,
    load_record,
    split_by_subject,
)
from rppgbench.dataset.analyzer import (
    analyze_record,
    classify_lab,
    cross_correlation_lag,
    fitzpatrick_type,
    ita,
    skin_pixels,
    srgb_to_lab,
)
from rppgbench.dataset.catalog import DatasetCatalogEntry
from rppgbench.dataset.records import (
    LABEL_FILE,
    META_FILE,
    TRACE_FILE,
    resample_to_clock,
)
from rppgbench.exceptions import (
    ClockMismatch,
    DegenerateColor,
    EmptyDataset,
    IoFailure,
    MalformedFile,
    MissingLabel,
)
from rppgbench.settings import Layout
from rppgbench.signals import BvpSignal, FrameSequence, RgbTrace
from rppgbench.synth import SynthSpec, generate_dataset, generate_record, suite_specs

FS = 30.0
# heart rate ramp, so the pulse is not periodic and the lag is unambiguous
RAMP = (60.0, 100.0)


def ramp_spec(seed, **kwargs):
    return SynthSpec(
        hr_bpm=RAMP, duration_s=30.0, sensor_noise_std=0.1, seed=seed, **kwargs
    )


@pytest.fixture(scope="module")
def audit_records(tmp_path_factory):
    root = tmp_path_factory.mktemp("audit")
    return {
        "clean": generate_record(ramp_spec(1), root),
        "lagged": generate_record(ramp_spec(2, label_lag_s=0.5), root),
        "offset": generate_record(ramp_spec(3, hr_label_offset_bpm=30.0), root),
    }


def small_record(subject_id):
    return DatasetRecord(subject_id, RgbTrace(np.full((4, 3), 100.0), FS))


# loader


def test_load_record_missing_dir(tmp_path):
    with pytest.raises(IoFailure):
        load_record(tmp_path / "nope")


def test_load_record_missing_label(tmp_path):
    generate_record(SynthSpec(duration_s=4.0), tmp_path)
    path = tmp_path / "synth-0000"
    (path / LABEL_FILE).unlink()
    with pytest.raises(MissingLabel):
        load_record(path)


def test_load_record_clock_mismatch(tmp_path):
    generate_record(SynthSpec(duration_s=4.0), tmp_path)
    path = tmp_path / "synth-0000"
    label = pd.read_csv(path / LABEL_FILE)
    label["t"] += 2.0
    label.to_csv(path / LABEL_FILE, index=False)
    with pytest.raises(ClockMismatch):
        load_record(path)


def test_load_record_without_hr_column(tmp_path):
    generate_record(SynthSpec(duration_s=4.0), tmp_path)
    path = tmp_path / "synth-0000"
    label = pd.read_csv(path / LABEL_FILE)
    label[["t", "ppg"]].to_csv(path / LABEL_FILE, index=False)
    record = load_record(path)
    assert record.hr_label is None
    assert record.ppg_label is not None
    assert record.has_labels


def test_load_record_malformed_meta(tmp_path):
    generate_record(SynthSpec(duration_s=4.0), tmp_path)
    path = tmp_path / "synth-0000"
    (path / META_FILE).write_text("{")
    with pytest.raises(MalformedFile):
        load_record(path)


def test_load_record_detects_frames(tmp_path):
    spec = SynthSpec(duration_s=4.0, sensor_noise_std=1.0)
    generate_record(spec, tmp_path, Layout.RAW_FRAMES, frame_size=(4, 4))
    path = tmp_path / "synth-0000"
    meta = json.loads((path / META_FILE).read_text())
    del meta["layout"]
    (path / META_FILE).write_text(json.dumps(meta))
    record = load_record(path)
    assert isinstance(record.input, FrameSequence)
    assert isinstance(record.trace, RgbTrace)
    assert len(record.trace) == 120


def test_load_record_without_meta(tmp_path):
    generate_record(SynthSpec(duration_s=4.0), tmp_path)
    path = tmp_path / "synth-0000"
    (path / META_FILE).unlink()
    record = load_record(path)
    assert record.subject_id == "synth-0000"
    assert record.fs == pytest.approx(FS)
    assert len(record.meta) == 0


def test_resample_to_clock():
    video = np.arange(300) / FS
    label = np.arange(600) / 60.0
    assert np.allclose(resample_to_clock(video, label, 2 * label), 2 * video)
    with pytest.raises(ClockMismatch):
        resample_to_clock(video, label + 1.5, label)


def test_load_dataset_collects_failures(tmp_path):
    for seed in range(3):
        generate_record(SynthSpec(duration_s=4.0, seed=seed), tmp_path)
    (tmp_path / "synth-0001" / TRACE_FILE).write_text("t,r,g,b\n0,1,2\n")
    (tmp_path / "not-a-record").mkdir()
    result = load_dataset(tmp_path)
    assert [r.subject_id for r in result.records] == ["synth-0000", "synth-0002"]
    assert [f.subject_id for f in result.failures] == ["synth-0001"]
    assert isinstance(result.failures[0].error, MalformedFile)
    parallel = load_dataset(tmp_path, workers=3)
    assert [r.subject_id for r in parallel.records] == ["synth-0000", "synth-0002"]


def test_load_dataset_errors(tmp_path):
    with pytest.raises(IoFailure):
        load_dataset(tmp_path / "missing")
    with pytest.raises(EmptyDataset):
        load_dataset(tmp_path)


# split


def test_split_by_subject():
    records = [small_record(f"s{i:02d}") for i in range(10)] + [small_record("s03")]
    split = split_by_subject(records, 0.2, seed=1)
    assert len(split.held_out_subjects) == 2
    assert set(split.held_out_subjects).isdisjoint(split.rest_subjects)
    assert len(split.held_out) + len(split.rest) == len(records)
    again = split_by_subject(records, 0.2, seed=1)
    assert again.held_out_subjects == split.held_out_subjects


def test_split_edge_cases():
    single = split_by_subject([small_record("a")], 0.2, seed=0)
    assert single.held_out_subjects == ["a"] and single.rest == ()
    pair = split_by_subject([small_record("a"), small_record("b")], 0.9, seed=0)
    assert len(pair.held_out) == 1 and len(pair.rest) == 1
    with pytest.raises(EmptyDataset):
        split_by_subject([], 0.2, seed=0)


# catalog


def test_catalog():
    entries = load_catalog()
    assert len(entries) == 27
    assert [e.index for e in entries] == list(range(1, 28))
    ubfc = next(e for e in entries if e.name == "UBFC-rPPG")
    assert ubfc.year == 2019
    assert ubfc.n_subjects == 42
    assert ubfc.labels == frozenset({"PPG", "HR"})
    bp4d = next(e for e in entries if e.name == "BP4D+")
    assert bp4d.video_kinds == frozenset({"RGB", "NIR"})


def test_format_catalog():
    table = format_catalog()
    assert "MMPD" in table and "UBFC-Phys" in table
    row = DatasetCatalogEntry(1, 2020, "X").to_row()
    assert row["subjects"] == "-" and row["labels"] == "-"


def test_malformed_catalog(tmp_path):
    path = tmp_path / "catalog.jsonl"
    path.write_text(
        '{"index": 1, "year": 2020, "name": "A"}\n'
        '{"index": 2, "year": 2021, "name": "B", "labels": ["PPG", "SMELL"]}\n'
    )
    with pytest.raises(MalformedFile) as e:
        load_catalog(path)
    assert e.value.line == 2


# alignment


def test_cross_correlation_lag():
    rng = np.random.default_rng(0)
    x = rng.normal(size=600)
    trailing = np.concatenate([np.zeros(6), x[:-6]])
    lag, corr = cross_correlation_lag(x, trailing, FS, 3.0)
    assert lag == pytest.approx(0.2)
    assert corr > 0.99
    leading = np.concatenate([x[9:], np.zeros(9)])
    lag, _ = cross_correlation_lag(x, leading, FS, 3.0)
    assert lag == pytest.approx(-0.3)


def test_alignment_detects_label_lag(audit_records):
    report = check_alignment(audit_records["lagged"])
    assert report.lag_s == pytest.approx(0.5, abs=2 / FS)
    assert report.reliable
    clean = check_alignment(audit_records["clean"])
    assert abs(clean.lag_s) <= 1 / FS
    assert clean.status == "OK"


def test_alignment_unrelated_label(audit_records):
    record = audit_records["clean"]
    # between the swept fundamental and its swept harmonic
    label = BvpSignal(sine(1.83, 30.0), FS)
    report = check_alignment(replace(record, ppg_label=label))
    assert not report.reliable
    assert report.status == UNRELIABLE


def test_alignment_missing_label(audit_records):
    with pytest.raises(MissingLabel):
        check_alignment(replace(audit_records["clean"], ppg_label=None))


# skin tone


def test_srgb_to_lab():
    assert srgb_to_lab((255, 255, 255)) == pytest.approx((100.0, 0.0, 0.0), abs=0.01)
    assert srgb_to_lab((0, 0, 0)) == pytest.approx((0.0, 0.0, 0.0), abs=1e-9)


def test_ita():
    assert ita(70.0, 20.0) == pytest.approx(45.0)
    assert ita(60.0, 0.0) == 90.0
    assert ita(40.0, 0.0) == -90.0
    with pytest.raises(DegenerateColor):
        ita(50.0, 0.0)


@pytest.mark.parametrize(
    "angle, skin_type",
    [(80.0, 1), (55.1, 1), (55.0, 2), (45.0, 2), (30.0, 3), (15.0, 4), (0.0, 5), (-29.0, 5), (-30.0, 6), (-80.0, 6)],
)
def test_fitzpatrick_type(angle, skin_type):
    assert fitzpatrick_type(angle) == skin_type


@pytest.mark.parametrize(
    "rgb, skin_type", [((250, 230, 220), 1), ((170, 120, 100), 4), ((60, 40, 30), 6)]
)
def test_classify_rgb(rgb, skin_type):
    result = classify_fitzpatrick(rgb)
    assert result.type == skin_type
    assert result.to_dict()["method"] == "ITA"


def test_classify_degenerate():
    with pytest.raises(DegenerateColor):
        classify_lab((50.0, 10.0, 0.0))
    with pytest.raises(DegenerateColor):
        classify_fitzpatrick((1.0, 2.0))


def test_skin_pixels_use_central_crop():
    frames = np.full((20, 12, 12, 3), 255.0)
    frames[:, 3:9, 3:9] = (170.0, 120.0, 100.0)
    sequence = FrameSequence(frames, FS)
    pixels = skin_pixels(sequence)
    assert np.allclose(pixels, (170.0, 120.0, 100.0))
    assert classify_fitzpatrick(sequence) == classify_fitzpatrick((170.0, 120.0, 100.0))


def test_skin_pixels_trim_outliers():
    rng = np.random.default_rng(1)
    frames = np.full((4, 10, 10, 3), 150.0) + rng.normal(0, 1, (4, 10, 10, 3))
    frames[:, 5, 5] = 255.0
    frames[:, 4, 4] = 0.0
    pixels = skin_pixels(FrameSequence(frames, FS))
    assert pixels.max() < 200 and pixels.min() > 100
    assert len(pixels) < 4 * 5 * 5


# analyzer


def test_analyze_clean_record(audit_records):
    row = analyze_record(audit_records["clean"], threshold_bpm=15.0)
    assert row.errors == ()
    assert row.discrepancy is not None
    assert len(row.discrepancy.rows) == 2
    assert row.skin_type == 4
    assert not row.flagged


def test_analyze_flags(audit_records):
    lagged = analyze_record(audit_records["lagged"], threshold_bpm=15.0)
    assert lagged.flagged
    assert any("label lag" in reason for reason in lagged.flag_reasons)
    offset = analyze_record(audit_records["offset"], threshold_bpm=15.0)
    assert offset.discrepancy.flagged
    assert "HR label disagrees with the PPG label" in offset.flag_reasons


def test_analyze_without_hr_label(audit_records):
    row = analyze_record(replace(audit_records["clean"], hr_label=None))
    assert row.discrepancy is None
    assert row.notes == ("no HR label; discrepancy skipped",)
    assert row.alignment is not None


def test_analyze_dataset(audit_records, tmp_path):
    records = sorted(audit_records.values(), key=lambda r: r.subject_id)
    failure = LoadFailure(tmp_path / "broken", MissingLabel("no label"))
    report = analyze_dataset(records, [failure], threshold_bpm=15.0, workers=2)
    assert isinstance(report, AnalyzerReport)
    assert [row.subject_id for row in report.rows] == [
        "broken",
        "synth-0001",
        "synth-0002",
        "synth-0003",
    ]
    assert report.histogram == {
        "1": 0,
        "2": 0,
        "3": 0,
        "4": 3,
        "5": 0,
        "6": 0,
        "UNKNOWN": 1,
    }
    flagged = {row.subject_id for row in report.flagged_rows}
    assert flagged == {"broken", "synth-0002", "synth-0003"}
    summary = report.summary()
    assert summary["n_records"] == 4
    assert summary["n_flagged"] == 3
    assert summary["n_unreliable_alignment"] == 0
    json.dumps(report.to_dict())
    table = report.format_table()
    assert "synth-0003" in table and "broken" in table


def test_analyze_empty():
    with pytest.raises(EmptyDataset):
        analyze_dataset([])


# constant heart rate records


@pytest.fixture(scope="module")
def steady_records(tmp_path_factory):
    root = tmp_path_factory.mktemp("steady")
    return generate_dataset(suite_specs(6, sensor_noise_std=0.1), root)


def test_alignment_of_periodic_pulse(steady_records):
    for record in steady_records:
        report = check_alignment(record)
        assert abs(report.lag_s) < 0.1, record.subject_id
        assert report.reliable


def test_cross_correlation_prefers_smallest_lag():
    t = np.arange(600) / FS
    pulse = np.sin(2 * np.pi * 1.25 * t)
    lag, corr = cross_correlation_lag(pulse, pulse, FS, 3.0)
    assert lag == 0.0
    assert corr == pytest.approx(1.0)


def test_analyze_steady_dataset(steady_records):
    report = analyze_dataset(steady_records)
    assert report.flagged_rows == ()
    assert report.mean_discrepancy("label_vs_fft") < 1.0
    assert report.summary()["mean_abs_lag_s"] < 0.1


def test_analyze_reports_label_offset(tmp_path):
    specs = suite_specs(4, sensor_noise_std=0.1, hr_label_offset_bpm=5.0)
    report = analyze_dataset(generate_dataset(specs, tmp_path))
    assert report.mean_discrepancy("label_vs_fft") == pytest.approx(5.0, abs=0.5)
