__author__ = "rppgbench developers"
__copyright__ = "Copyright 2024, rppgbench developers"
__license__ = "MIT"

import sys
from argparse import ArgumentDefaultsHelpFormatter
from pathlib import Path
from typing import List, Optional

import numpy as np

from rppgbench.common import DEFAULT_BAND, __version__
from rppgbench.common.argparse import ArgumentParser
from rppgbench.common.configfile import load_configfile, validate
from rppgbench.exceptions import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    exit_code_for,
    print_exception,
)
from rppgbench.logging import logger, setup_logger
from rppgbench.settings import (
    BenchConfig,
    CalType,
    ChannelSpace,
    ComponentSelection,
    Layout,
    MethodConfig,
    MethodId,
    PreprocessKind,
    ReportFormat,
    TruthSource,
    check_out_of_scope,
)


def parse_pair(values, errmsg="expected two numbers"):
    if len(values) != 2:
        raise ValueError(errmsg)
    return tuple(float(v) for v in values)


def parse_band(values):
    return parse_pair(values, "band needs a lower and an upper edge in Hz")


def parse_int_tuple(values):
    return tuple(int(v) for v in values)


def parse_methods(values):
    return MethodId.parse_choices_list(values, "--methods")


def parse_formats(values):
    return ReportFormat.parse_choices_list(values, "--formats")


def add_common_arguments(parser):
    group = parser.add_argument_group("OUTPUT")
    group.add_argument(
        "--verbose", action="store_true", help="Print debugging output."
    )
    group.add_argument(
        "--quiet", "-q", action="store_true", help="Only print warnings and errors."
    )
    group.add_argument(
        "--nocolor", action="store_true", help="Do not use a colored output."
    )
    group.add_argument(
        "--logfile", metavar="FILE", help="Additionally write the log to FILE."
    )
    return group


def add_method_arguments(parser):
    group = parser.add_argument_group("METHOD")
    group.add_argument(
        "--window-seconds",
        type=float,
        help="Sliding window length of CHROM and POS in seconds.",
    )
    group.add_argument(
        "--component-selection",
        parse_func=lambda v: ComponentSelection.parse_choice(v, "--component-selection"),
        help="Component picked by ICA, PCA and LGI "
        f"({', '.join(ComponentSelection.choices())}).",
    )
    group.add_argument(
        "--band",
        nargs=2,
        metavar=("LO", "HI"),
        parse_func=parse_band,
        help="Passband in Hz.",
    )
    group.add_argument(
        "--ssr-stride",
        type=int,
        help="Temporal stride of the SSR rotation estimate in frames.",
    )
    return group


def method_config_from_args(args) -> MethodConfig:
    kwargs = {}
    if args.window_seconds is not None:
        kwargs["window_seconds"] = args.window_seconds
    if args.component_selection is not None:
        kwargs["component_selection"] = args.component_selection
    if args.band is not None:
        kwargs["band"] = args.band
    if args.ssr_stride is not None:
        kwargs["ssr_stride_frames"] = args.ssr_stride
    return MethodConfig(**kwargs)


def get_argument_parser():
    """Generate and return argument parser."""
    parser = ArgumentParser(
        prog="rppgbench",
        description="rppgbench extracts pulse signals from facial color traces "
        "with classical rPPG methods and benchmarks their heart rate estimates.",
        formatter_class=ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", "-v", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    def subcommand(name, help):
        sub = subparsers.add_parser(
            name,
            help=help,
            description=help,
            formatter_class=ArgumentDefaultsHelpFormatter,
        )
        add_common_arguments(sub)
        return sub

    # synth
    synth = subcommand("synth", "Generate a synthetic dataset with known pulse.")
    group = synth.add_argument_group("SYNTHESIS")
    group.add_argument("--out", required=True, metavar="DIR", help="Dataset directory.")
    group.add_argument("-n", "--records", type=int, default=20, help="Number of records.")
    group.add_argument(
        "--hr-range",
        nargs=2,
        metavar=("LO", "HI"),
        parse_func=parse_pair,
        default=(72.0, 120.0),
        help="Heart rates in bpm spread evenly over the records.",
    )
    group.add_argument("--duration", type=float, default=20.0, help="Seconds per record.")
    group.add_argument("--fs", type=float, default=30.0, help="Video frame rate in Hz.")
    group.add_argument("--fs-label", type=float, help="Label sampling rate in Hz.")
    group.add_argument("--seed", type=int, default=0, help="Seed of the first record.")
    group.add_argument(
        "--layout",
        parse_func=lambda v: Layout.parse_choice(v, "--layout"),
        default=Layout.TRACE_CSV,
        help=f"Record layout ({', '.join(Layout.choices())}).",
    )
    group.add_argument(
        "--frame-size",
        nargs=2,
        metavar=("H", "W"),
        parse_func=parse_int_tuple,
        default=(16, 16),
        help="Frame size for the RAW_FRAMES layout.",
    )
    group.add_argument(
        "--pulse-amplitude", type=float, default=0.005, help="Relative pulse depth."
    )
    group.add_argument(
        "--sensor-noise", type=float, default=0.0, help="Sensor noise std (8-bit units)."
    )
    group.add_argument(
        "--drift",
        nargs=2,
        metavar=("AMP", "FREQ"),
        parse_func=parse_pair,
        default=(0.0, 0.2),
        help="Relative amplitude and frequency of the illumination flicker.",
    )
    group.add_argument(
        "--motion",
        type=float,
        default=0.0,
        help="Relative amplitude of low-frequency motion along the gray axis.",
    )
    group.add_argument("--quantize", action="store_true", help="Round to 8-bit values.")
    group.add_argument(
        "--label-lag", type=float, default=0.0, help="Delay of the PPG label in seconds."
    )
    group.add_argument(
        "--hr-label-offset",
        type=float,
        default=0.0,
        help="Bias added to the HR label in bpm.",
    )

    # extract
    extract = subcommand("extract", "Reduce raw frames to a spatial-mean RGB trace.")
    group = extract.add_argument_group("EXTRACTION")
    group.add_argument("--frames", required=True, metavar="FILE", help="Raw frame file.")
    group.add_argument("--out", required=True, metavar="FILE", help="Trace CSV to write.")
    group.add_argument(
        "--roi",
        nargs=4,
        metavar=("X", "Y", "W", "H"),
        parse_func=parse_int_tuple,
        help="Region of interest overriding the sidecar.",
    )

    # estimate
    estimate = subcommand("estimate", "Extract a pulse signal with one method.")
    group = estimate.add_argument_group("ESTIMATION")
    group.add_argument(
        "--input",
        required=True,
        metavar="PATH",
        help="Trace CSV, raw frame file or record directory.",
    )
    group.add_argument(
        "--method",
        required=True,
        parse_func=lambda v: MethodId.parse_choice(v, "--method"),
        help=f"Extraction method ({', '.join(MethodId.choices())}).",
    )
    group.add_argument("--out", required=True, metavar="FILE", help="Pulse CSV to write.")
    group.add_argument("--fs", type=float, help="Sampling rate if not inferable.")
    add_method_arguments(estimate)

    # hr
    hr = subcommand("hr", "Estimate heart rate per window from a pulse signal.")
    group = hr.add_argument_group("HEART RATE")
    group.add_argument("--input", required=True, metavar="FILE", help="Pulse CSV.")
    group.add_argument(
        "--cal-type",
        parse_func=lambda v: CalType.parse_choice(v, "--cal-type"),
        default=CalType.FFT,
        help=f"Heart rate calculation ({', '.join(CalType.choices())}).",
    )
    group.add_argument("--window", type=float, default=10.0, help="Window length in s.")
    group.add_argument("--overlap", type=float, default=0.0, help="Window overlap in s.")
    group.add_argument(
        "--band",
        nargs=2,
        metavar=("LO", "HI"),
        parse_func=parse_band,
        default=DEFAULT_BAND,
        help="Heart rate band in Hz.",
    )
    group.add_argument("--out", metavar="FILE", help="Write the series as CSV.")

    # evaluate
    evaluate = subcommand("evaluate", "Benchmark methods on a dataset.")
    group = evaluate.add_argument_group("BENCHMARK")
    group.add_argument(
        "--config", required=True, metavar="FILE", help="Benchmark config (YAML/JSON)."
    )
    group.add_argument("--dataset", metavar="DIR", help="Override fit.test.dataset.")
    group.add_argument("--output-dir", metavar="DIR", help="Override output_dir.")
    group.add_argument(
        "--methods", nargs="+", parse_func=parse_methods, help="Override methods."
    )
    group.add_argument(
        "--formats", nargs="+", parse_func=parse_formats, help="Override formats."
    )
    group.add_argument(
        "--truth",
        parse_func=lambda v: TruthSource.parse_choice(v, "--truth"),
        help=f"Ground truth source ({', '.join(TruthSource.choices())}).",
    )
    group.add_argument(
        "--workers",
        type=int,
        env_var="BENCH_WORKERS",
        help="Number of records evaluated in parallel.",
    )

    # analyze-dataset
    analyze = subcommand(
        "analyze-dataset", "Audit label alignment, label discrepancy and skin tone."
    )
    group = analyze.add_argument_group("ANALYSIS")
    group.add_argument("--dataset", required=True, metavar="DIR", help="Dataset root.")
    group.add_argument(
        "--layout",
        parse_func=lambda v: Layout.parse_choice(v, "--layout"),
        help="Record layout; detected per record if omitted.",
    )
    group.add_argument(
        "--window", type=float, default=10.0, help="Discrepancy window in s."
    )
    group.add_argument("--out", metavar="FILE", help="Write the analysis as JSON.")
    group.add_argument(
        "--workers",
        type=int,
        default=1,
        env_var="BENCH_WORKERS",
        help="Number of records analyzed in parallel.",
    )

    # report
    report = subcommand("report", "Render an existing evaluation report.")
    group = report.add_argument_group("REPORT")
    group.add_argument(
        "--input", required=True, metavar="PATH", help="report.json or its directory."
    )
    group.add_argument("--output-dir", required=True, metavar="DIR")
    group.add_argument(
        "--formats",
        nargs="+",
        parse_func=parse_formats,
        default=(ReportFormat.JSON, ReportFormat.CSV, ReportFormat.SVG),
    )

    # preprocess
    preprocess = subcommand("preprocess", "Save a preprocessed input as .npz.")
    group = preprocess.add_argument_group("PREPROCESSING")
    group.add_argument(
        "--input",
        required=True,
        metavar="PATH",
        help="Trace CSV, raw frame file or record directory.",
    )
    group.add_argument(
        "--kind",
        required=True,
        parse_func=lambda v: PreprocessKind.parse_choice(v, "--kind"),
        help=f"Transform ({', '.join(PreprocessKind.choices())}).",
    )
    group.add_argument("--out", required=True, metavar="FILE", help="Target .npz file.")
    group.add_argument(
        "--grid",
        nargs=2,
        metavar=("ROWS", "COLS"),
        parse_func=parse_int_tuple,
        default=(5, 5),
        help="Block grid of the STMAP transform.",
    )
    group.add_argument(
        "--channel-space",
        parse_func=lambda v: ChannelSpace.parse_choice(v, "--channel-space"),
        default=ChannelSpace.RGB,
        help=f"Color space of the STMAP transform ({', '.join(ChannelSpace.choices())}).",
    )
    group.add_argument("--fs", type=float, help="Sampling rate if not inferable.")

    # catalog
    subcommand("catalog", "List the public rPPG datasets.")
    return parser


def read_input(path, fs: Optional[float] = None):
    """Trace or frame sequence from a trace CSV, raw frame file or record directory."""
    from rppgbench.dataset.records import load_record
    from rppgbench.signals import read_raw_frames, read_trace_csv

    path = Path(path)
    if path.is_dir():
        return load_record(path).input
    if path.suffix == ".raw":
        return read_raw_frames(path)
    return read_trace_csv(path, fs=fs)


def load_bench_config(args) -> BenchConfig:
    path = Path(args.config)
    config = load_configfile(path)
    check_out_of_scope(config)
    validate(config)
    bench = BenchConfig.from_config(config, base_dir=path.parent)
    overrides = dict(
        output_dir=Path(args.output_dir) if args.output_dir else None,
        dataset_path=Path(args.dataset) if args.dataset else None,
        methods=args.methods,
        formats=args.formats,
        truth=args.truth,
        workers=args.workers,
    )
    return bench.with_overrides(**overrides)


def cmd_synth(args):
    from rppgbench.synth import generate_dataset, suite_specs

    specs = suite_specs(
        args.records,
        hr_range=args.hr_range,
        first_seed=args.seed,
        duration_s=args.duration,
        fs=args.fs,
        fs_label=args.fs_label,
        pulse_amplitude=args.pulse_amplitude,
        sensor_noise_std=args.sensor_noise,
        illumination_drift=args.drift,
        motion_noise=(args.motion, (1.0, 1.0, 1.0)),
        quantize_8bit=args.quantize,
        label_lag_s=args.label_lag,
        hr_label_offset_bpm=args.hr_label_offset,
    )
    generate_dataset(specs, args.out, args.layout, args.frame_size)
    logger.info(f"Wrote {len(specs)} synthetic records to {args.out}.")


def cmd_extract(args):
    from dataclasses import replace

    from rppgbench.preprocess import spatial_mean
    from rppgbench.signals import Roi, read_raw_frames, write_trace_csv

    frames = read_raw_frames(args.frames)
    if args.roi is not None:
        frames = replace(frames, roi=Roi(*args.roi))
    write_trace_csv(spatial_mean(frames), args.out)
    logger.info(f"Wrote trace of {len(frames)} frames to {args.out}.")


def cmd_estimate(args):
    from rppgbench.methods import run_method
    from rppgbench.signals import write_bvp_csv

    source = read_input(args.input, fs=args.fs)
    bvp = run_method(args.method, source, method_config_from_args(args))
    write_bvp_csv(bvp, args.out)
    logger.info(f"Wrote {args.method} pulse signal to {args.out}.")


def cmd_hr(args):
    import pandas as pd
    from tabulate import tabulate

    from rppgbench.hr import estimate_hr
    from rppgbench.signals import CSV_FLOAT_FORMAT, read_bvp_csv

    series = estimate_hr(
        read_bvp_csv(args.input), args.cal_type, args.window, args.overlap, args.band
    )
    table = pd.DataFrame(
        [
            {
                "window_start_s": e.window_start_s,
                "window_len_s": e.window_len_s,
                "hr_bpm": e.hr_bpm,
            }
            for e in series
        ],
        columns=["window_start_s", "window_len_s", "hr_bpm"],
    )
    if args.out:
        table.to_csv(
            args.out,
            index=False,
            float_format=CSV_FLOAT_FORMAT,
            lineterminator="\n",
            na_rep="",
        )
    print(tabulate(table, headers="keys", showindex=False, floatfmt=".2f"))


def cmd_evaluate(args):
    from rppgbench.evaluate import evaluate
    from rppgbench.report import emit_report, format_summary

    config = load_bench_config(args)
    report = evaluate(config)
    emit_report(report, config.output_dir, config.formats)
    print(format_summary(report))
    for cell in report.failed_cells:
        logger.warning(f"{cell.method} at {cell.window_s:g} s FAILED: {cell.reason}")


def cmd_analyze_dataset(args):
    import json

    from rppgbench.dataset.analyzer import analyze_dataset
    from rppgbench.dataset.records import load_dataset
    from rppgbench.report import write_text

    loaded = load_dataset(args.dataset, args.layout, args.workers)
    result = analyze_dataset(
        loaded.records,
        loaded.failures,
        window_len_s=args.window,
        workers=args.workers,
    )
    if args.out:
        write_text(
            Path(args.out), json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n"
        )
    print(result.format_table())


def cmd_report(args):
    from rppgbench.report import emit_report, format_summary, load_report

    report = load_report(args.input)
    emit_report(report, args.output_dir, args.formats)
    print(format_summary(report))


def cmd_preprocess(args):
    from rppgbench.exceptions import IoFailure
    from rppgbench.preprocess import preprocess

    source = read_input(args.input, fs=args.fs)
    data = preprocess(args.kind, source, tuple(args.grid), args.channel_space)
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        np.savez(out, data=data, fs=source.fs, kind=str(args.kind))
    except OSError as e:
        raise IoFailure(out, e)
    logger.info(f"Wrote {args.kind} array of shape {data.shape} to {out}.")


def cmd_catalog(args):
    from rppgbench.dataset.catalog import format_catalog

    print(format_catalog())


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "estimate": cmd_estimate,
    "hr": cmd_hr,
    "evaluate": cmd_evaluate,
    "analyze-dataset": cmd_analyze_dataset,
    "report": cmd_report,
    "preprocess": cmd_preprocess,
    "catalog": cmd_catalog,
}


def parse_args(argv):
    parser = get_argument_parser()
    args = parser.parse_args(argv)
    return parser, args


def run(argv: Optional[List[str]] = None) -> int:
    """Run the command line and return its exit code."""
    try:
        parser, args = parse_args(argv)
    except SystemExit as e:
        if isinstance(e.code, int):
            return e.code
        return EXIT_OK if e.code is None else EXIT_CONFIG_ERROR
    setup_logger(
        quiet=args.quiet,
        nocolor=args.nocolor,
        debug=args.verbose,
        logfile=args.logfile,
    )
    try:
        COMMANDS[args.command](args)
        return EXIT_OK
    except Exception as e:
        print_exception(e)
        return exit_code_for(e)
    finally:
        logger.cleanup()


def main(argv=None):
    """Main entry point."""
    sys.exit(run(argv))
