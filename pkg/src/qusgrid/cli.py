"""Command-line front end.

Subcommands: generate, simulate, stats, classify, rescell, bench.
Progress goes to stderr; machine-readable JSON results go to stdout when
--json is given. Exit codes: 0 success, 2 usage error, 3 I/O error,
4 data/format error, 5 numeric or contract error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import statistics as pystats
import sys
import time
from pathlib import Path

import numpy as np

from . import qusd
from .classify import Label, ReferenceProfile, reference_classify, summarize_homogeneous
from .errors import DataFormatError, QusError
from .grid import GridSpec
from .phantom import ShapeConfig
from .qusd import GenerateConfig, GenerationError, read_sample, write_sample
from .simulator import (
    EnvelopeFrame,
    ImagingParams,
    grid_for_params,
    resolution_cell_extent,
    sample_imaging_params,
    simulate_homogeneous,
)
from .stats import ParametricImage, WindowSpec, correlation_cell_size, parametric_image

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_NUMERIC = 5

_ESTIMATORS = {
    "snr": "snr",
    "skewness": "skewness",
    "nakagami": "nakagami_m",
    "nakagami-omega": "nakagami_omega",
}


def _log(msg: str):
    print(msg, file=sys.stderr)


def _emit(args, payload: dict, human: str | None = None):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    elif human:
        print(human)


def fpair(text: str) -> tuple[float, float]:
    """argparse type for LO,HI float ranges."""
    try:
        a, b = text.split(",")
        out = (float(a), float(b))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    if out[1] < out[0]:
        raise argparse.ArgumentTypeError("range must be non-decreasing")
    return out


def pair(text: str) -> tuple[int, int]:
    """argparse type for AxB sizes, e.g. 64x64."""
    try:
        a, b = text.lower().split("x")
        out = (int(a), int(b))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected AxB, got {text!r}") from None
    if out[0] < 1 or out[1] < 1:
        raise argparse.ArgumentTypeError("size components must be positive")
    return out


def _env_frame_from_record(record: qusd.SampleRecord, tensor: str) -> EnvelopeFrame:
    if tensor not in record.tensors:
        raise DataFormatError(f"file has no tensor {tensor!r}")
    if "grid" not in record.meta:
        raise DataFormatError("file metadata lacks the grid description")
    grid = GridSpec.from_dict(record.meta["grid"])
    params = None
    if "imaging_params" in record.meta:
        params = ImagingParams.from_dict(record.meta["imaging_params"])
    return EnvelopeFrame(
        data=np.asarray(record.tensors[tensor], dtype=np.float64), grid=grid, params=params
    )


def _override_params(base: ImagingParams, args) -> ImagingParams:
    fields = {
        "f_c": args.fc,
        "f_s": args.fs,
        "v": args.v,
        "sigma_a": args.sigma_a,
        "sigma_l": args.sigma_l,
        "f_number": args.f_number,
        "n_pulses": args.n_pulses,
        "noise_std": args.noise_std,
    }
    overrides = {k: v for k, v in fields.items() if v is not None}
    return dataclasses.replace(base, **overrides) if overrides else base


# ---------------------------------------------------------------------------
# subcommands


def _shape_config(args) -> ShapeConfig:
    kwargs = {}
    if args.blob_count is not None:
        kwargs["blob_count_range"] = (int(args.blob_count[0]), int(args.blob_count[1]))
    if args.min_area_fraction is not None:
        kwargs["min_area_fraction"] = args.min_area_fraction
    if args.smooth_sigma is not None:
        kwargs["smooth_sigma_range"] = args.smooth_sigma
    if args.threshold_quantile is not None:
        kwargs["threshold_quantile_range"] = args.threshold_quantile
    return ShapeConfig(**kwargs)


def cmd_generate(args) -> int:
    n_axial, n_lateral = args.grid
    cfg = GenerateConfig(
        n_axial=n_axial,
        n_lateral=n_lateral,
        d_lateral=args.d_lateral,
        test_fraction=args.test_fraction,
        with_nakagami=not args.no_nakagami,
        shapes=_shape_config(args),
    )
    t0 = time.perf_counter()
    manifest = qusd.generate_dataset(cfg, args.count, args.seed, args.out, threads=args.threads)
    dt = time.perf_counter() - t0
    _log(f"wrote {manifest.n_samples} samples to {args.out} in {dt:.1f} s")
    _emit(
        args,
        {
            "n_samples": manifest.n_samples,
            "out_dir": str(args.out),
            "manifest": str(Path(args.out) / qusd.MANIFEST_NAME),
            "elapsed_s": round(dt, 3),
        },
        human=f"{manifest.n_samples} samples -> {args.out}",
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    n_axial, n_lateral = args.grid
    cfg = GenerateConfig(
        n_axial=n_axial,
        n_lateral=n_lateral,
        d_lateral=args.d_lateral,
        with_nakagami=not args.no_nakagami,
        shapes=_shape_config(args),
    )
    params = _override_params(sample_imaging_params_for_record(args.seed), args)
    record = qusd.synthesize_record(
        args.seed, cfg, params=params, density=args.density, mu_s=args.mu_s
    )
    write_sample(record, args.out)
    _log(f"wrote {args.out}")
    _emit(
        args,
        {"out": str(args.out), "imaging_params": record.meta["imaging_params"]},
        human=str(args.out),
    )
    return EXIT_OK


def sample_imaging_params_for_record(seed: int) -> ImagingParams:
    # same derivation as synthesize_record so simulate with no overrides
    # reproduces the generate pipeline exactly
    sim_seed = qusd._derived_seed(seed, qusd._SPLIT_CODES["train"], 0, qusd._SIM_SEED_TAG)
    return sample_imaging_params(sim_seed)


def cmd_stats(args) -> int:
    height, width = args.window
    stride_a, stride_l = args.stride or (max(1, height // 4), max(1, width // 4))
    statistic = _ESTIMATORS[args.estimator]
    window = WindowSpec(
        height=height,
        width=width,
        stride_a=stride_a,
        stride_l=stride_l,
        min_cell_multiple=0.0 if args.no_cell_check else args.min_cell_multiple,
    )
    maps = []
    meta_grid = None
    window_meta = window.to_dict()
    for path in args.inputs:
        record = read_sample(path)
        frame = _env_frame_from_record(record, args.tensor)
        rescell = resolution_cell_extent(frame.params) if frame.params else None
        pmap = parametric_image(frame, window, statistic, rescell=rescell)
        maps.append(pmap.values)
        meta_grid = record.meta.get("grid", meta_grid)
    stacked = np.stack(maps)
    mean_map = stacked.mean(axis=0)
    out_meta = {
        "kind": "parametric",
        "statistic": statistic,
        "window": window_meta,
        "tensor": args.tensor,
        "n_frames": len(maps),
        "sources": [str(p) for p in args.inputs],
    }
    if meta_grid is not None:
        out_meta["grid"] = meta_grid
    out_record = qusd.SampleRecord(tensors={"map": mean_map.astype("<f4")}, meta=out_meta)
    write_sample(out_record, args.out)
    _log(f"wrote {args.out}")
    finite = mean_map[np.isfinite(mean_map)]
    _emit(
        args,
        {
            "out": str(args.out),
            "statistic": statistic,
            "shape": list(mean_map.shape),
            "n_frames": len(maps),
            "mean": float(finite.mean()) if finite.size else None,
            "nan_fraction": float(np.mean(~np.isfinite(mean_map))),
        },
        human=f"{statistic} map {mean_map.shape} -> {args.out}",
    )
    return EXIT_OK


def _parametric_from_record(record: qusd.SampleRecord, path) -> ParametricImage:
    if record.meta.get("kind") != "parametric" or "map" not in record.tensors:
        raise DataFormatError(f"{path} is not a parametric map file")
    window = WindowSpec.from_dict(record.meta["window"])
    values = np.asarray(record.tensors["map"], dtype=np.float64)
    return ParametricImage(
        values=values,
        statistic=record.meta["statistic"],
        window=window,
        source_shape=(0, 0),
    )


def cmd_classify(args) -> int:
    test_map = _parametric_from_record(read_sample(args.input), args.input)
    ref_map = _parametric_from_record(read_sample(args.ref), args.ref)
    if ref_map.statistic != "snr":
        raise DataFormatError("reference map must be an SNR parametric image")
    values = ref_map.values
    profile = ReferenceProfile(
        snr_by_depth=values.mean(axis=1),
        dispersion_by_depth=values.std(axis=1) / np.sqrt(values.shape[1]),
        frames_used=1,
        window=ref_map.window,
    )
    class_map = reference_classify(test_map, profile, tolerance=args.tolerance)
    summary = {
        lab.name.lower(): float(np.mean(class_map.labels == lab)) for lab in Label
    }
    if args.out:
        out_record = qusd.SampleRecord(
            tensors={"labels": class_map.labels.astype(np.uint8)},
            meta={
                "kind": "classmap",
                "tolerance": args.tolerance,
                "window": class_map.window.to_dict(),
                "labels": {lab.name: int(lab) for lab in Label},
            },
        )
        write_sample(out_record, args.out)
        _log(f"wrote {args.out}")
    if args.true_label:
        summary["accuracy"] = summarize_homogeneous(
            class_map, Label[args.true_label.upper()]
        )["accuracy"]
    _emit(
        args,
        {"fractions": summary, "n_windows": int(class_map.labels.size)},
        human=" ".join(f"{k}={v:.3f}" for k, v in summary.items()),
    )
    return EXIT_OK


def cmd_rescell(args) -> int:
    record = read_sample(args.input)
    frame = _env_frame_from_record(record, args.tensor)
    axial, lateral = correlation_cell_size(frame)
    _emit(
        args,
        {"axial_mm": axial, "lateral_mm": lateral},
        human=f"axial {axial:.4f} mm, lateral {lateral:.4f} mm",
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    n_axial, n_lateral = args.grid
    params = ImagingParams(
        f_c=5.0, f_s=80.0, v=1540.0, sigma_a=0.2, sigma_l=0.3, noise_std=0.0
    )
    grid = grid_for_params(params, n_axial, n_lateral, d_lateral=args.d_lateral)
    # warm-up run so FFT planning and allocator effects stay out of the timings
    simulate_homogeneous(args.seed, args.density, params, grid)
    runs_ms = []
    for i in range(args.runs):
        t0 = time.perf_counter()
        simulate_homogeneous(args.seed + i, args.density, params, grid)
        runs_ms.append((time.perf_counter() - t0) * 1000.0)
    median_ms = pystats.median(runs_ms)
    _log(f"{args.runs} runs on {n_axial}x{n_lateral}: median {median_ms:.1f} ms")
    _emit(
        args,
        {
            "grid": [n_axial, n_lateral],
            "runs_ms": [round(v, 3) for v in runs_ms],
            "median_ms": round(median_ms, 3),
        },
        human=f"median {median_ms:.1f} ms over {args.runs} runs",
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qusgrid",
        description="Grid-based ultrasound speckle simulation and envelope statistics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_json(p):
        p.add_argument("--json", action="store_true", help="JSON results on stdout")

    p = sub.add_parser("generate", help="generate a reproducible dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=pair, default=(256, 256), help="axial x lateral samples")
    p.add_argument("--d-lateral", type=float, default=0.15)
    p.add_argument("--test-fraction", type=float, default=1.0 / 6.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-nakagami", action="store_true")
    p.add_argument("--blob-count", type=fpair, help="region count range LO,HI")
    p.add_argument("--min-area-fraction", type=float, help="minimum region area as grid fraction")
    p.add_argument("--smooth-sigma", type=fpair, help="mask smoothing range LO,HI (grid fraction)")
    p.add_argument("--threshold-quantile", type=fpair, help="mask threshold quantile range LO,HI")
    add_json(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="simulate a single phantom to a QUSD file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=pair, default=(2048, 256))
    p.add_argument("--d-lateral", type=float, default=0.1)
    p.add_argument("--density", type=float, help="homogeneous scatterers per cell")
    p.add_argument("--mu-s", type=float, default=1.0)
    p.add_argument("--fc", type=float, help="center frequency MHz")
    p.add_argument("--fs", type=float, help="sampling frequency MHz")
    p.add_argument("--v", type=float, help="speed of sound m/s")
    p.add_argument("--sigma-a", type=float)
    p.add_argument("--sigma-l", type=float)
    p.add_argument("--f-number", type=float)
    p.add_argument("--n-pulses", type=int)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--no-nakagami", action="store_true")
    p.add_argument("--blob-count", type=fpair, help="region count range LO,HI")
    p.add_argument("--min-area-fraction", type=float, help="minimum region area as grid fraction")
    p.add_argument("--smooth-sigma", type=fpair, help="mask smoothing range LO,HI (grid fraction)")
    p.add_argument("--threshold-quantile", type=fpair, help="mask threshold quantile range LO,HI")
    add_json(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="windowed statistic map of envelope data")
    p.add_argument("--in", dest="inputs", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--estimator", choices=sorted(_ESTIMATORS), default="snr")
    p.add_argument("--tensor", default="env")
    p.add_argument("--window", type=pair, default=(64, 64))
    p.add_argument("--stride", type=pair, help="default window/4")
    p.add_argument("--min-cell-multiple", type=float, default=8.0)
    p.add_argument("--no-cell-check", action="store_true")
    add_json(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("classify", help="reference-phantom classification of an SNR map")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--tolerance", type=float, default=0.03)
    p.add_argument("--out")
    p.add_argument("--true-label", choices=["uds", "fds", "periodic"])
    add_json(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("rescell", help="correlation-based resolution cell size")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--tensor", default="env")
    add_json(p)
    p.set_defaults(func=cmd_rescell)

    p = sub.add_parser("bench", help="time the map->RF->envelope pipeline")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--grid", type=pair, default=(2048, 256))
    p.add_argument("--d-lateral", type=float, default=0.1)
    p.add_argument("--density", type=float, default=12.0)
    p.add_argument("--runs", type=int, default=10)
    add_json(p)
    p.set_defaults(func=cmd_bench)

    return parser


def run(argv=None) -> int:
    """Parse argv and dispatch; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except GenerationError as e:
        _log(f"error: {e}")
        if isinstance(e.cause, OSError):
            return EXIT_IO
        if isinstance(e.cause, DataFormatError):
            return EXIT_DATA
        return EXIT_NUMERIC
    except DataFormatError as e:
        _log(f"error: {e}")
        return EXIT_DATA
    except QusError as e:
        _log(f"error: {e}")
        return EXIT_NUMERIC
    except OSError as e:
        _log(f"error: {e}")
        return EXIT_IO


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
