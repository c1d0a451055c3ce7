"""Command-line front end: estimate / generate / evaluate / import / export.

Exit codes: 0 success, 2 usage error, 3 data or validation error,
4 numeric or degenerate-input error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys

import scipy.fft

from . import __version__
from .core import FrameSeries, remove_ttp
from .errors import DataError, DegenerateError, ValidationError
from .estimation import estimate_params
from .metrics import evaluate_pair
from .plots import render_report_figures
from .screens import GenSpec, generate_series
from . import stackio

PRESETS = {
    "f06": {"nb_phase": 596, "nb_slope": 298},
    "f12": {"nb_phase": 994, "nb_slope": 496},
}


def _leading_fraction(series: FrameSeries, split: float) -> FrameSeries:
    n = max(1, int(series.nt * split))
    return series.with_frames(series.frames[:n], series.mask)


def _trailing_fraction(series: FrameSeries, split: float) -> FrameSeries:
    n = int(series.nt * split)
    if n >= series.nt:
        n = series.nt - 1
    return series.with_frames(series.frames[n:], series.mask)


def cmd_estimate(args) -> int:
    series = stackio.read_stack(args.input)
    if args.split is not None:
        series = _leading_fraction(series, args.split)
    if args.remove_ttp:
        series = remove_ttp(series)
    params = estimate_params(series, lag=args.lag, max_shift=args.max_shift)
    stackio.write_params(
        params,
        args.out,
        provenance={"input": os.path.abspath(args.input), "lag": args.lag, "tool_version": __version__},
    )
    print(f"{'L0_m':>12} {'r0_m':>12} {'vx_px':>12} {'vy_px':>12} {'alpha':>12}")
    print(f"{params.L0_m:12.5f} {params.r0_m:12.5f} {params.vx_px:12.5f} {params.vy_px:12.5f} {params.alpha:12.5f}")
    return 0


def cmd_generate(args) -> int:
    params, _ = stackio.read_params(args.params)
    if args.ref is not None:
        ref = stackio.read_stack(args.ref)
        n_steps = ref.nt * args.multiplier
        fs_hz, lambda_m = ref.fs_hz, ref.lambda_m
    else:
        if args.steps is None:
            raise ValidationError("either --steps or --ref is required")
        n_steps = args.steps
        fs_hz, lambda_m = args.fs_hz, args.lambda_m
    os.makedirs(args.out_dir, exist_ok=True)
    for member in range(args.ensemble):
        spec = GenSpec(
            n_out=args.size,
            n_steps=n_steps,
            seed=args.seed + member,
            lambda_m=lambda_m,
            fs_hz=fs_hz,
        )
        series = generate_series(params, spec)
        path = os.path.join(args.out_dir, f"synthetic_{member:03d}.phscrn")
        stackio.write_stack(series, path)
        print(path)
    return 0


def cmd_evaluate(args) -> int:
    nb_phase, nb_slope = args.nb_phase, args.nb_slope
    if args.preset is not None:
        nb_phase = nb_phase or PRESETS[args.preset]["nb_phase"]
        nb_slope = nb_slope or PRESETS[args.preset]["nb_slope"]
    if not nb_phase or not nb_slope:
        raise ValidationError("block lengths required: --nb-phase/--nb-slope or --preset")
    measured = stackio.read_stack(args.measured)
    if args.split is not None:
        measured = _trailing_fraction(measured, args.split)
    synthetic = [stackio.read_stack(p) for p in args.synthetic]
    report = evaluate_pair(measured, synthetic, nb_phase=nb_phase, nb_slope=nb_slope)

    os.makedirs(args.out_dir, exist_ok=True)
    doc = {
        "metrics": report.scalars(),
        "nb_phase": nb_phase,
        "nb_slope": nb_slope,
        "ensemble": len(synthetic),
        "percentile_rule": "linear interpolation between order statistics",
        "tool_version": __version__,
    }
    with open(os.path.join(args.out_dir, "report.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    stackio.export_curve(report.measured_slope_tpsd, os.path.join(args.out_dir, "measured_tpsd_slope.csv"))
    stackio.export_curve(report.synthetic_slope_tpsd, os.path.join(args.out_dir, "synthetic_tpsd_slope.csv"))
    stackio.export_curve(report.measured_phase_tpsd, os.path.join(args.out_dir, "measured_tpsd_phase.csv"))
    stackio.export_curve(report.synthetic_phase_tpsd, os.path.join(args.out_dir, "synthetic_tpsd_phase.csv"))
    stackio.export_curve(report.measured_structure, os.path.join(args.out_dir, "measured_structure.csv"))
    stackio.export_curve(report.synthetic_structure, os.path.join(args.out_dir, "synthetic_structure.csv"))
    if not args.no_figures:
        render_report_figures(report, args.out_dir)
    for name, value in report.scalars().items():
        print(f"{name}: {value:.5f}")
    return 0


def cmd_import(args) -> int:
    series = stackio.import_stack_csv(args.input, args.delta_m, args.fs_hz, args.lambda_m)
    stackio.write_stack(series, args.out)
    print(args.out)
    return 0


def cmd_export(args) -> int:
    series = stackio.read_stack(args.input)
    stackio.export_stack_csv(series, args.out)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phscrn", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate flow parameters from a stack")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lag", type=int, default=10)
    p.add_argument("--max-shift", type=int, default=None, help="correlation search radius in pixels")
    p.add_argument("--split", type=float, default=None, help="use only the leading fraction of the series")
    p.add_argument("--remove-ttp", action="store_true", help="detrend each frame before estimating")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("generate", help="generate synthetic stacks from a params file")
    p.add_argument("--params", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--size", type=int, required=True, help="output screen side in pixels")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--ref", default=None, help="reference stack whose length sets the step count")
    p.add_argument("--multiplier", type=int, default=20)
    p.add_argument("--ensemble", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fs-hz", type=float, default=1.0)
    p.add_argument("--lambda-m", type=float, default=532e-9)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score synthetic stacks against a measured stack")
    p.add_argument("--measured", required=True)
    p.add_argument("--synthetic", required=True, nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--nb-phase", type=int, default=None)
    p.add_argument("--nb-slope", type=int, default=None)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--split", type=float, default=None, help="score against the trailing 1-split of the measured series")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("import", help="convert a long-format (t,y,x,value) CSV into a stack")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--delta-m", type=float, required=True)
    p.add_argument("--fs-hz", type=float, required=True)
    p.add_argument("--lambda-m", type=float, required=True)
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("export", help="dump a stack to long-format CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    workers = os.environ.get("PHSCRN_THREADS")
    ctx = scipy.fft.set_workers(int(workers)) if workers else contextlib.nullcontext()
    try:
        with ctx:
            return args.func(args)
    except (ValidationError, DataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except DegenerateError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
