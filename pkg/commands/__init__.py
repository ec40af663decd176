"""
Shared flag definitions and plumbing for the subcommands
"""

import argparse
from typing import Optional

from core.config import Config
from core.errors import ParameterError
from fkwc.depth import MEDIAN_HEURISTIC, DepthKind, DepthSpec
from fkwc.fdata import FunctionalDataset, center_by_deepest, load_dataset, load_derivatives
from fkwc.report import FORMATS, render, write_output

FINITE_DIFF = "finite-diff"


def add_input_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--input", required=True, help="dataset file (wide CSV or JSON)")
    parser.add_argument("--input-format", choices=("csv", "json"), help="dataset format (default: from suffix)")
    parser.add_argument(
        "--derivatives",
        metavar="SOURCE",
        help=f"derivative curves: '{FINITE_DIFF}' (default for primed depths) or 'file=PATH'",
    )


def add_depth_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--depth", choices=[k.value for k in DepthKind], default="ltr", help="depth function")
    parser.add_argument("--primed", action="store_true", help="include first derivatives in the depth")
    parser.add_argument("--projections", type=int, default=Config.NUM_PROJECTIONS, help="RP direction count")
    parser.add_argument("--band-order", type=int, default=Config.BAND_ORDER, help="MBD band order K")
    parser.add_argument("--bandwidth", default=MEDIAN_HEURISTIC, help="KSD kernel bandwidth or 'median-heuristic'")
    parser.add_argument("--weights", default="0.5,0.5", help="curve,derivative channel weights")
    parser.add_argument("--seed", type=int, default=Config.SEED, help="seed for projections and tie-breaks")


def add_output_arguments(parser: argparse.ArgumentParser, default_format: str = "json"):
    parser.add_argument("--output", help="write the result here instead of stdout")
    parser.add_argument("--format", choices=FORMATS, default=default_format, help="output format")


SERIAL_THREADS_HELP = "accepted for a uniform command line; this command runs in one thread"


def add_threads_argument(parser: argparse.ArgumentParser, text: str = "worker threads"):
    parser.add_argument("--threads", type=int, default=Config.THREADS, help=text)


def _parse_weights(text: str) -> tuple:
    try:
        weights = tuple(float(w) for w in text.split(","))
    except ValueError:
        raise ParameterError(f"--weights must look like 'w1,w2', got '{text}'")
    if len(weights) != 2:
        raise ParameterError(f"--weights needs exactly two values, got '{text}'")
    return weights


def depth_spec_from_args(args) -> DepthSpec:
    return DepthSpec(
        kind=args.depth,
        use_derivatives=args.primed,
        num_projections=args.projections,
        band_order=args.band_order,
        channel_weights=_parse_weights(args.weights),
        kernel_bandwidth=args.bandwidth,
        rng_seed=args.seed,
    )


def load_input(args) -> FunctionalDataset:
    ds = load_dataset(args.input, args.input_format)
    source: Optional[str] = args.derivatives
    if source is None:
        return ds
    if source == FINITE_DIFF:
        return ds.with_derivatives()
    if source.startswith("file="):
        return load_derivatives(ds, source[len("file="):])
    raise ParameterError(f"--derivatives must be '{FINITE_DIFF}' or 'file=PATH', got '{source}'")


def maybe_center(ds: FunctionalDataset, args, spec: DepthSpec) -> FunctionalDataset:
    if getattr(args, "center", False):
        return center_by_deepest(ds, spec)
    return ds


def emit(payload, args):
    write_output(render(payload, args.format), args.output)
