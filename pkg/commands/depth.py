"""
depth: per-curve depth values and pooled ranks
"""

from fkwc.depth import compute_depth, export_depths, rank_depths

from commands import (
    SERIAL_THREADS_HELP,
    add_depth_arguments,
    add_input_arguments,
    add_output_arguments,
    add_threads_argument,
    depth_spec_from_args,
    emit,
    load_input,
)


def cmd_depth(args) -> int:
    spec = depth_spec_from_args(args)
    ds = load_input(args)
    depths = compute_depth(ds, spec)
    ranks = rank_depths(depths.values, spec.rng_seed)
    emit(export_depths(ds, depths, ranks), args)
    return 0


def setup(cli):
    parser = cli.add_command("depth", "Compute depth values and ranks of every curve", cmd_depth)
    add_input_arguments(parser)
    add_depth_arguments(parser)
    add_threads_argument(parser, SERIAL_THREADS_HELP)
    add_output_arguments(parser, default_format="csv")
