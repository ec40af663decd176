"""
mc: pairwise rank-sum comparisons on within-pair depths
"""

from core.logger import log
from fkwc.ranktest import CORRECTIONS, steel_mc

from commands import (
    add_depth_arguments,
    add_input_arguments,
    add_output_arguments,
    add_threads_argument,
    depth_spec_from_args,
    emit,
    load_input,
    maybe_center,
)


def cmd_mc(args) -> int:
    spec = depth_spec_from_args(args)
    ds = maybe_center(load_input(args), args, spec)
    result = steel_mc(
        ds,
        spec,
        correction_count=args.correction_count,
        method=args.correction,
        exact_small=args.exact_small,
        threads=args.threads,
    )
    log("cli", "mc_result", {"input": args.input, "depth": result.depth, "comparisons": result.num_comparisons})
    emit(result, args)
    return 0


def setup(cli):
    parser = cli.add_command("mc", "Pairwise multiple comparisons between groups", cmd_mc)
    add_input_arguments(parser)
    add_depth_arguments(parser)
    parser.add_argument("--correction", choices=CORRECTIONS, default="sidak", help="family-wise correction")
    parser.add_argument("--correction-count", type=int, help="family size (default: number of pairs)")
    parser.add_argument("--exact-small", action="store_true", help="exact rank-sum p-values for groups of 10 or fewer")
    parser.add_argument("--center", action="store_true", help="subtract each group's deepest curve first")
    add_threads_argument(parser)
    add_output_arguments(parser)
