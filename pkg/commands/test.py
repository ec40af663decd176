"""
test: depth-rank k-sample test for equal covariance operators
Exit code 0 = not rejected, 2 = rejected at --alpha
"""

from core.config import Config
from core.logger import log
from fkwc.ranktest import TestConfig, fkwc_test

from commands import (
    SERIAL_THREADS_HELP,
    add_depth_arguments,
    add_input_arguments,
    add_output_arguments,
    add_threads_argument,
    depth_spec_from_args,
    emit,
    load_input,
    maybe_center,
)

REJECTED = 2


def cmd_test(args) -> int:
    spec = depth_spec_from_args(args)
    config = TestConfig(spec, args.alpha, args.percentile_r)
    ds = maybe_center(load_input(args), args, spec)

    result = fkwc_test(ds, config)
    log("cli", "test_result", {
        "input": args.input,
        "depth": result.depth,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "reject": result.reject,
    })
    emit(result, args)
    return REJECTED if result.reject else 0


def setup(cli):
    parser = cli.add_command("test", "Test equality of covariance operators across groups", cmd_test)
    add_input_arguments(parser)
    add_depth_arguments(parser)
    parser.add_argument("--alpha", type=float, default=Config.ALPHA, help="significance level")
    parser.add_argument("--r", type=float, dest="percentile_r", help="use the percentile statistic keeping the least deep fraction r")
    parser.add_argument("--center", action="store_true", help="subtract each group's deepest curve first")
    add_threads_argument(parser, SERIAL_THREADS_HELP)
    add_output_arguments(parser)
