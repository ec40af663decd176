"""
simulate: replicated size / power study from a JSON study spec
"""

from dataclasses import replace

from core.logger import log
from fkwc.sim import load_study, run_study

from commands import add_output_arguments, add_threads_argument, emit


def cmd_simulate(args) -> int:
    spec = load_study(args.input)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replications is not None:
        overrides["replications"] = args.replications
    if overrides:
        spec = replace(spec, **overrides)

    result = run_study(spec, threads=args.threads)
    log("cli", "study_result", {"input": args.input, "rows": len(result.rows)})
    emit(result.to_frame(), args)
    return 0


def setup(cli):
    parser = cli.add_command("simulate", "Run a Monte Carlo size or power study", cmd_simulate)
    parser.add_argument("--input", required=True, help="study spec JSON")
    parser.add_argument("--seed", type=int, help="base seed (overrides the spec)")
    parser.add_argument("--replications", type=int, help="Monte Carlo replications (overrides the spec)")
    add_threads_argument(parser)
    add_output_arguments(parser, default_format="table")
