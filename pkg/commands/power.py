"""
power: predicted power and required sample size from a JSON power spec
"""

import json

from core.config import Config
from core.errors import InputError
from fkwc.power import power_from_spec

from commands import SERIAL_THREADS_HELP, add_output_arguments, add_threads_argument, emit


def read_spec(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise InputError(f"{path}: file not found")
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})")


def cmd_power(args) -> int:
    payload = read_spec(args.input)
    if args.alpha is not None:
        payload["alpha"] = args.alpha
    if args.target_power is not None:
        payload["target_power"] = args.target_power
    result = power_from_spec(payload, seed=args.seed)
    emit(result, args)
    return 0


def setup(cli):
    parser = cli.add_command("power", "Noncentral chi-square power and sample size", cmd_power)
    parser.add_argument("--input", required=True, help="power spec JSON")
    parser.add_argument("--alpha", type=float, help="significance level (overrides the spec)")
    parser.add_argument("--target-power", type=float, help="search the sample size reaching this power")
    parser.add_argument("--seed", type=int, default=Config.SEED, help="seed for Monte Carlo probabilities")
    add_threads_argument(parser, SERIAL_THREADS_HELP)
    add_output_arguments(parser)
