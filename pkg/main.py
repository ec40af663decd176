import argparse
import importlib
import os
import sys
from pathlib import Path
from typing import Callable, List, Optional

from core.errors import FkwcError, ParameterError
from core.logger import cleanup_old_logs, log

COMMANDS_DIR = Path(__file__).resolve().parent / "commands"


class CliParser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad usage; 2 means 'rejected' here, so raise instead"""

    def error(self, message):
        raise ParameterError(f"{self.prog}: {message}")


class Cli:
    def __init__(self):
        self.parser = CliParser(
            prog="fkwc",
            description="Depth-rank tests for equality of covariance operators of functional data",
        )
        self.subparsers = self.parser.add_subparsers(dest="command", metavar="COMMAND")
        self.commands: List[str] = []

    def add_command(self, name: str, help_text: str, handler: Callable) -> argparse.ArgumentParser:
        parser = self.subparsers.add_parser(name, help=help_text, description=help_text)
        parser.set_defaults(handler=handler)
        self.commands.append(name)
        return parser

    def load_commands(self):
        # Load command modules (skip disabled ones ending with _disabled.py)
        for filename in sorted(os.listdir(COMMANDS_DIR)):
            if (
                filename.endswith(".py")
                and not filename.endswith("_disabled.py")
                and filename != "__init__.py"
            ):
                module = importlib.import_module(f"commands.{filename[:-3]}")
                module.setup(self)

    def run(self, argv: Optional[List[str]] = None) -> int:
        try:
            args = self.parser.parse_args(argv)
            if not getattr(args, "handler", None):
                self.parser.print_help(sys.stderr)
                return ParameterError.exit_code
            log("cli", "command_started", {"command": args.command})
            code = args.handler(args)
            log("cli", "command_finished", {"command": args.command, "exit_code": code})
            return code
        except FkwcError as e:
            print(f"Error: {e}", file=sys.stderr)
            log("cli", "command_failed", {"error": type(e).__name__, "message": str(e)})
            return e.exit_code


def build_cli() -> Cli:
    cli = Cli()
    cli.load_commands()
    return cli


def main(argv: Optional[List[str]] = None) -> int:
    cleanup_old_logs()
    return build_cli().run(argv)


if __name__ == "__main__":
    sys.exit(main())
