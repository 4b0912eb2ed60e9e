"""Command-line entry point; the parser is generated from the command registry."""

import argparse
import json
import logging
import sys
from typing import Optional

from torus_spectra.commands import registry
from torus_spectra.commands.specs import CommandSpec

KINDS = {"str": str, "int": int, "float": float}


def _add_command(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]", spec: CommandSpec) -> None:
    parser = subparsers.add_parser(spec.id, help=spec.description, description=spec.description)
    for param in spec.parameters:
        if param.kind == "flag":
            parser.add_argument(param.flag, dest=param.name, action="store_true", help=param.instruction)
        else:
            parser.add_argument(
                param.flag,
                dest=param.name,
                type=KINDS[param.kind],
                required=param.required,
                default=param.default,
                help=param.instruction,
            )
    parser.add_argument("--verbose", action="store_true", help="Log progress at INFO level")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per registered command."""
    parser = argparse.ArgumentParser(
        prog="torus-spectra",
        description="Spectral analysis of periodic Schroedinger operators on flat tori",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command_id in registry.get_all_command_ids():
        spec = registry.get_spec(command_id)
        if spec is not None:
            _add_command(subparsers, spec)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Run one command and return its exit status (0, 2 for configuration errors, 3 otherwise)."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    handler_class = registry.get_handler(args.command)
    if handler_class is None:
        print(f"Unknown command: {args.command}", file=sys.stderr)
        return 2
    handler = handler_class(verbose=args.verbose)
    result = handler.execute(vars(args))
    if not result.success:
        print(json.dumps({"error": result.error, "diagnostics": result.diagnostics}, indent=2), file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
