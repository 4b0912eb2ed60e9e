"""Command layer: specifications, registry and handlers of the CLI commands."""

from torus_spectra.commands.base import BaseCommandHandler, CommandResult
from torus_spectra.commands.handlers import lattice_info, normal_form, partition, run, spectrum, verify  # noqa: F401
from torus_spectra.commands.registry import CommandRegistry, registry
from torus_spectra.commands.specs import CommandParameter, CommandSpec

__all__ = [
    "BaseCommandHandler",
    "CommandParameter",
    "CommandRegistry",
    "CommandResult",
    "CommandSpec",
    "registry",
]
