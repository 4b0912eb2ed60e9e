"""Full pipeline command."""

from torus_spectra.commands.base import BaseCommandHandler
from torus_spectra.commands.registry import registry
from torus_spectra.commands.specs import CommandSpec


class RunHandler(BaseCommandHandler):
    """Runs the stages listed in the configuration."""

    @property
    def command_id(self) -> str:
        return "run"

    @property
    def stages(self) -> list[str]:
        return []


registry.register_spec(CommandSpec(id="run", description="Run the configured pipeline stages"))
registry.register_handler("run", RunHandler)
