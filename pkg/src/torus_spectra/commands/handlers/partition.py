"""Resonance partition command."""

from torus_spectra.commands.base import BaseCommandHandler
from torus_spectra.commands.registry import registry
from torus_spectra.commands.specs import CommandSpec, common_parameters


class PartitionHandler(BaseCommandHandler):
    """Writes partition.json (and plot.json with --emit-plot-data)."""

    @property
    def command_id(self) -> str:
        return "partition"

    @property
    def stages(self) -> list[str]:
        return ["partition"]


registry.register_spec(
    CommandSpec(
        id="partition",
        description="Label the partition cube with the classes W_{M,beta}",
        parameters=common_parameters("config", "radius", "out", "emit_plot_data"),
    )
)
registry.register_handler("partition", PartitionHandler)
