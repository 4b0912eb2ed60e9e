"""Lattice constants command."""

from torus_spectra.commands.base import BaseCommandHandler
from torus_spectra.commands.registry import registry
from torus_spectra.commands.specs import CommandSpec, common_parameters


class LatticeInfoHandler(BaseCommandHandler):
    """Writes lattice.json: metrics, coercivity constant and volume constant."""

    @property
    def command_id(self) -> str:
        return "lattice-info"

    @property
    def stages(self) -> list[str]:
        return ["lattice-info"]


registry.register_spec(
    CommandSpec(
        id="lattice-info",
        description="Compute g, g*, the coercivity constant and the volume constant",
        parameters=common_parameters("config", "out"),
    )
)
registry.register_handler("lattice-info", LatticeInfoHandler)
