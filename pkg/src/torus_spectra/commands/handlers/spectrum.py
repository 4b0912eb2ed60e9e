"""Labeled spectrum command."""

from torus_spectra.commands.base import BaseCommandHandler
from torus_spectra.commands.registry import registry
from torus_spectra.commands.specs import CommandSpec, common_parameters


class SpectrumHandler(BaseCommandHandler):
    """Writes spectrum.csv with the labeled eigenvalues, residuals and H^-N norms."""

    @property
    def command_id(self) -> str:
        return "spectrum"

    @property
    def stages(self) -> list[str]:
        return ["spectrum"]


registry.register_spec(
    CommandSpec(
        id="spectrum",
        description="Diagonalise H on the box and label its eigenvalues",
        parameters=common_parameters("config", "radius", "steps", "out"),
    )
)
registry.register_handler("spectrum", SpectrumHandler)
