"""Normal form and reduction command."""

from torus_spectra.commands.base import BaseCommandHandler
from torus_spectra.commands.registry import registry
from torus_spectra.commands.specs import CommandSpec, common_parameters


class NormalFormHandler(BaseCommandHandler):
    """Writes nf.json, nf_decay.csv and tree.json."""

    @property
    def command_id(self) -> str:
        return "normal-form"

    @property
    def stages(self) -> list[str]:
        return ["normal-form"]


registry.register_spec(
    CommandSpec(
        id="normal-form",
        description="Run the normal-form steps and reduce every resonant block",
        parameters=common_parameters("config", "radius", "steps", "out"),
    )
)
registry.register_handler("normal-form", NormalFormHandler)
