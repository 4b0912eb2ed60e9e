"""Verification command."""

from torus_spectra.commands.base import BaseCommandHandler
from torus_spectra.commands.registry import registry
from torus_spectra.commands.specs import CommandSpec, common_parameters


class VerifyHandler(BaseCommandHandler):
    """Writes verify.json with every geometric, spectral and statistical check."""

    @property
    def command_id(self) -> str:
        return "verify"

    @property
    def stages(self) -> list[str]:
        return ["verify"]


registry.register_spec(
    CommandSpec(
        id="verify",
        description="Run every verification and write the report",
        parameters=common_parameters("config", "radius", "steps", "seed", "out"),
    )
)
registry.register_handler("verify", VerifyHandler)
