"""Command specifications from which the argument parser is generated."""

from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass
class CommandParameter:
    """Specification for a command-line flag.

    Attributes:
        name: Flag name without dashes, as used in the parsed parameters
        required: Whether the flag must be given
        instruction: Help text
        kind: "str", "int", "float" or "flag"
        default: Value when the flag is absent
    """

    name: str
    required: bool
    instruction: str
    kind: str = "str"
    default: Optional[Any] = None

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


COMMON_PARAMETERS = [
    CommandParameter("config", True, "Path of the JSON run configuration"),
    CommandParameter("radius", False, "Normal-form box radius R (overrides the config)", "float"),
    CommandParameter("steps", False, "Number of normal-form steps (overrides the config)", "int"),
    CommandParameter("seed", False, "Seed of the randomized suites (overrides the config)", "int"),
    CommandParameter("out", False, "Output directory (overrides the config)"),
    CommandParameter("emit_plot_data", False, "Also write plot.json with {xi, class} records", "flag", False),
    CommandParameter("verify_only", False, "Compute everything but write only verify.json", "flag", False),
]


@dataclass
class CommandSpec:
    """Specification for a CLI command.

    Attributes:
        id: Command name as typed on the command line
        description: One-line help
        parameters: Accepted flags
    """

    id: str
    description: str
    parameters: list[CommandParameter] = field(default_factory=lambda: list(COMMON_PARAMETERS))

    def format_help(self) -> str:
        """Plain-text summary of the command and its flags."""
        lines = [f"{self.id}: {self.description}"]
        for param in self.parameters:
            req_text = "required" if param.required else "optional"
            lines.append(f"  {param.flag} ({req_text}) {param.instruction}")
        return "\n".join(lines)


def common_parameters(*names: str) -> list[CommandParameter]:
    """The shared flags with the given names, in their canonical order."""
    return [param for param in COMMON_PARAMETERS if param.name in names]
