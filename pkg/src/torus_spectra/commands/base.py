"""Base classes for command handlers."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Optional

from torus_spectra.config import RunConfig, load_config
from torus_spectra.errors import ConfigError, TorusSpectraError
from torus_spectra.pipeline import Pipeline

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PIPELINE = 3

OVERRIDE_KEYS = {"radius": "radius", "steps": "steps", "seed": "seed", "out": "output_dir"}


@dataclass
class CommandResult:
    """Result of a command execution.

    Attributes:
        success: Whether the command completed
        output: Paths of the written artifacts
        error: Error message if success is False
        exit_code: Process exit status
        diagnostics: Machine-readable configuration problems
    """

    success: bool
    output: list[str] = field(default_factory=list)
    error: Optional[str] = None
    exit_code: int = EXIT_OK
    diagnostics: list[dict[str, Any]] = field(default_factory=list)

    @classmethod
    def ok(cls, output: list[str]) -> "CommandResult":
        """Create a successful result."""
        return cls(success=True, output=output)

    @classmethod
    def err(
        cls, error_msg: str, exit_code: int = EXIT_PIPELINE, diagnostics: Optional[list[dict[str, Any]]] = None
    ) -> "CommandResult":
        """Create an error result."""
        return cls(success=False, error=error_msg, exit_code=exit_code, diagnostics=diagnostics or [])


class BaseCommandHandler(ABC):
    """Base class for command handlers.

    Subclasses name the command and the pipeline stages it runs; loading the
    configuration and mapping errors to exit codes happens here.
    """

    def __init__(self, verbose: bool = False) -> None:
        """Initialize the handler.

        Args:
            verbose: Whether the pipeline prints progress lines
        """
        self.verbose = verbose

    @property
    @abstractmethod
    def command_id(self) -> str:
        """Return the command ID this handler implements."""
        pass

    @property
    @abstractmethod
    def stages(self) -> list[str]:
        """Pipeline stages the command runs; empty means the configured ones."""
        pass

    def load(self, params: dict[str, Any]) -> RunConfig:
        """Load the configuration named by ``params["config"]`` with flag overrides.

        Raises:
            ConfigError: If the parameter is missing or the file is invalid
        """
        path = params.get("config")
        if not path:
            msg = "Missing required parameter: config"
            raise ConfigError(msg, [{"field": "config", "message": "missing"}])
        overrides = {key: params.get(flag) for flag, key in OVERRIDE_KEYS.items()}
        return load_config(path, overrides)

    def execute(self, params: dict[str, Any]) -> CommandResult:
        """Run the command.

        Args:
            params: Parsed flags (``config`` required; ``radius``, ``steps``, ``seed``,
                ``out``, ``emit_plot_data``, ``verify_only`` optional)

        Returns:
            CommandResult with the written artifact paths or the error and exit code
        """
        try:
            config = self.load(params)
        except ConfigError as e:
            return CommandResult.err(str(e), EXIT_CONFIG, e.diagnostics)
        pipeline = Pipeline(config, verbose=self.verbose, emit_plot_data=bool(params.get("emit_plot_data")))
        try:
            written = pipeline.run(self.stages or None, verify_only=bool(params.get("verify_only")))
        except TorusSpectraError as e:
            logger.warning("Command %s failed: %s", self.command_id, e)
            return CommandResult.err(f"{type(e).__name__}: {e}", EXIT_PIPELINE)
        return CommandResult.ok([str(path) for path in written])
