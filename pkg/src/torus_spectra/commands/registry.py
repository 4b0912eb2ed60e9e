"""Command registry holding the specification and handler of every command."""

import threading
from typing import Optional

from torus_spectra.commands.specs import CommandSpec


class CommandRegistry:
    """Registry of command specifications and handler classes.

    A singleton, so that handler modules can register themselves on import.
    """

    _instance: Optional["CommandRegistry"] = None
    _lock = threading.Lock()

    def __new__(cls) -> "CommandRegistry":
        """Create or return the singleton instance."""
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super().__new__(cls)
                    cls._instance._initialized = False
        return cls._instance

    def __init__(self) -> None:
        """Initialize the registry if not already initialized."""
        if not getattr(self, "_initialized", False):
            self._specs: dict[str, CommandSpec] = {}
            self._handlers: dict[str, type] = {}
            self._initialized: bool = True

    def register_spec(self, spec: CommandSpec) -> None:
        self._specs[spec.id] = spec

    def register_handler(self, command_id: str, handler_class: type) -> None:
        """Register a handler class (a BaseCommandHandler subclass) for a command."""
        self._handlers[command_id] = handler_class

    def get_spec(self, command_id: str) -> Optional[CommandSpec]:
        return self._specs.get(command_id)

    def get_handler(self, command_id: str) -> Optional[type]:
        return self._handlers.get(command_id)

    def get_all_command_ids(self) -> list[str]:
        """Registered command IDs in registration order."""
        return list(self._specs)


# Global registry instance
registry = CommandRegistry()
