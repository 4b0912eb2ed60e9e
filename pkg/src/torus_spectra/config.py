"""Run configuration: JSON loading, validation and the reproducibility hash."""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from torus_spectra.errors import ConfigError
from torus_spectra.lattice import Lattice, load_lattice
from torus_spectra.partition.params import PartitionParams
from torus_spectra.symbols import FourierSymbol

STAGES = ("lattice-info", "partition", "normal-form", "spectrum", "verify")

DEFAULTS: dict[str, Any] = {
    "params": {"epsilon": 0.05, "delta": 0.5, "tau": 1.1, "C": "auto", "D": "auto"},
    "radius": 20,
    "steps": 2,
    "commands": list(STAGES),
    "output_dir": "out",
    "seed": 0,
    "label_window": 0.5,
    "cluster_exponent": 1,
    "depth": 2,
    "partition_radius": None,
    "quasimode_trials": 1000,
    "sobolev_order": -4.0,
}


@dataclass
class RunConfig:
    """A validated run configuration.

    Attributes:
        lattice: The lattice with its Floquet parameter
        potential: The potential V
        params: Resonance parameters
        radius: Normal-form box radius R, the box being ||xi + kappa|| <= R
        steps: Number of normal-form steps
        commands: Pipeline stages to run, in order
        output_dir: Directory receiving the artifacts
        seed: Seed of the randomized suites
        label_window: Cluster half-width L used for labeling
        cluster_exponent: Gap exponent N of the cluster construction
        depth: Maximal dimensional-reduction depth
        partition_radius: Sup-norm radius of the partition cube (defaults to the box radius)
        quasimode_trials: Trials of the quasimode soundness suite
        sobolev_order: Negative Sobolev order of the eigenfunction norms
        resolved: The resolved JSON mapping the hash is computed from
    """

    lattice: Lattice
    potential: FourierSymbol
    params: PartitionParams
    radius: float = 20.0
    steps: int = 2
    commands: list[str] = field(default_factory=lambda: list(STAGES))
    output_dir: Path = Path("out")
    seed: int = 0
    label_window: float = 0.5
    cluster_exponent: int = 1
    depth: int = 2
    partition_radius: Optional[int] = None
    quasimode_trials: int = 1000
    sobolev_order: float = -4.0
    resolved: dict[str, Any] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.lattice.dimension

    @property
    def hash(self) -> str:
        return config_hash({k: v for k, v in self.resolved.items() if k != "output_dir"})


def config_hash(resolved: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON dump of a resolved configuration."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _number(
    data: dict[str, Any],
    key: str,
    kind: type,
    diagnostics: list[dict[str, Any]],
    minimum: Optional[float] = None,
    required: bool = True,
) -> Any:
    value = data.get(key)
    if value is None:
        if required:
            diagnostics.append({"field": key, "message": "missing"})
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or (kind is int and not float(value).is_integer()):
        diagnostics.append({"field": key, "message": f"expected {kind.__name__}, got {value!r}"})
        return None
    if minimum is not None and value < minimum:
        diagnostics.append({"field": key, "message": f"must be at least {minimum}, got {value}"})
        return None
    return kind(value)


def parse_config(  # noqa: C901
    mapping: dict[str, Any], overrides: Optional[dict[str, Any]] = None
) -> RunConfig:
    """Validate a configuration mapping, collecting every problem.

    Args:
        mapping: Parsed JSON configuration
        overrides: Values taking precedence over the mapping (command-line flags);
            ``None`` entries are ignored

    Raises:
        ConfigError: With one diagnostic per problem found
    """
    resolved = {**DEFAULTS, **mapping}
    resolved.update({k: v for k, v in (overrides or {}).items() if v is not None})
    diagnostics: list[dict[str, Any]] = []

    lattice: Optional[Lattice] = None
    try:
        lattice = load_lattice(resolved.get("lattice") or {})
    except ConfigError as e:
        diagnostics.extend(e.diagnostics)

    potential: Optional[FourierSymbol] = None
    if lattice is not None:
        try:
            potential = FourierSymbol.from_json(resolved.get("potential") or {"terms": []}, lattice.dimension)
        except ConfigError as e:
            diagnostics.extend(e.diagnostics)
        except ValueError as e:
            diagnostics.append({"field": "potential", "message": str(e)})

    params: Optional[PartitionParams] = None
    try:
        params = PartitionParams.from_json(dict(resolved.get("params") or {}))
    except (TypeError, ValueError) as e:
        diagnostics.append({"field": "params", "message": str(e)})
    if params is not None and lattice is not None:
        diagnostics.extend(params.violations(lattice.dimension))

    radius = _number(resolved, "radius", float, diagnostics, minimum=1.0)
    steps = _number(resolved, "steps", int, diagnostics, minimum=0)
    seed = _number(resolved, "seed", int, diagnostics, minimum=0)
    window = _number(resolved, "label_window", float, diagnostics)
    if window is not None and window <= 0:
        diagnostics.append({"field": "label_window", "message": "must be positive"})
    exponent = _number(resolved, "cluster_exponent", int, diagnostics, minimum=0)
    depth = _number(resolved, "depth", int, diagnostics, minimum=0)
    cube = _number(resolved, "partition_radius", int, diagnostics, minimum=5, required=False)
    trials = _number(resolved, "quasimode_trials", int, diagnostics, minimum=0)
    order = _number(resolved, "sobolev_order", float, diagnostics)
    if order is not None and order > 0:
        diagnostics.append({"field": "sobolev_order", "message": "must be <= 0"})

    commands = resolved.get("commands")
    if not isinstance(commands, list) or not all(isinstance(c, str) for c in commands):
        diagnostics.append({"field": "commands", "message": "expected a list of stage names"})
        commands = []
    unknown = [c for c in commands if c not in STAGES]
    if unknown:
        diagnostics.append({"field": "commands", "message": f"unknown stages {unknown}; known: {list(STAGES)}"})

    if diagnostics:
        msg = f"Invalid configuration ({len(diagnostics)} problems): " + "; ".join(
            f"{d['field']}: {d['message']}" for d in diagnostics
        )
        raise ConfigError(msg, diagnostics)

    if lattice is None or potential is None or params is None:
        msg = "Configuration is missing its lattice, potential or params"
        raise ConfigError(msg, [{"field": "config", "message": msg}])
    return RunConfig(
        lattice=lattice,
        potential=potential,
        params=params,
        radius=radius,
        steps=steps,
        commands=list(commands),
        output_dir=Path(str(resolved["output_dir"])),
        seed=seed,
        label_window=window,
        cluster_exponent=exponent,
        depth=depth,
        partition_radius=cube,
        quasimode_trials=trials,
        sobolev_order=order,
        resolved=resolved,
    )


def load_config(path: "str | Path", overrides: Optional[dict[str, Any]] = None) -> RunConfig:
    """Read and validate a JSON configuration file.

    Raises:
        ConfigError: If the file cannot be read or parsed, or fails validation
    """
    source = Path(path)
    try:
        mapping = json.loads(source.read_text(encoding="utf-8"))
    except OSError as e:
        msg = f"Cannot read configuration {source}: {e}"
        raise ConfigError(msg, [{"field": "config", "message": str(e)}]) from e
    except json.JSONDecodeError as e:
        msg = f"Configuration {source} is not valid JSON: {e}"
        raise ConfigError(msg, [{"field": "config", "message": f"line {e.lineno}: {e.msg}"}]) from e
    if not isinstance(mapping, dict):
        msg = f"Configuration {source} must be a JSON object"
        raise ConfigError(msg, [{"field": "config", "message": "top level is not an object"}])
    return parse_config(mapping, overrides)
