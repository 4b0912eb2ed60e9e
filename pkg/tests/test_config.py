"""Tests for run configuration loading and validation."""

import json
from pathlib import Path

import pytest

from torus_spectra.config import DEFAULTS, STAGES, config_hash, load_config, parse_config
from torus_spectra.errors import ConfigError

PLANE = {
    "lattice": {"basis": [[1.0, 0.0], [0.0, 1.0]], "kappa": [0.3, 0.2]},
    "potential": {"terms": [{"k": [1, 0], "re": 1.0}, {"k": [-1, 0], "re": 1.0}]},
}


def test_defaults() -> None:
    """Test that a lattice and potential alone give the default run."""
    config = parse_config(PLANE)
    assert config.dimension == 2
    assert config.radius == 20.0
    assert config.steps == 2
    assert config.commands == list(STAGES)
    assert config.partition_radius is None
    assert config.params.auto_escalate
    assert config.output_dir == Path("out")
    assert config.potential.support_radius() == 1.0


def test_missing_potential_is_zero() -> None:
    """Test that an absent potential means V = 0."""
    config = parse_config({"lattice": {"basis": [[2.0]]}})
    assert not config.potential.terms


def test_inadmissible_params_are_reported() -> None:
    """Test that delta = 0.9 and epsilon = 0.1 are rejected in dimension 2."""
    with pytest.raises(ConfigError) as error:
        parse_config({**PLANE, "params": {"epsilon": 0.1, "delta": 0.9, "tau": 1.1}})
    fields = [d["field"] for d in error.value.diagnostics]
    assert "params" in fields


def test_every_problem_is_collected() -> None:
    """Test that validation reports all problems at once."""
    with pytest.raises(ConfigError) as error:
        parse_config({**PLANE, "radius": 0.5, "steps": 1.5, "commands": ["spectrum", "plot"], "sobolev_order": 2})
    fields = {d["field"] for d in error.value.diagnostics}
    assert {"radius", "steps", "commands", "sobolev_order"} <= fields


def test_bad_lattice_stops_potential_parsing() -> None:
    """Test that a broken lattice is reported without a spurious potential error."""
    with pytest.raises(ConfigError) as error:
        parse_config({"lattice": {}, "potential": PLANE["potential"]})
    assert all(d["field"] != "potential" for d in error.value.diagnostics)


def test_overrides_take_precedence() -> None:
    """Test that non-None overrides replace configured values."""
    config = parse_config({**PLANE, "radius": 12}, {"radius": 8.0, "steps": None, "output_dir": "elsewhere"})
    assert config.radius == 8.0
    assert config.steps == DEFAULTS["steps"]
    assert config.output_dir == Path("elsewhere")


def test_hash_ignores_output_dir() -> None:
    """Test that the hash depends on the computation only."""
    first = parse_config({**PLANE, "output_dir": "a"})
    second = parse_config({**PLANE, "output_dir": "b"})
    third = parse_config({**PLANE, "radius": 21})
    assert first.hash == second.hash
    assert first.hash != third.hash
    assert len(first.hash) == 64


def test_config_hash_is_key_order_independent() -> None:
    """Test the canonical dump behind the hash."""
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})


def test_load_config(tmp_path: Path) -> None:
    """Test reading a configuration file."""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({**PLANE, "radius": 10}), encoding="utf-8")
    config = load_config(path, {"seed": 3})
    assert config.radius == 10.0
    assert config.seed == 3


def test_load_config_errors(tmp_path: Path) -> None:
    """Test the errors for missing, malformed and non-object files."""
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError) as error:
        load_config(broken)
    assert error.value.diagnostics[0]["message"].startswith("line 1")
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(listing)
