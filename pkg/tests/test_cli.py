"""Tests for the command registry, handlers and the command-line entry point."""

import json
from pathlib import Path

import pytest

from torus_spectra.cli import build_parser, main
from torus_spectra.commands import CommandResult, registry
from torus_spectra.commands.base import EXIT_CONFIG, EXIT_OK
from torus_spectra.normalform import UNITARITY_TOLERANCE

COMMANDS = ["lattice-info", "partition", "normal-form", "spectrum", "verify", "run"]


@pytest.fixture
def circle_config(tmp_path: Path) -> Path:
    """Small configuration for 2 cos x on the unit circle."""
    path = tmp_path / "circle.json"
    config = {
        "lattice": {"basis": [[1.0]], "kappa": [0.0]},
        "potential": {"terms": [{"k": [1], "re": 1.0}, {"k": [-1], "re": 1.0}]},
        "radius": 12,
        "steps": 2,
        "depth": 1,
        "quasimode_trials": 20,
        "output_dir": str(tmp_path / "configured"),
    }
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


def test_registry_lists_commands() -> None:
    """Test that every command has a spec and a handler."""
    assert sorted(registry.get_all_command_ids()) == sorted(COMMANDS)
    for command_id in COMMANDS:
        spec = registry.get_spec(command_id)
        handler = registry.get_handler(command_id)
        assert spec is not None and handler is not None
        assert handler().command_id == command_id
        assert "--config (required)" in spec.format_help()
    assert registry.get_handler("plot") is None


def test_parser_flags() -> None:
    """Test that the generated parser understands the shared flags."""
    args = build_parser().parse_args(["run", "--config", "c.json", "--radius", "8", "--emit-plot-data"])
    assert args.command == "run"
    assert args.radius == 8.0
    assert args.emit_plot_data
    assert not args.verify_only
    with pytest.raises(SystemExit):
        build_parser().parse_args(["lattice-info", "--config", "c.json", "--steps", "2"])


def test_missing_config_parameter() -> None:
    """Test that a handler without a config path reports a configuration error."""
    result = registry.get_handler("run")().execute({})
    assert isinstance(result, CommandResult)
    assert not result.success
    assert result.exit_code == EXIT_CONFIG
    assert result.diagnostics == [{"field": "config", "message": "missing"}]


def test_invalid_config_exit_code(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    """Test that an invalid configuration exits with status 2 and prints diagnostics."""
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"lattice": {"basis": [[1.0]]}, "radius": -1}), encoding="utf-8")
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG
    report = json.loads(capsys.readouterr().err)
    assert report["diagnostics"][0]["field"] == "radius"


def test_lattice_info_writes_one_file(circle_config: Path, tmp_path: Path) -> None:
    """Test that lattice-info writes only lattice.json, into the --out directory."""
    out = tmp_path / "info"
    assert main(["lattice-info", "--config", str(circle_config), "--out", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["lattice.json"]
    data = json.loads((out / "lattice.json").read_text(encoding="utf-8"))
    assert data["meta"]["version"]
    assert len(data["meta"]["config_hash"]) == 64


def test_progress_lines_follow_verbose_flag(circle_config: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    """Test that progress lines are printed only with --verbose."""
    assert main(["lattice-info", "--config", str(circle_config), "--out", str(tmp_path / "quiet")]) == EXIT_OK
    assert "🚀" not in capsys.readouterr().out
    assert main(["lattice-info", "--config", str(circle_config), "--out", str(tmp_path / "loud"), "--verbose"]) == EXIT_OK
    assert "🚀" in capsys.readouterr().out


def test_full_run(circle_config: Path, tmp_path: Path) -> None:
    """Test that the run command writes every artifact with a clean verification."""
    out = tmp_path / "run"
    assert main(["run", "--config", str(circle_config), "--out", str(out), "--emit-plot-data"]) == EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert names == {
        "lattice.json",
        "partition.json",
        "plot.json",
        "nf.json",
        "nf_decay.csv",
        "tree.json",
        "spectrum.csv",
        "verify.json",
    }
    assert not (tmp_path / "configured").exists()

    verify = json.loads((out / "verify.json").read_text(encoding="utf-8"))["verify"]
    assert verify["unitarity_defect"] <= UNITARITY_TOLERANCE
    assert verify["spectral_conservation_held"]
    assert verify["labeling"]["bijection"]
    assert verify["quasimode"]["counterexamples"] == []
    assert verify["directional"] is None
    assert all(check["held"] for check in verify["weyl"])
    assert verify["reduction"]["coercivity_violations"] == []

    spectrum = (out / "spectrum.csv").read_text(encoding="utf-8").splitlines()
    assert spectrum[0].startswith("# torus-spectra")
    assert len(spectrum) == 2 + 25


def test_verify_only(circle_config: Path, tmp_path: Path) -> None:
    """Test that --verify-only writes verify.json alone."""
    out = tmp_path / "verify"
    assert main(["run", "--config", str(circle_config), "--out", str(out), "--verify-only"]) == EXIT_OK
    assert [p.name for p in out.iterdir()] == ["verify.json"]
