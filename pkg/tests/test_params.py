"""Tests for resonance parameters and the C_s/D_s schedule."""

import pytest

from torus_spectra.errors import ParamsInvalidError, ParamsInvalidForSublatticeError
from torus_spectra.partition.params import PartitionParams


def test_defaults_are_admissible() -> None:
    """Test that the default parameters pass validation in low dimensions."""
    params = PartitionParams()
    for dimension in (1, 2):
        params.validate(dimension)
        assert params.violations(dimension) == []


def test_rejects_large_delta() -> None:
    """Test that delta = 0.9, epsilon = 0.1, tau = 1.1 is rejected in d = 2."""
    params = PartitionParams(epsilon=0.1, delta=0.9, tau=1.1)
    messages = [v["message"] for v in params.violations(2)]
    assert any("must be < 1" in m for m in messages)
    with pytest.raises(ParamsInvalidError):
        params.validate(2)
    with pytest.raises(ParamsInvalidForSublatticeError):
        params.validate(2, sublattice=True)


def test_rejects_small_tau() -> None:
    """Test that tau must exceed d - 1."""
    params = PartitionParams(epsilon=0.01, delta=0.5, tau=1.5)
    assert any(v["field"] == "params.tau" for v in params.violations(3))


def test_rejects_epsilon_against_delta() -> None:
    """Test the constraint epsilon (tau + 1) <= delta."""
    params = PartitionParams(epsilon=0.05, delta=0.1, tau=1.1)
    assert any(v["field"] == "params.epsilon" for v in params.violations(1))


def test_auto_schedule_doubles_on_escalation() -> None:
    """Test that the automatic schedule is 2^s and doubles per escalation."""
    params = PartitionParams()
    assert [params.constant_c(s) for s in range(3)] == [1.0, 2.0, 4.0]
    escalated = params.escalated().escalated()
    assert escalated.escalations == 2
    assert [escalated.constant_d(s) for s in range(3)] == [1.0, 8.0, 16.0]


def test_explicit_schedule() -> None:
    """Test explicit constants, their geometric continuation and escalation."""
    params = PartitionParams.from_json({"C": [3.0], "D": [2.0, 5.0]})
    assert not params.auto_escalate
    assert params.constant_c(1) == 3.0
    assert params.constant_c(2) == 6.0
    assert params.constant_d(2) == 5.0
    assert params.escalated().constant_c(1) == 6.0


def test_schedule_must_increase() -> None:
    """Test that schedules must be increasing from 1."""
    params = PartitionParams.from_json({"C": [0.5]})
    assert any(v["field"] == "params.C" for v in params.violations(1))
    flat = PartitionParams.from_json({"C": [2.0, 2.0], "D": [1.0]})
    fields = [v["field"] for v in flat.violations(1)]
    assert "params.C" in fields
    assert "params.D" in fields
    assert not PartitionParams.from_json({"C": [2.0, 3.0], "D": [1.5]}).violations(1)


def test_delta_levels_and_report() -> None:
    """Test the delta_s recursion and the schedule report."""
    params = PartitionParams(epsilon=0.05, delta=0.5, tau=1.1)
    report = params.schedule(2)
    assert report["delta_s"][1] == pytest.approx(0.5 + 4.1 * 0.05)
    assert report["C"] == [1.0, 2.0, 4.0]
    assert report["escalations"] == 0
