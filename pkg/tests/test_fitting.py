"""Tests for log-log power-law fits."""

import numpy as np
import pytest

from torus_spectra.errors import InsufficientDataError
from torus_spectra.fitting import power_law_fit


def test_exact_power_law() -> None:
    """Test that an exact power law is recovered."""
    x = np.arange(1.0, 21.0)
    fit = power_law_fit(x, 3.0 * x**-1.5)
    assert fit.exponent == pytest.approx(-1.5)
    assert fit.prefactor == pytest.approx(3.0)
    assert fit.points == 20
    low, high = fit.band()
    assert low <= fit.exponent <= high


def test_vanishing_data_is_exact() -> None:
    """Test that all-zero values are reported as exact."""
    with pytest.raises(InsufficientDataError) as error:
        power_law_fit(np.arange(1.0, 11.0), np.zeros(10))
    assert error.value.exact


def test_too_few_points() -> None:
    """Test that sparse data are rejected without the exact flag."""
    with pytest.raises(InsufficientDataError) as error:
        power_law_fit([1.0, 2.0, 3.0], [1.0, 0.5, 0.3])
    assert not error.value.exact
    with pytest.raises(InsufficientDataError):
        power_law_fit(np.ones(10), np.arange(1.0, 11.0))
