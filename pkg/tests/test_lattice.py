"""Tests for lattice geometry and the metric constants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_spectra.errors import ConfigError, DegenerateLatticeError, DependentVectorsError
from torus_spectra.lattice import (
    CoVector,
    Lattice,
    bracket,
    build_lattice,
    coercivity_constant,
    dual_norm,
    lattice_ball,
    lattice_cube,
    load_lattice,
    min_parallelepiped_volume,
    volume_bound,
)

HEXAGONAL = [[1.0, 0.0], [0.5, math.sqrt(3) / 2]]


def test_euclidean_coercivity() -> None:
    """Test that Z^2 has coercivity one with witness (1, 0)."""
    lattice = build_lattice(np.eye(2))
    assert lattice.coercivity == pytest.approx(1.0)
    assert lattice.coercivity_witness.tolist() == [1, 0]
    assert lattice.volume.exact == pytest.approx(1.0)


def test_hexagonal_metric_and_coercivity() -> None:
    """Test the dual metric and coercivity constant of the hexagonal lattice."""
    lattice = build_lattice(HEXAGONAL)
    expected = np.array([[4 / 3, -2 / 3], [-2 / 3, 4 / 3]])
    assert np.allclose(lattice.metric_g_star, expected)
    assert lattice.coercivity == pytest.approx(4 / 3)
    assert lattice.coercivity_witness.tolist() == [1, 0]


def test_constants_match_lattice_attributes() -> None:
    """Test the standalone constant functions against the cached lattice attributes."""
    lattice = build_lattice(HEXAGONAL)
    constant, witness = coercivity_constant(lattice)
    assert constant == pytest.approx(lattice.coercivity)
    assert float(witness @ lattice.metric_g_star @ witness) == pytest.approx(4 / 3)
    volume = min_parallelepiped_volume(lattice)
    assert volume.bound == pytest.approx(lattice.min_volume)
    assert volume.exact == pytest.approx(lattice.volume.exact)


def test_degenerate_basis_rejected() -> None:
    """Test that linearly dependent rows raise DegenerateLatticeError."""
    with pytest.raises(DegenerateLatticeError):
        build_lattice([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(DegenerateLatticeError):
        build_lattice([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def test_kappa_outside_unit_cube_rejected() -> None:
    """Test that kappa must lie in [0, 1)^d."""
    with pytest.raises(ValueError, match="kappa"):
        build_lattice(np.eye(2), [1.0, 0.0])
    with pytest.raises(ValueError, match="components"):
        build_lattice(np.eye(2), [0.1])


def test_lattice_ball_count() -> None:
    """Test the number of integer points in the Euclidean disc of radius 5."""
    ball = lattice_ball(build_lattice(np.eye(2)), 5.0)
    assert ball.shape == (81, 2)
    assert np.all(np.sum(ball**2, axis=1) <= 25)


def test_lattice_ball_respects_kappa() -> None:
    """Test that the ball is centred at -kappa."""
    lattice = build_lattice([[1.0]], [0.5])
    ball = lattice_ball(lattice, 1.0)
    assert sorted(ball[:, 0].tolist()) == [-1, 0]


def test_lattice_cube() -> None:
    """Test the size and order of the sup-norm cube."""
    cube = lattice_cube(2, 1)
    assert cube.shape == (9, 2)
    assert cube[0].tolist() == [-1, -1]
    assert cube[-1].tolist() == [1, 1]


def test_norms_and_bracket() -> None:
    """Test dual norms and the Japanese bracket on single and stacked covectors."""
    lattice = build_lattice(np.eye(2))
    assert dual_norm(lattice, CoVector.of([3.0, 4.0])) == pytest.approx(5.0)
    assert bracket(lattice, [0.0, 0.0]) == pytest.approx(1.0)
    norms = dual_norm(lattice, np.array([[1.0, 0.0], [0.0, 2.0]]))
    assert np.allclose(norms, [1.0, 2.0])


def test_volume_bound() -> None:
    """Test the span bound and its rejection of dependent vectors."""
    lattice = build_lattice(np.eye(2))
    assert volume_bound(lattice, [[1, 0]], alpha=2.0, n_max=3.0) == pytest.approx(2.0)
    assert volume_bound(lattice, [[1, 0], [0, 1]], alpha=1.0, n_max=3.0) == pytest.approx(6.0)
    with pytest.raises(DependentVectorsError):
        volume_bound(lattice, [[1, 0], [2, 0]], alpha=1.0, n_max=1.0)


def test_min_volume_is_formula_bound() -> None:
    """Test that the reported volume constant never exceeds the exact minimum."""
    lattice = build_lattice(HEXAGONAL)
    assert lattice.volume.exact is not None
    assert 0 < lattice.min_volume <= lattice.volume.exact + 1e-12


def test_high_dimension_has_no_exact_volume() -> None:
    """Test that only the formula bound is computed for d > 3."""
    lattice = build_lattice(np.eye(4))
    assert lattice.volume.exact is None
    assert lattice.volume.value == lattice.volume.bound


def test_from_metric_round_trip() -> None:
    """Test that a lattice built from a metric reproduces it."""
    metric = np.array([[2.0, 0.5], [0.5, 1.0]])
    lattice = Lattice.from_metric(metric)
    assert np.allclose(lattice.metric_g, metric)
    with pytest.raises(DegenerateLatticeError):
        Lattice.from_metric([[1.0, 2.0], [2.0, 1.0]])


def test_load_lattice() -> None:
    """Test JSON loading and its ConfigError diagnostics."""
    lattice = load_lattice({"basis": [[1.0, 0.0], [0.0, 2.0]], "kappa": [0.25, 0.0]})
    assert lattice.dimension == 2
    assert lattice.kappa.tolist() == [0.25, 0.0]
    with pytest.raises(ConfigError) as missing:
        load_lattice({})
    assert missing.value.diagnostics[0]["field"] == "lattice.basis"
    with pytest.raises(ConfigError):
        load_lattice({"basis": [[1.0, 1.0], [1.0, 1.0]]})


def test_to_json_fields() -> None:
    """Test the serialised lattice constants."""
    data = build_lattice(np.eye(2)).to_json()
    assert data["coercivity"] == pytest.approx(1.0)
    assert data["coercivity_witness"] == [1, 0]
    assert data["dimension"] == 2


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(min_value=-0.3, max_value=0.3, allow_nan=False), min_size=4, max_size=4),
)
def test_coercivity_is_minimum(perturbation: list[float]) -> None:
    """Test that no short integer vector beats the coercivity constant."""
    basis = np.eye(2) + np.array(perturbation).reshape(2, 2)
    lattice = build_lattice(basis)
    cube = lattice_cube(2, 4)
    cube = cube[np.any(cube != 0, axis=1)]
    values = np.einsum("ni,ij,nj->n", cube, lattice.metric_g_star, cube)
    assert values.min() >= lattice.coercivity * (1 - 1e-9)
    witness = lattice.coercivity_witness
    assert witness @ lattice.metric_g_star @ witness == pytest.approx(lattice.coercivity)
