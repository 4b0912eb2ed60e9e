"""Tests for the iterated normal-form conjugation."""

import numpy as np
import pytest

from torus_spectra.errors import CutoffLeakError, InsufficientDataError, InsufficientMarginError, SolverFailureError
from torus_spectra.lattice import Lattice, build_lattice, lattice_ball, lattice_cube
from torus_spectra.normalform import (
    NormalFormOutput,
    NormalFormState,
    STEP_UNITARITY_TOLERANCE,
    UNITARITY_TOLERANCE,
    decay_target,
    fit_remainder_decay,
    homological_generator,
    interior_rows,
    normal_form,
    normal_form_step,
    remainder_profile,
    verify_block_invariance,
    _step_unitary,
)
from torus_spectra.partition import PartitionParams, extended_partition
from torus_spectra.symbols import FourierSymbol, TruncatedOperator


def _cosine(amplitude: float) -> FourierSymbol:
    return FourierSymbol.from_terms({(1,): amplitude, (-1,): amplitude})


@pytest.fixture(scope="module")
def circle_output() -> NormalFormOutput:
    """Two steps for 2 cos x on [-40, 40]."""
    lattice = build_lattice([[1.0]])
    return normal_form(lattice, _cosine(1.0), lattice_ball(lattice, 40.0), PartitionParams(), 2)


def test_unitary_and_conjugation(circle_output: NormalFormOutput) -> None:
    """Test that U is unitary and conjugates H to L + N + R."""
    assert circle_output.unitarity_defect() <= UNITARITY_TOLERANCE
    assert circle_output.conjugation_defect() <= 1e-10
    assert np.allclose(circle_output.normal.matrix, circle_output.normal.matrix.conj().T)


def test_spectrum_is_conserved(circle_output: NormalFormOutput) -> None:
    """Test that L + N + R has the spectrum of H."""
    before = np.linalg.eigvalsh(circle_output.hamiltonian.matrix)
    conjugated = circle_output.laplacian.matrix + circle_output.normal.matrix + circle_output.remainder.matrix
    assert np.allclose(np.linalg.eigvalsh(conjugated), before, atol=1e-9)


def test_normal_form_is_local(circle_output: NormalFormOutput) -> None:
    """Test that off-diagonal terms of N only survive near the origin."""
    assert circle_output.offdiagonal_support_radius() <= 2.0
    assert circle_output.to_json()["interior_size"] == int(circle_output.interior.sum())


def test_second_order_shift(circle_output: NormalFormOutput) -> None:
    """Test that N picks up the second-order shift 1/9 - 1/11 at xi = 5."""
    row = int(circle_output.laplacian.locate([[5]])[0])
    assert circle_output.normal.matrix[row, row].real == pytest.approx(1 / 9 - 1 / 11, abs=1e-3)


def test_zero_potential_is_trivial() -> None:
    """Test that V = 0 leaves everything untouched."""
    lattice = build_lattice(np.eye(2), [0.3, 0.2])
    output = normal_form(lattice, FourierSymbol.zero(2), lattice_ball(lattice, 6.0), PartitionParams(), 2)
    assert np.array_equal(output.unitary, np.eye(output.index.shape[0]))
    assert not np.any(output.normal.matrix)
    assert not np.any(output.remainder.matrix)
    with pytest.raises(InsufficientDataError) as error:
        fit_remainder_decay(output)
    assert error.value.exact


def test_remainder_shrinks() -> None:
    """Test that a small potential leaves a smaller remainder after each step."""
    lattice = build_lattice([[1.0]], [0.25])
    output = normal_form(lattice, _cosine(0.1), lattice_ball(lattice, 30.0), PartitionParams(), 2)
    peaks = [float(norms[output.interior].max()) for norms in output.row_norms]
    assert peaks[2] < peaks[1] < peaks[0]


def test_remainder_decays_in_xi(circle_output: NormalFormOutput) -> None:
    """Test that remainder row norms decay with the frequency, faster after more steps."""
    first = fit_remainder_decay(circle_output, 1)
    second = fit_remainder_decay(circle_output, 2)
    assert first.exponent < -0.5
    assert second.exponent < first.exponent
    assert decay_target(PartitionParams(), 2) == pytest.approx(-2.0)


def test_remainder_profile(circle_output: NormalFormOutput) -> None:
    """Test the decay table rows."""
    profile = remainder_profile(circle_output)
    assert len(profile) == 3 * int(circle_output.interior.sum())
    assert {step for _, _, step in profile} == {0, 1, 2}


def test_insufficient_margin() -> None:
    """Test that a box too small for the requested steps is rejected."""
    lattice = build_lattice([[1.0]])
    with pytest.raises(InsufficientMarginError):
        normal_form(lattice, _cosine(1.0), lattice_ball(lattice, 2.0), PartitionParams(), 2)


def test_interior_rows() -> None:
    """Test the interior of a ball-shaped box."""
    lattice = build_lattice([[1.0]])
    index = lattice_ball(lattice, 10.0)
    interior = interior_rows(lattice, index, 4.0)
    assert index[interior, 0].tolist() == list(range(-6, 7))


def test_block_invariance() -> None:
    """Test that N never couples different classes of the partition."""
    lattice = build_lattice([[1.0]])
    output = normal_form(lattice, _cosine(1.0), lattice_ball(lattice, 12.0), PartitionParams(), 2)
    partition = extended_partition(lattice, 10, PartitionParams())
    assert verify_block_invariance(output, partition) == 0.0


def test_subset_leak() -> None:
    """Test that U does not mix an invariant subset with its complement."""
    lattice = build_lattice([[1.0]])
    potential = FourierSymbol.from_terms({(2,): 0.5, (-2,): 0.5})
    index = lattice_ball(lattice, 20.0)
    even = index[:, 0] % 2 == 0
    output = normal_form(lattice, potential, index, PartitionParams(), 2, subset=even)
    assert output.subset_leak is not None
    assert output.subset_leak <= 1e-14


def _coupling(lattice: Lattice, index: np.ndarray, a: int, b: int, value: float) -> TruncatedOperator:
    matrix = np.zeros((index.shape[0], index.shape[0]), dtype=complex)
    rows = {int(x): i for i, x in enumerate(index[:, 0])}
    matrix[rows[a], rows[b]] = matrix[rows[b], rows[a]] = value
    return TruncatedOperator(lattice, index, matrix, "coupling")


def test_homological_generator_solves_commutator() -> None:
    """Test that i[L, G] + R = 0 for a nonresonant coupling."""
    lattice = build_lattice([[1.0]], [0.25])
    index = lattice_cube(1, 10)
    r_nr = _coupling(lattice, index, 5, 6, 0.3)
    generator = homological_generator(lattice, r_nr, PartitionParams())
    eigen = np.diag((index[:, 0] + 0.25) ** 2)
    assert np.allclose(1j * (eigen @ generator - generator @ eigen) + r_nr.matrix, 0.0)
    assert np.allclose(generator, generator.conj().T)


def test_homological_generator_detects_leak() -> None:
    """Test that a coupling of two degenerate modes cannot be eliminated."""
    lattice = build_lattice([[1.0]], [0.5])
    index = lattice_cube(1, 4)
    with pytest.raises(CutoffLeakError):
        homological_generator(lattice, _coupling(lattice, index, 0, -1, 0.3), PartitionParams())


def test_single_step_conjugates() -> None:
    """Test that one step returns a unitary with U H U* = L + N' + R'."""
    lattice = build_lattice([[1.0]], [0.25])
    index = lattice_ball(lattice, 15.0)
    potential = _coupling(lattice, index, 5, 6, 0.1).matrix + _coupling(lattice, index, -3, -2, 0.1).matrix
    eigen = (index[:, 0] + 0.25) ** 2
    state = NormalFormState(index, eigen, np.zeros_like(potential), potential)
    following, unitary = normal_form_step(lattice, state, PartitionParams())
    hamiltonian = np.diag(eigen) + potential
    assert np.allclose(unitary @ unitary.conj().T, np.eye(index.shape[0]), atol=1e-12)
    assert np.allclose(unitary @ hamiltonian @ unitary.conj().T, following.total, atol=1e-12)
    assert np.abs(following.remainder).max() < np.abs(potential).max()


def test_step_unitary_tolerance() -> None:
    """Test that a step unitary off by 2e-11 is rejected although the accumulated bound would pass it."""
    assert STEP_UNITARITY_TOLERANCE == 1e-12 < UNITARITY_TOLERANCE
    assert np.allclose(_step_unitary(np.zeros((3, 3), dtype=complex)), np.eye(3))
    with pytest.raises(SolverFailureError):
        _step_unitary(1e-11j * np.eye(3))
