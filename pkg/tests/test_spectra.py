"""Tests for eigensolves, clusters, the quasimode lemma and spectrum labeling."""

import math

import numpy as np
import pytest

from torus_spectra.errors import InsufficientDataError, NotSelfAdjointError, WindowExhaustedError
from torus_spectra.lattice import build_lattice, lattice_ball
from torus_spectra.normalform import NormalFormOutput, normal_form
from torus_spectra.partition import PartitionParams, extended_partition
from torus_spectra.spectra import (
    ClusterDecomposition,
    Eigenpairs,
    LabeledSpectrum,
    asymptotic_fit,
    cluster_count_constant,
    directional_fit,
    eigenfunction_decay_fit,
    eigensolve,
    find_clusters,
    label_eigenvalues,
    neg_sobolev_norm,
    quasimode_match,
    quasimode_suite,
    weyl_count_check,
)
from torus_spectra.submodules import saturate
from torus_spectra.symbols import FourierSymbol, TruncatedOperator


@pytest.fixture(scope="module")
def circle() -> tuple[NormalFormOutput, Eigenpairs]:
    """Normal form and spectrum of -d^2/dx^2 + 2 cos x on [-40, 40]."""
    lattice = build_lattice([[1.0]])
    potential = FourierSymbol.from_terms({(1,): 1.0, (-1,): 1.0})
    output = normal_form(lattice, potential, lattice_ball(lattice, 40.0), PartitionParams(), 2)
    return output, eigensolve(output.hamiltonian)


@pytest.fixture(scope="module")
def free_plane() -> LabeledSpectrum:
    """Labeled spectrum of the free Laplacian on Z^2 with kappa = (0.3, 0.2)."""
    lattice = build_lattice(np.eye(2), [0.3, 0.2])
    output = normal_form(lattice, FourierSymbol.zero(2), lattice_ball(lattice, 10.0), PartitionParams(), 1)
    return label_eigenvalues(eigensolve(output.hamiltonian), output)


def test_eigensolve_residuals(circle: tuple[NormalFormOutput, Eigenpairs]) -> None:
    """Test sorted eigenvalues with orthonormal eigenvectors."""
    output, eigs = circle
    assert eigs.size == output.index.shape[0]
    assert np.all(np.diff(eigs.values) >= 0)
    vectors = eigs.vectors
    assert np.allclose(vectors.conj().T @ vectors, np.eye(eigs.size), atol=1e-10)
    assert np.allclose(output.hamiltonian.matrix @ vectors, vectors * eigs.values, atol=1e-8)


def test_eigensolve_rejects_non_hermitian() -> None:
    """Test that a non-hermitian matrix is refused."""
    lattice = build_lattice([[1.0]])
    op = TruncatedOperator(lattice, np.array([[0], [1]]), np.array([[0, 1], [0, 0]], dtype=complex), "bad")
    with pytest.raises(NotSelfAdjointError):
        eigensolve(op)
    empty = TruncatedOperator(lattice, np.zeros((0, 1), dtype=np.int64), np.zeros((0, 0), dtype=complex))
    assert eigensolve(empty).size == 0


def test_labeled_circle(circle: tuple[NormalFormOutput, Eigenpairs]) -> None:
    """Test the eigenvalue labeled by xi = 5 against second-order perturbation theory."""
    output, eigs = circle
    partition = extended_partition(output.lattice, 10, PartitionParams())
    labeled = label_eigenvalues(eigs, output, partition)
    assert labeled.is_bijection()
    assert labeled.eigenvalue_of([5]) == pytest.approx(25 + 1 / 9 - 1 / 11, abs=1e-3)
    assert labeled.eigenvalue_of([-5]) == pytest.approx(25 + 1 / 9 - 1 / 11, abs=1e-3)
    row = int(np.flatnonzero(labeled.points[:, 0] == 5)[0])
    assert abs(labeled.residuals[row]) < 1e-2
    assert labeled.labels[row] is not None and labeled.labels[row].level == 0
    assert labeled.labels[int(np.flatnonzero(labeled.points[:, 0] == 30)[0])] is None
    with pytest.raises(KeyError):
        labeled.eigenvalue_of([99])


def test_labeled_records(circle: tuple[NormalFormOutput, Eigenpairs]) -> None:
    """Test the spectrum table rows."""
    output, eigs = circle
    labeled = label_eigenvalues(eigs, output)
    records = labeled.records(-2.0)
    assert len(records) == labeled.size
    assert {"xi", "lambda", "prediction", "residual", "hneg_norm", "interior", "ambiguous"} <= set(records[0])
    assert labeled.to_json()["bijection"]


def test_label_rejects_other_box(circle: tuple[NormalFormOutput, Eigenpairs]) -> None:
    """Test that eigenpairs of another box are refused."""
    output, _ = circle
    other = eigensolve(output.hamiltonian.restrict(np.arange(10)))
    with pytest.raises(ValueError):
        label_eigenvalues(other, output)


def test_free_spectrum_is_labeled_exactly(free_plane: LabeledSpectrum) -> None:
    """Test that V = 0 gives lambda_xi = ||xi + kappa||^2 with zero residuals."""
    assert free_plane.is_bijection()
    assert np.allclose(free_plane.residuals, 0.0, atol=1e-12)
    assert free_plane.eigenvalue_of([2, -1]) == pytest.approx(2.3**2 + 0.8**2)
    assert not free_plane.ambiguous.any()
    assert not free_plane.mismatched.any()


def test_vanishing_residuals_are_exact(free_plane: LabeledSpectrum) -> None:
    """Test that a fit over identically zero residuals reports an exact result."""
    exact = LabeledSpectrum(**{**vars(free_plane), "eigenvalues": free_plane.predictions.copy()})
    with pytest.raises(InsufficientDataError) as error:
        asymptotic_fit(exact)
    assert error.value.exact


def test_eigenfunction_decay_of_plane_waves(free_plane: LabeledSpectrum) -> None:
    """Test that plane waves have H^s norm <xi + kappa>^s, close to lambda^(s/2)."""
    norms = free_plane.negative_norms(-2.0)
    brackets = np.sqrt(1.0 + free_plane.eigenvalues)
    assert np.allclose(norms, brackets**-2.0)
    fit = eigenfunction_decay_fit(free_plane, -2.0)
    assert -1.0 < fit.exponent < -0.5


def test_neg_sobolev_norm() -> None:
    """Test the H^s norm of unit vectors."""
    lattice = build_lattice([[1.0]])
    index = np.array([[0], [3]])
    assert neg_sobolev_norm(lattice, index, np.array([0.0, 1.0]), -1.0) == pytest.approx(1 / math.sqrt(10))
    columns = neg_sobolev_norm(lattice, index, np.eye(2), -1.0)
    assert np.allclose(columns, [1.0, 1 / math.sqrt(10)])
    with pytest.raises(ValueError):
        neg_sobolev_norm(lattice, index, np.array([1.0, 0.0]), 1.0)


def test_weyl_counts() -> None:
    """Test the counting bound on the free spectrum of Z^1 and Z^2."""
    plane = build_lattice(np.eye(2))
    values = np.sum(lattice_ball(plane, 5.0) ** 2, axis=1)
    assert weyl_count_check(values, plane, 5.0) == (81, pytest.approx(400.0))
    line = build_lattice([[1.0]])
    count, bound = weyl_count_check(np.arange(-20, 21) ** 2, line, 10.0)
    assert (count, bound) == (21, pytest.approx(40.0))
    assert cluster_count_constant(plane) == pytest.approx(16.0)
    with pytest.raises(ValueError):
        weyl_count_check(values, plane, 1.0, potential_bound=1.0)


def test_find_clusters_example() -> None:
    """Test the greedy construction on a small spectrum."""
    clusters = find_clusters([9, 1.1, 5.05, 1, 5], 0.5)
    assert len(clusters) == 3
    assert clusters.intervals.tolist() == [[1.0, 1.1], [5.0, 5.05], [9.0, 9.0]]
    assert clusters.counts.tolist() == [2, 2, 1]
    assert clusters.members(1) == slice(2, 4)
    assert clusters.invariant_violations(8.0, 1) == []
    assert clusters.to_json()["clusters"][-1]["gap"] is None


def test_find_clusters_failures() -> None:
    """Test the window and gap failures."""
    with pytest.raises(ValueError):
        find_clusters([1.0, 2.0], 0.0)
    with pytest.raises(WindowExhaustedError):
        find_clusters(np.arange(0.0, 3.0, 0.1), 0.5, exponent=0)


def test_cluster_invariant_violations() -> None:
    """Test that a hand-built decomposition breaking the width and gap rules is reported."""
    clusters = ClusterDecomposition(
        intervals=np.array([[0.0, 2.0]]),
        counts=np.array([3], dtype=np.int64),
        gaps=np.array([0.1]),
        starts=np.array([0], dtype=np.int64),
        window=0.5,
        exponent=0,
    )
    problems = clusters.invariant_violations(1.0, 1)
    assert len(problems) == 3


def test_quasimode_without_perturbation() -> None:
    """Test that H1 = 0 keeps the cluster in place."""
    values = np.array([0.0, 1.0, 5.0])
    record = quasimode_match(values, np.eye(3), np.zeros((3, 3)), slice(0, 2), 0.5)
    assert record.hypothesis_held
    assert record.conclusion_held
    assert record.isolation == pytest.approx(4.0)
    assert record.count == 2
    assert not record.counterexample


def test_quasimode_hypothesis_fails() -> None:
    """Test that a large perturbation of a poorly isolated cluster skips the conclusion."""
    values = np.array([0.0, 0.1, 0.2])
    record = quasimode_match(values, np.eye(3), np.eye(3), slice(1, 2), 0.5)
    assert not record.hypothesis_held
    assert record.conclusion_held is None
    assert record.isolation == pytest.approx(0.1)


def test_quasimode_rejects_delta() -> None:
    """Test that delta must lie in (0, 1)."""
    with pytest.raises(ValueError):
        quasimode_match(np.array([0.0]), np.eye(1), np.zeros((1, 1)), slice(0, 1), 1.0)


def test_quasimode_suite_is_sound_and_reproducible() -> None:
    """Test that random trials produce no counterexample and depend only on the seed."""
    report = quasimode_suite(200, seed=7)
    assert report.sound
    assert report.hypothesis_held > 0
    assert report.confirmed == report.hypothesis_held
    assert quasimode_suite(200, seed=7).to_json() == report.to_json()


def test_directional_fit_on_synthetic_residuals() -> None:
    """Test that residuals depending only on the component along M decay along M."""
    lattice = build_lattice(np.eye(2))
    points = np.array([[a, b] for a in range(1, 13) for b in range(-3, 4)], dtype=np.int64)
    predictions = np.sum(points**2, axis=1).astype(float)
    residuals = 1.0 / (1.0 + points[:, 0].astype(float) ** 2)
    n = points.shape[0]
    labeled = LabeledSpectrum(
        lattice=lattice,
        points=points,
        eigenvalues=predictions + residuals,
        predictions=predictions,
        columns=np.arange(n),
        vectors=np.eye(n, dtype=complex),
        labels=[None] * n,
        chains={},
        interior=np.ones(n, dtype=bool),
        ambiguous=np.zeros(n, dtype=bool),
        mismatched=np.zeros(n, dtype=bool),
        clusters=find_clusters([0.0], 0.5),
    )
    fit = directional_fit(labeled, saturate([[1, 0]]))
    assert fit.along.exponent == pytest.approx(-2.0)
    assert asymptotic_fit(labeled, module=saturate([[1, 0]])).exponent == pytest.approx(-2.0)
    assert set(fit.to_json()) == {"along", "across"}
