"""Tests for dimensional reduction of resonant blocks."""

import numpy as np
import pytest

from torus_spectra.dimred import (
    EXACTNESS_TOLERANCE,
    ReductionNode,
    ReductionTree,
    block_matrix,
    gauge_index,
    is_multiplier,
    iterate_reduction,
    parent_index,
    reduce_block,
    spectral_defect,
)
from torus_spectra.errors import NothingToReduceError, ParamsInvalidForSublatticeError
from torus_spectra.lattice import build_lattice, lattice_ball
from torus_spectra.normalform import normal_form
from torus_spectra.partition import PartitionParams, extended_partition, partition_points
from torus_spectra.symbols import FourierSymbol

COSINES = {(1, 0): 1.0, (-1, 0): 1.0, (0, 1): 1.0, (0, -1): 1.0}
PLANAR_COSINES = {(1, 0, 0): 1.0, (-1, 0, 0): 1.0, (0, 1, 0): 1.0, (0, -1, 0): 1.0}
SLAB_PARAMS = PartitionParams(epsilon=0.01, delta=0.5, tau=2.1)


@pytest.fixture(scope="module")
def plane_tree() -> ReductionTree:
    """Reduction tree of 2 cos x1 + 2 cos x2 on the disc of radius 14."""
    lattice = build_lattice(np.eye(2), [0.3, 0.2])
    params = PartitionParams()
    box = lattice_ball(lattice, 14.0)
    partition = extended_partition(lattice, 14, params)
    return iterate_reduction(lattice, FourierSymbol.from_terms(COSINES), box, params, depth=2, steps=1, partition=partition)


def test_tree_has_line_classes(plane_tree: ReductionTree) -> None:
    """Test that lines of resonance near the axes are reduced to one dimension."""
    assert plane_tree.nodes
    assert plane_tree.depth() == 2
    for node in plane_tree.nodes:
        assert node.reduced.dimension == 1
        assert node.reduced.module.rank == 1
        assert not node.children


def test_reduction_is_exact(plane_tree: ReductionTree) -> None:
    """Test that each reduced operator reproduces the spectrum of its block."""
    output = plane_tree.output
    for node in plane_tree.nodes:
        scale = max(1.0, float(np.abs(node.spectrum).max()))
        assert node.defect <= EXACTNESS_TOLERANCE * scale
        assert spectral_defect(output, node.reduced) == pytest.approx(node.defect)
        parent = np.linalg.eigvalsh(block_matrix(output, node.reduced.parent_rows))
        assert np.allclose(parent, node.spectrum, atol=1e-9)


def test_gauge_round_trip(plane_tree: ReductionTree) -> None:
    """Test that reduced indices map back to the parent points of the class."""
    output = plane_tree.output
    for node in plane_tree.nodes:
        reduced = node.reduced
        parents = gauge_index(reduced, reduced.operator.index)
        assert np.array_equal(parents, output.index[reduced.parent_rows])
        assert np.array_equal(parent_index(reduced, parents), reduced.operator.index)


def test_reduced_lattice(plane_tree: ReductionTree) -> None:
    """Test the reduced lattice and the constant perpendicular part."""
    output = plane_tree.output
    lattice = output.lattice
    for node in plane_tree.nodes:
        reduced = node.reduced
        basis = reduced.module.basis[0].astype(float)
        assert reduced.sublattice.coercivity == pytest.approx(float(basis @ lattice.metric_g_star @ basis))
        assert node.parent_coercivity == pytest.approx(lattice.coercivity)
        assert node.coercivity_held()
        assert node.to_json()["coercivity_held"]
        assert np.all((reduced.sublattice.kappa >= 0) & (reduced.sublattice.kappa < 1))
        points = output.index[reduced.parent_rows] + lattice.kappa
        total = np.einsum("ni,ij,nj->n", points, lattice.metric_g_star, points)
        along = np.real(np.diag(reduced.operator.matrix - reduced.potential.matrix))
        assert np.allclose(total, along + reduced.ell_squared)


def test_tree_json(plane_tree: ReductionTree) -> None:
    """Test the serialised tree."""
    data = plane_tree.to_json()
    assert data["dimension"] == 2
    assert len(data["nodes"]) == len(plane_tree.nodes)
    assert all(node["exact"] for node in data["nodes"])


def test_nothing_to_reduce(plane_tree: ReductionTree) -> None:
    """Test that trivial and full-rank classes are refused."""
    partition = plane_tree.partition
    lattice = plane_tree.lattice
    for level in (0, 2):
        label = next(label for label in partition.labels if label.level == level)
        with pytest.raises(NothingToReduceError):
            reduce_block(lattice, plane_tree.output, partition, label)


def test_zero_potential_has_no_nodes() -> None:
    """Test that V = 0 leaves only multiplier classes."""
    lattice = build_lattice(np.eye(2), [0.3, 0.2])
    params = PartitionParams()
    box = lattice_ball(lattice, 8.0)
    tree = iterate_reduction(lattice, FourierSymbol.zero(2), box, params, depth=2, steps=1)
    assert tree.nodes == []
    assert tree.depth() == 1
    assert tree.multipliers > 0


def test_is_multiplier() -> None:
    """Test the diagonal check."""
    assert is_multiplier(np.diag([1.0, 2.0]))
    assert not is_multiplier([[1.0, 0.1], [0.1, 2.0]])


def test_line_tree_has_finite_block() -> None:
    """Test that the top class on the circle is reported as a finite block."""
    lattice = build_lattice([[1.0]])
    potential = FourierSymbol.from_terms({(1,): 1.0, (-1,): 1.0})
    box = lattice_ball(lattice, 20.0)
    output = normal_form(lattice, potential, box, PartitionParams(), 2)
    tree = iterate_reduction(lattice, potential, box, PartitionParams(), output=output)
    assert tree.nodes == []
    assert len(tree.finite_blocks) == 1
    assert tree.finite_blocks[0]["size"] == 3


@pytest.fixture(scope="module")
def slab_tree() -> ReductionTree:
    """Two-level reduction tree on Z^3 with a short third basis vector.

    ||e3||_{g*} = 10, so no frequency leaving span{e1, e2} is ever resonant and
    the slices xi3 = 0 and xi3 = -1 of the ball are rank-2 classes.
    """
    lattice = build_lattice(np.diag([1.0, 1.0, 0.1]), [0.3, 0.2, 0.1])
    box = lattice_ball(lattice, 11.0)
    partition = partition_points(lattice, box, SLAB_PARAMS)
    potential = FourierSymbol.from_terms(PLANAR_COSINES)
    return iterate_reduction(lattice, potential, box, SLAB_PARAMS, depth=2, steps=1, partition=partition)


def _plane_node(tree: ReductionTree, slice_index: int) -> ReductionNode:
    return next(
        node
        for node in tree.nodes
        if node.reduced.dimension == 2 and int(node.reduced.xi_tilde[2]) == slice_index
    )


def test_three_dimensional_tree_recurses(slab_tree: ReductionTree) -> None:
    """Test that a rank-2 class is reduced to a plane whose own line classes become children."""
    assert {node.reduced.dimension for node in slab_tree.nodes} >= {2}
    node = _plane_node(slab_tree, -1)
    assert node.reduced.ell_squared == pytest.approx(81.0)
    assert node.reduced.sublattice.kappa.tolist() == pytest.approx([0.3, 0.2])
    assert node.children
    assert node.finite_blocks >= 1
    for child in node.children:
        assert child.reduced.dimension == 1
        assert not child.children
        assert len(child.path) == 2
        scale = max(1.0, float(np.abs(child.spectrum).max()))
        assert child.defect <= EXACTNESS_TOLERANCE * scale
    assert node.depth() == 2
    assert slab_tree.depth() == 3
    assert len(slab_tree.walk()) >= len(slab_tree.nodes) + len(node.children)


def test_three_dimensional_tree_json(slab_tree: ReductionTree) -> None:
    """Test that nested children and the coercivity comparison are serialised."""
    data = slab_tree.to_json()
    assert data["depth"] == 3
    nested = [node for node in data["nodes"] if node["children"]]
    assert nested
    assert all(child["coercivity_held"] for node in nested for child in node["children"])
    assert slab_tree.coercivity_violations() == []


def test_sublattice_params_revalidated(slab_tree: ReductionTree) -> None:
    """Test that tau <= d' - 1 is rejected when recursing into a plane."""
    weak = PartitionParams(epsilon=0.01, delta=0.5, tau=1.0)
    with pytest.raises(ParamsInvalidForSublatticeError):
        iterate_reduction(
            slab_tree.lattice,
            FourierSymbol.from_terms(PLANAR_COSINES),
            slab_tree.output.index,
            weak,
            depth=2,
            steps=1,
            partition=slab_tree.partition,
            output=slab_tree.output,
        )
