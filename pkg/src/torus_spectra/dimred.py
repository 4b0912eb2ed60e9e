"""Reduction of resonant blocks to lower-dimensional Schrödinger operators.

A class W_{M,beta} of rank d' is written as xi = xi-tilde + n.B with n in Z^d'
and B the module basis. In these coordinates ||xi + kappa||^2 equals
||n + kappa'||^2 for the dual metric B g* B^T plus the constant ell^2, so the
block operator becomes -Delta_{g',kappa'} + N' + ell^2 on a sub-lattice.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import numpy.typing as npt
from scipy.linalg import eigh

from torus_spectra.errors import NothingToReduceError, SolverFailureError
from torus_spectra.lattice import FloatArray, IntArray, Lattice
from torus_spectra.normalform import ENTRY_TOLERANCE, NormalFormOutput, normal_form, normal_form_from_matrix
from torus_spectra.partition.blocks import BlockLabel, PartitionResult, extended_partition, partition_points
from torus_spectra.partition.params import PartitionParams
from torus_spectra.submodules import Submodule, floquet_split
from torus_spectra.symbols import FourierSymbol, TruncatedOperator, laplacian_matrix
from torus_spectra.workers import parallel_map

logger = logging.getLogger(__name__)

EXACTNESS_TOLERANCE = 1e-10
COERCIVITY_TOLERANCE = 1e-9


def eigenvalues(matrix: npt.ArrayLike) -> FloatArray:
    """Ascending eigenvalues of a hermitian matrix."""
    a = np.asarray(matrix, dtype=complex)
    if a.shape[0] == 0:
        return np.zeros(0)
    try:
        return np.asarray(eigh(a, eigvals_only=True), dtype=float)
    except np.linalg.LinAlgError as e:
        msg = f"Eigensolver failed on a {a.shape[0]}x{a.shape[0]} block: {e}"
        raise SolverFailureError(msg) from e


@dataclass(frozen=True, eq=False)
class ReducedOperator:
    """Block operator in adapted coordinates.

    Attributes:
        sublattice: Lattice of dimension d' with dual metric B g* B^T and kappa'
        module: The module M
        beta: Canonical coset representative of the class
        xi_tilde: Common integer translation, xi = xi_tilde + n.B
        ell_squared: ||(xi + kappa)_Mperp||^2, constant on the class
        operator: -Delta_{g',kappa'} + N' on the translated index set
        potential: N' alone
        parent_rows: Rows of the class in the parent box
        complete: Whether every point of the class lies in the parent box
    """

    sublattice: Lattice
    module: Submodule
    beta: IntArray
    xi_tilde: IntArray
    ell_squared: float
    operator: TruncatedOperator
    potential: TruncatedOperator
    parent_rows: IntArray
    complete: bool = True

    @property
    def dimension(self) -> int:
        return self.sublattice.dimension


def gauge_index(reduced: ReducedOperator, n: npt.ArrayLike) -> IntArray:
    """Parent lattice point xi = xi_tilde + n.B of a reduced index n."""
    coords = np.asarray(n, dtype=np.int64)
    return np.asarray(reduced.xi_tilde + coords @ reduced.module.basis, dtype=np.int64)


def parent_index(reduced: ReducedOperator, xi: npt.ArrayLike) -> IntArray:
    """Reduced index n of a parent point of the class (inverse of ``gauge_index``)."""
    shifted = np.asarray(xi, dtype=np.int64) - reduced.xi_tilde
    return np.asarray(reduced.module.coordinates(shifted)[..., : reduced.module.rank], dtype=np.int64)


def _class_rows(output: NormalFormOutput, partition: PartitionResult, label: BlockLabel) -> tuple[IntArray, bool]:
    members = partition.classes().get(label.key, np.zeros(0, dtype=np.int64))
    located = output.laplacian.locate(partition.points[members])
    complete = bool(np.all(located >= 0))
    rows = np.sort(located[located >= 0]).astype(np.int64)
    return rows, complete


def reduce_block(
    lattice: Lattice, output: NormalFormOutput, partition: PartitionResult, label: BlockLabel
) -> ReducedOperator:
    """Reduce the block of the class W_{M,beta} to a d'-dimensional operator.

    Raises:
        NothingToReduceError: For trivial or full-rank classes, uncertain labels
            or classes with no point in the box
    """
    d = lattice.dimension
    if not 0 < label.level < d:
        msg = f"Class of level {label.level} in dimension {d} has nothing to reduce"
        raise NothingToReduceError(msg)
    if not label.certain:
        msg = f"Class {label.module.basis.tolist()} + {label.beta.tolist()} is boundary-uncertain"
        raise NothingToReduceError(msg)
    rows, complete = _class_rows(output, partition, label)
    if rows.size == 0:
        msg = f"Class {label.module.basis.tolist()} + {label.beta.tolist()} has no point in the box"
        raise NothingToReduceError(msg)
    if not complete:
        logger.warning("Class %s + %s is cut by the box", label.module.basis.tolist(), label.beta.tolist())

    module = label.module
    points = output.index[rows]
    split = floquet_split(lattice, points[0], module)
    basis = module.basis.astype(float)
    sub_metric_star = basis @ lattice.metric_g_star @ basis.T
    sublattice = Lattice.from_metric(np.linalg.inv(sub_metric_star), split.kappa_coefficients)

    reduced_index = np.asarray(module.coordinates(points - split.xi_tilde)[:, : module.rank], dtype=np.int64)
    laplacian = laplacian_matrix(sublattice, reduced_index)
    potential = output.normal.matrix[np.ix_(rows, rows)]
    operator = TruncatedOperator(sublattice, reduced_index, laplacian.matrix + potential, "reduced")
    return ReducedOperator(
        sublattice=sublattice,
        module=module,
        beta=label.beta,
        xi_tilde=split.xi_tilde,
        ell_squared=split.ell_squared,
        operator=operator,
        potential=TruncatedOperator(sublattice, reduced_index, potential.copy(), "reduced-potential"),
        parent_rows=rows,
        complete=complete,
    )


def block_matrix(output: NormalFormOutput, rows: IntArray) -> npt.NDArray[np.complex128]:
    """(L + N) restricted to the given rows."""
    return np.asarray((output.laplacian.matrix + output.normal.matrix)[np.ix_(rows, rows)])


def spectral_defect(output: NormalFormOutput, reduced: ReducedOperator) -> float:
    """max |spec(block) - (spec(reduced) + ell^2)| over sorted eigenvalues."""
    parent = eigenvalues(block_matrix(output, reduced.parent_rows))
    child = eigenvalues(reduced.operator.matrix) + reduced.ell_squared
    return float(np.abs(parent - child).max()) if parent.size else 0.0


def is_multiplier(matrix: npt.ArrayLike) -> bool:
    """True when the matrix is diagonal up to ENTRY_TOLERANCE."""
    a = np.asarray(matrix)
    return bool(np.all(np.abs(a - np.diag(np.diag(a))) <= ENTRY_TOLERANCE))


@dataclass
class ReductionNode:
    """One reduced class and what its own partition produced.

    Attributes:
        path: Chain of (M, beta) pairs from the root, M in the coordinates of its parent
        reduced: The reduced operator
        spectrum: Eigenvalues of the block, i.e. of the reduced operator plus ell^2
        defect: Spectral mismatch between block and reduced operator
        parent_coercivity: Coercivity constant of the lattice the class was reduced from
        children: Reductions of this node's own resonant classes
        multipliers: Number of this node's classes on which N' is diagonal
        finite_blocks: Number of full-rank classes of this node
    """

    path: list[tuple[Submodule, IntArray]]
    reduced: ReducedOperator
    spectrum: FloatArray
    defect: float
    parent_coercivity: float
    children: list["ReductionNode"] = field(default_factory=list)
    multipliers: int = 0
    finite_blocks: int = 0

    def depth(self) -> int:
        return 1 + max((child.depth() for child in self.children), default=0)

    def coercivity_held(self) -> bool:
        """Whether the sub-lattice is at least as coercive as its parent."""
        return self.reduced.sublattice.coercivity >= self.parent_coercivity * (1.0 - COERCIVITY_TOLERANCE)

    def to_json(self) -> dict[str, Any]:
        return {
            "path": [{"M": m.basis.tolist(), "beta": b.tolist()} for m, b in self.path],
            "dimension": self.reduced.dimension,
            "ell_squared": self.reduced.ell_squared,
            "kappa_prime": self.reduced.sublattice.kappa.tolist(),
            "size": self.reduced.operator.size,
            "complete": self.reduced.complete,
            "coercivity": self.reduced.sublattice.coercivity,
            "parent_coercivity": self.parent_coercivity,
            "coercivity_held": self.coercivity_held(),
            "spectrum": self.spectrum.tolist(),
            "defect": self.defect,
            "exact": self.defect <= EXACTNESS_TOLERANCE * max(1.0, float(np.abs(self.spectrum).max(initial=0.0))),
            "multipliers": self.multipliers,
            "finite_blocks": self.finite_blocks,
            "children": [child.to_json() for child in self.children],
        }


@dataclass
class ReductionTree:
    """Root partition and normal form with the reduced classes below them.

    Attributes:
        lattice: Root lattice
        partition: Root partition
        output: Root normal form
        nodes: Reduced classes of the root
        multipliers: Root classes on which L + N is diagonal
        finite_blocks: Full-rank root classes with their spectra
    """

    lattice: Lattice
    partition: PartitionResult
    output: NormalFormOutput
    nodes: list[ReductionNode] = field(default_factory=list)
    multipliers: int = 0
    finite_blocks: list[dict[str, Any]] = field(default_factory=list)

    def depth(self) -> int:
        return 1 + max((node.depth() for node in self.nodes), default=0)

    def walk(self) -> list[ReductionNode]:
        """Every node of the tree, parents before their children."""
        found: list[ReductionNode] = []
        pending = list(reversed(self.nodes))
        while pending:
            node = pending.pop()
            found.append(node)
            pending.extend(reversed(node.children))
        return found

    def coercivity_violations(self) -> list[dict[str, Any]]:
        """Nodes whose sub-lattice coercivity falls below that of their parent."""
        return [
            {
                "path": [{"M": m.basis.tolist(), "beta": b.tolist()} for m, b in node.path],
                "coercivity": node.reduced.sublattice.coercivity,
                "parent_coercivity": node.parent_coercivity,
            }
            for node in self.walk()
            if not node.coercivity_held()
        ]

    def to_json(self) -> dict[str, Any]:
        return {
            "dimension": self.lattice.dimension,
            "depth": self.depth(),
            "multipliers": self.multipliers,
            "finite_blocks": self.finite_blocks,
            "nodes": [node.to_json() for node in self.nodes],
        }


def _classify(
    output: NormalFormOutput, partition: PartitionResult
) -> tuple[list[BlockLabel], int, list[dict[str, Any]]]:
    """Resonant labels worth reducing, the number of multiplier classes and the full-rank blocks."""
    d = output.lattice.dimension
    reducible: list[BlockLabel] = []
    multipliers = 0
    finite: list[dict[str, Any]] = []
    for key, class_rows in partition.classes().items():
        label = partition.labels[int(class_rows[0])]
        rows, _ = _class_rows(output, partition, label)
        if rows.size == 0:
            continue
        block = block_matrix(output, rows)
        if label.level == d:
            finite.append({
                "M": label.module.basis.tolist(),
                "beta": label.beta.tolist(),
                "size": int(rows.size),
                "spectrum": eigenvalues(block).tolist(),
            })
        elif label.level == 0 or is_multiplier(block) or not label.certain:
            multipliers += 1
        else:
            reducible.append(label)
    return reducible, multipliers, finite


def _build_node(
    path: list[tuple[Submodule, IntArray]],
    output: NormalFormOutput,
    partition: PartitionResult,
    label: BlockLabel,
    params: PartitionParams,
    steps: int,
    depth: int,
) -> ReductionNode:
    reduced = reduce_block(output.lattice, output, partition, label)
    node_path = [*path, (label.module, label.beta)]
    spectrum = eigenvalues(reduced.operator.matrix) + reduced.ell_squared
    node = ReductionNode(
        node_path, reduced, spectrum, spectral_defect(output, reduced), parent_coercivity=output.lattice.coercivity
    )
    if depth <= 1 or reduced.dimension < 2:
        return node

    sub = reduced.sublattice
    params.validate(sub.dimension, sublattice=True)
    sub_partition = partition_points(sub, reduced.operator.index, params)
    support = max(1.0, reduced.potential.coupling_radius(ENTRY_TOLERANCE))
    sub_output = normal_form_from_matrix(
        sub, reduced.operator.index, reduced.potential.matrix, params, steps, support_radius=support
    )
    labels, node.multipliers, finite = _classify(sub_output, sub_partition)
    node.finite_blocks = len(finite)
    node.children = parallel_map(
        lambda child: _build_node(node_path, sub_output, sub_partition, child, params, steps, depth - 1), labels
    )
    return node


def iterate_reduction(
    lattice: Lattice,
    potential: FourierSymbol,
    box: npt.ArrayLike,
    params: PartitionParams,
    depth: int = 2,
    steps: int = 2,
    partition: Optional[PartitionResult] = None,
    output: Optional[NormalFormOutput] = None,
) -> ReductionTree:
    """Normal form, partition and recursive reduction of every resonant class.

    Args:
        lattice: The lattice
        potential: The potential V
        box: Normal-form box points
        params: Resonance parameters, re-validated on every sub-lattice
        depth: Maximal number of reduction levels
        steps: Normal-form steps at every level
        partition: Precomputed root partition covering the box
        output: Precomputed root normal form on the box

    Raises:
        ParamsInvalidForSublatticeError: If the parameters fail on a sub-lattice
    """
    points = np.asarray(box, dtype=np.int64).reshape(-1, lattice.dimension)
    if output is None:
        output = normal_form(lattice, potential, points, params, steps)
    if partition is None:
        radius = max(5, int(np.abs(points).max(initial=0)))
        partition = extended_partition(lattice, radius, params)
    labels, multipliers, finite = _classify(output, partition)
    tree = ReductionTree(lattice, partition, output, multipliers=multipliers, finite_blocks=finite)
    if depth >= 1:
        tree.nodes = parallel_map(lambda label: _build_node([], output, partition, label, params, steps, depth), labels)
    logger.info(
        "Reduction tree: %d reduced classes, %d multipliers, %d finite blocks, depth %d",
        len(tree.nodes),
        multipliers,
        len(finite),
        tree.depth(),
    )
    return tree
