"""Spectra of truncated operators and their labeling by lattice points.

The computed spectrum of H on a box is matched cluster by cluster against the
spectrum of the normal form L + N, whose block structure is explicit: a point
outside every resonant class predicts ||xi + kappa||^2 + N[xi, xi], a class
predicts the eigenvalues of its block. Residuals of the matching feed the
asymptotic fits.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
import numpy.typing as npt
from scipy.linalg import LinAlgError, eigh, eigvalsh
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from torus_spectra.dimred import ReductionNode, ReductionTree
from torus_spectra.errors import SolverFailureError, WindowExhaustedError
from torus_spectra.fitting import PowerFit, power_law_fit
from torus_spectra.lattice import FloatArray, IntArray, Lattice, bracket, dual_norm_squared
from torus_spectra.normalform import ENTRY_TOLERANCE, NormalFormOutput
from torus_spectra.partition.blocks import BlockLabel, PartitionResult
from torus_spectra.submodules import Submodule, project
from torus_spectra.symbols import ComplexArray, TruncatedOperator
from torus_spectra.workers import parallel_map

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-9
ORTHONORMALITY_TOLERANCE = 1e-9
# Distinct predictions closer than this are not told apart when flagging ties
TIE_TOLERANCE = 1e-9

Chain = list[tuple[Submodule, IntArray]]
LabelFilter = Callable[[BlockLabel], bool]


@dataclass(frozen=True, eq=False)
class Eigenpairs:
    """Sorted eigenvalues with orthonormal eigenvectors as columns.

    Attributes:
        values: Eigenvalues in ascending order
        vectors: Column k is the eigenvector of values[k]
        operator: The operator that was diagonalised
    """

    values: FloatArray
    vectors: ComplexArray
    operator: TruncatedOperator

    @property
    def size(self) -> int:
        return int(self.values.shape[0])


def eigensolve(op: TruncatedOperator) -> Eigenpairs:
    """Diagonalise a hermitian truncated operator.

    Raises:
        NotSelfAdjointError: If the matrix is not hermitian
        SolverFailureError: If LAPACK fails or the pairs miss the residual or
            orthonormality tolerance

    >>> import numpy as np
    >>> from torus_spectra.lattice import build_lattice
    >>> lat = build_lattice([[1.0]])
    >>> op = TruncatedOperator(lat, np.array([[0], [1]]), np.array([[0, 1], [1, 0]], dtype=complex))
    >>> [round(float(v), 12) for v in eigensolve(op).values]
    [-1.0, 1.0]
    """
    op.check_hermitian()
    if op.size == 0:
        return Eigenpairs(np.zeros(0), np.zeros((0, 0), dtype=complex), op)
    matrix = (op.matrix + op.matrix.conj().T) / 2.0
    try:
        values, vectors = eigh(matrix)
    except (LinAlgError, ValueError) as e:
        msg = f"Eigensolver failed on '{op.tag}' ({op.size} modes): {e}"
        raise SolverFailureError(msg) from e

    scale = max(1.0, float(np.abs(values).max()))
    residual = float(np.linalg.norm(matrix @ vectors - vectors * values, axis=0).max())
    if residual > RESIDUAL_TOLERANCE * scale:
        msg = f"Eigenpair residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE:g} * {scale:.3e}"
        raise SolverFailureError(msg)
    defect = float(np.abs(vectors.conj().T @ vectors - np.eye(op.size)).max())
    if defect > ORTHONORMALITY_TOLERANCE:
        msg = f"Eigenvectors are orthonormal only to {defect:.3e}"
        raise SolverFailureError(msg)
    return Eigenpairs(np.asarray(values, dtype=float), np.asarray(vectors, dtype=complex), op)


def cluster_count_constant(lattice: Lattice) -> float:
    """(4 / sqrt(c))^d, the constant of the counting bound #{|lambda| <= R^2} <= C R^d."""
    return float((4.0 / math.sqrt(lattice.coercivity)) ** lattice.dimension)


def weyl_count_check(
    eigs: npt.ArrayLike, lattice: Lattice, radius: float, potential_bound: float = 0.0
) -> tuple[int, float]:
    """Count eigenvalues with |lambda| <= R^2 and the bound (4 / sqrt(c))^d R^d.

    Args:
        eigs: Eigenvalues (any order)
        lattice: Lattice providing c and d
        radius: R
        potential_bound: sup |m| of the perturbation; R^2 must exceed 3 times it

    Raises:
        ValueError: If R^2 <= 3 * potential_bound

    >>> from torus_spectra.lattice import build_lattice
    >>> weyl_count_check([0.0, 1.0, 1.0, 4.0, 50.0], build_lattice([[1.0]]), 2.0)
    (4, 8.0)
    """
    if radius * radius <= 3.0 * potential_bound:
        msg = f"Radius {radius} must satisfy R^2 > 3 sup|m| = {3.0 * potential_bound}"
        raise ValueError(msg)
    values = np.asarray(eigs, dtype=float).reshape(-1)
    count = int(np.count_nonzero(np.abs(values) <= radius * radius))
    return count, cluster_count_constant(lattice) * radius**lattice.dimension


@dataclass
class ClusterDecomposition:
    """Consecutive eigenvalue clusters E_j = [a_j, b_j] separated by gaps.

    Attributes:
        intervals: K x 2 array of (a_j, b_j)
        counts: Eigenvalues per cluster, with multiplicity
        gaps: Distance from b_j to the next eigenvalue (inf after the last cluster)
        starts: Position of the first eigenvalue of each cluster in the sorted list
        window: Half-width L of the search window
        exponent: N in the gap requirement L / b^N
    """

    intervals: FloatArray
    counts: IntArray
    gaps: FloatArray
    starts: IntArray
    window: float
    exponent: int

    def __len__(self) -> int:
        return int(self.counts.shape[0])

    def members(self, j: int) -> slice:
        start = int(self.starts[j])
        return slice(start, start + int(self.counts[j]))

    def required_gap(self, upper: float) -> float:
        return self.window / max(1.0, abs(upper)) ** self.exponent

    def invariant_violations(self, count_constant: float, dimension: int) -> list[str]:
        """Clusters breaking width <= 2L, gap >= L/b^N or count <= C b^(d/2)."""
        problems: list[str] = []
        for j, ((a, b), count, gap) in enumerate(zip(self.intervals, self.counts, self.gaps)):
            if b - a > 2.0 * self.window + 1e-12:
                problems.append(f"cluster {j}: width {b - a:.6g} > 2L")
            if gap < self.required_gap(b) - 1e-12:
                problems.append(f"cluster {j}: gap {gap:.6g} < L/b^N")
            if count > count_constant * max(1.0, abs(b)) ** (dimension / 2.0):
                problems.append(f"cluster {j}: {count} eigenvalues exceed C b^(d/2)")
        return problems

    def to_json(self) -> dict[str, Any]:
        return {
            "window": self.window,
            "exponent": self.exponent,
            "clusters": [
                {
                    "interval": [float(a), float(b)],
                    "count": int(c),
                    "gap": None if math.isinf(g) else float(g),
                }
                for (a, b), c, g in zip(self.intervals, self.counts, self.gaps)
            ],
        }


def find_clusters(eigs: npt.ArrayLike, window: float, exponent: int = 1) -> ClusterDecomposition:
    """Greedy left-to-right cluster construction.

    A cluster opened at a is extended through the eigenvalues of [a, a + 2L]
    until one of them, b, is followed by a gap of at least L / max(1, |b|)^N.

    Raises:
        ValueError: If the window is not positive
        WindowExhaustedError: If no qualifying gap exists inside some window

    >>> decomposition = find_clusters([1, 1.1, 5, 5.05, 9], 0.5)
    >>> decomposition.intervals.tolist()
    [[1.0, 1.1], [5.0, 5.05], [9.0, 9.0]]
    """
    if window <= 0:
        msg = f"Cluster window must be positive, got {window}"
        raise ValueError(msg)
    values = np.sort(np.asarray(eigs, dtype=float).reshape(-1))
    n = values.size
    intervals: list[tuple[float, float]] = []
    counts: list[int] = []
    gaps: list[float] = []
    starts: list[int] = []
    i = 0
    while i < n:
        a = float(values[i])
        j = i
        while True:
            if j >= n or values[j] > a + 2.0 * window:
                msg = f"No gap of the required width in [{a:.6g}, {a + 2.0 * window:.6g}]"
                raise WindowExhaustedError(msg)
            b = float(values[j])
            following = float(values[j + 1]) if j + 1 < n else math.inf
            if following - b >= window / max(1.0, abs(b)) ** exponent:
                break
            j += 1
        intervals.append((a, b))
        counts.append(j - i + 1)
        gaps.append(following - b)
        starts.append(i)
        i = j + 1
    return ClusterDecomposition(
        intervals=np.asarray(intervals, dtype=float).reshape(-1, 2),
        counts=np.asarray(counts, dtype=np.int64),
        gaps=np.asarray(gaps, dtype=float),
        starts=np.asarray(starts, dtype=np.int64),
        window=float(window),
        exponent=int(exponent),
    )


@dataclass(frozen=True)
class QuasimodeRecord:
    """Outcome of one application of the quasimode lemma.

    Attributes:
        size: Number M of unperturbed eigenvalues in the cluster
        isolation: D, distance from the cluster to the rest of sigma(H0)
        max_error: max_k ||H1 psi_k||
        hypothesis_held: Whether D^2 >= 16 M^3 max_k eps_k (|lambda_M - lambda_1| + D) / (pi delta^2)
        conclusion_held: Whether H0 + H1 has at least M eigenvalues in the interval (None if not checked)
        count: Eigenvalues of H0 + H1 found in the interval (None if not checked)
        interval: (lambda_1 - delta D, lambda_M + delta D)
    """

    size: int
    isolation: float
    max_error: float
    hypothesis_held: bool
    conclusion_held: Optional[bool] = None
    count: Optional[int] = None
    interval: Optional[tuple[float, float]] = None

    @property
    def counterexample(self) -> bool:
        return self.hypothesis_held and self.conclusion_held is False

    def to_json(self) -> dict[str, Any]:
        return {
            "size": self.size,
            "isolation": None if math.isinf(self.isolation) else self.isolation,
            "max_error": self.max_error,
            "hypothesis_held": self.hypothesis_held,
            "conclusion_held": self.conclusion_held,
            "count": self.count,
        }


def quasimode_match(
    h0_values: npt.ArrayLike,
    h0_vectors: npt.ArrayLike,
    h1: npt.ArrayLike,
    cluster: slice,
    delta: float,
    isolation: Optional[float] = None,
) -> QuasimodeRecord:
    """Check the quasimode hypothesis for a cluster of H0 and, if it holds, its conclusion.

    Args:
        h0_values: Sorted eigenvalues of H0
        h0_vectors: Matching orthonormal eigenvectors (columns)
        h1: The perturbation, a hermitian matrix
        cluster: Positions of the cluster in ``h0_values``
        delta: The lemma's delta, in (0, 1)
        isolation: D; defaults to the distance to the nearest eigenvalue outside the cluster

    Raises:
        ValueError: If delta is outside (0, 1) or the cluster is empty
    """
    if not 0.0 < delta < 1.0:
        msg = f"delta must lie in (0, 1), got {delta}"
        raise ValueError(msg)
    values = np.asarray(h0_values, dtype=float)
    vectors = np.asarray(h0_vectors, dtype=complex)
    perturbation = np.asarray(h1, dtype=complex)
    members = np.arange(values.size)[cluster]
    if members.size == 0:
        msg = "Empty cluster"
        raise ValueError(msg)
    first, last = int(members[0]), int(members[-1])
    lower, upper = float(values[first]), float(values[last])
    size = last - first + 1

    if isolation is None:
        below = lower - float(values[first - 1]) if first > 0 else math.inf
        above = float(values[last + 1]) - upper if last + 1 < values.size else math.inf
        isolation = min(below, above)
    errors = np.linalg.norm(perturbation @ vectors[:, first : last + 1], axis=0)
    max_error = float(errors.max())

    if math.isinf(isolation):
        held = True
    else:
        demand = 16.0 / (math.pi * delta * delta) * size**3 * max_error * (upper - lower + isolation)
        held = isolation > 0 and isolation * isolation >= demand
    if not held:
        return QuasimodeRecord(size, isolation, max_error, False)

    h0 = (vectors * values) @ vectors.conj().T
    spectrum = eigvalsh((h0 + perturbation + (h0 + perturbation).conj().T) / 2.0)
    interval = (lower - delta * isolation, upper + delta * isolation)
    count = int(np.count_nonzero((spectrum > interval[0]) & (spectrum < interval[1])))
    return QuasimodeRecord(size, isolation, max_error, True, count >= size, count, interval)


@dataclass
class QuasimodeSuiteReport:
    """Randomized soundness check of the quasimode lemma."""

    trials: int
    seed: int
    hypothesis_held: int = 0
    confirmed: int = 0
    counterexamples: list[dict[str, Any]] = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return not self.counterexamples

    def to_json(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "hypothesis_held": self.hypothesis_held,
            "confirmed": self.confirmed,
            "counterexamples": self.counterexamples,
        }


def _quasimode_trial(seed_seq: np.random.SeedSequence, size: int) -> QuasimodeRecord:
    rng = np.random.default_rng(seed_seq)
    members = int(rng.integers(1, 5))
    isolation = float(rng.uniform(0.5, 10.0))
    cluster = np.sort(rng.uniform(0.0, rng.uniform(0.0, 2.0), members))
    n_below = int(rng.integers(0, size - members + 1))
    n_above = size - members - n_below
    below = cluster[0] - isolation - rng.uniform(0.0, 20.0, n_below)
    above = cluster[-1] + isolation + rng.uniform(0.0, 20.0, n_above)
    values = np.sort(np.concatenate([below, cluster, above]))
    start = n_below

    raw = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    h1 = (raw + raw.conj().T) / 2.0
    h1 *= 10.0 ** rng.uniform(-5.0, 0.0) / np.linalg.norm(h1, 2)
    delta = float(rng.uniform(0.05, 0.95))
    return quasimode_match(values, np.eye(size), h1, slice(start, start + members), delta)


def quasimode_suite(n_trials: int = 1000, seed: int = 0, size: int = 30) -> QuasimodeSuiteReport:
    """Run the quasimode lemma on random diagonal H0 with planted gaps and random H1.

    Every trial draws an independent stream from ``seed``, so the report does
    not depend on the number of worker threads.
    """
    streams = np.random.SeedSequence(seed).spawn(n_trials)
    records = parallel_map(lambda stream: _quasimode_trial(stream, size), streams)
    report = QuasimodeSuiteReport(trials=n_trials, seed=seed)
    for trial, record in enumerate(records):
        if not record.hypothesis_held:
            continue
        report.hypothesis_held += 1
        if record.conclusion_held:
            report.confirmed += 1
        else:
            report.counterexamples.append({"trial": trial, **record.to_json()})
    if report.counterexamples:
        logger.warning("Quasimode suite: %d counterexamples in %d trials", len(report.counterexamples), n_trials)
    logger.info("Quasimode suite: hypothesis held in %d of %d trials", report.hypothesis_held, n_trials)
    return report


def neg_sobolev_norm(lattice: Lattice, index: npt.ArrayLike, vector: npt.ArrayLike, s_neg: float) -> Any:
    """H^s norm sqrt(sum <xi + kappa>^(2s) |u_xi|^2) of Fourier coefficients on a box.

    A 2-d ``vector`` is read column-wise and yields one norm per column.

    Raises:
        ValueError: If s_neg > 0
    """
    if s_neg > 0:
        msg = f"Negative Sobolev order expected, got {s_neg}"
        raise ValueError(msg)
    points = np.asarray(index, dtype=float).reshape(-1, lattice.dimension)
    weights = np.atleast_1d(np.asarray(bracket(lattice, points + lattice.kappa), dtype=float)) ** (2.0 * s_neg)
    coefficients = np.abs(np.asarray(vector)) ** 2
    return np.sqrt(weights @ coefficients)


def _block_predictions(output: NormalFormOutput) -> tuple[FloatArray, list[IntArray]]:
    """Spectrum of L + N assigned to rows, and the blocks of L + N."""
    matrix = output.laplacian.matrix + output.normal.matrix
    coupling = np.abs(matrix - np.diag(np.diag(matrix))) > ENTRY_TOLERANCE
    count, component = connected_components(csr_matrix(coupling), directed=False)
    predictions = np.real(np.diag(matrix)).astype(float)
    eigen = dual_norm_squared(output.lattice, output.index + output.lattice.kappa)
    blocks: list[IntArray] = []
    for c in range(count):
        rows = np.flatnonzero(component == c)
        if rows.size == 1:
            continue
        blocks.append(rows)
        spectrum = eigvalsh(matrix[np.ix_(rows, rows)])
        # k-th eigenvalue goes to the k-th point by ||xi + kappa||^2
        order = rows[np.lexsort((rows, eigen[rows]))]
        predictions[order] = spectrum
    return predictions, blocks


def _prediction_clusters(predictions: FloatArray, window: float, exponent: int) -> tuple[ClusterDecomposition, bool]:
    try:
        return find_clusters(predictions, window, exponent), False
    except WindowExhaustedError as e:
        logger.warning("%s; matching the whole spectrum as one cluster", e)
        values = np.sort(predictions)
        single = ClusterDecomposition(
            intervals=np.array([[values[0], values[-1]]]),
            counts=np.array([values.size], dtype=np.int64),
            gaps=np.array([math.inf]),
            starts=np.zeros(1, dtype=np.int64),
            window=window,
            exponent=exponent,
        )
        return single, True


def _chains(tree: Optional[ReductionTree], n: int) -> dict[int, Chain]:
    chains: dict[int, Chain] = {}
    if tree is None:
        return chains

    def visit(node: ReductionNode, rows: IntArray) -> None:
        for row in rows:
            chains[int(row)] = list(node.path)
        for child in node.children:
            visit(child, rows[child.reduced.parent_rows])

    for node in tree.nodes:
        visit(node, node.reduced.parent_rows)
    return {row: chain for row, chain in chains.items() if row < n}


@dataclass
class LabeledSpectrum:
    """Bijection xi -> lambda_xi between box points and computed eigenvalues.

    Attributes:
        lattice: The lattice
        points: Box points, one per row
        eigenvalues: lambda_xi per row
        predictions: Spectrum of L + N assigned to the row
        columns: Eigenvector column of each row in ``vectors``
        vectors: Eigenvectors of H (columns)
        labels: Root class of each row, when a partition was supplied
        chains: (M, beta) chains through the reduction tree, for reduced rows
        interior: Rows trusted by the normal form
        ambiguous: Rows whose assignment competes with a distinct prediction
        mismatched: Rows whose eigenvalue falls outside its cluster's gap neighbourhood
        clusters: Clusters of the predictions used for matching
        window_exhausted: Whether clustering fell back to a single cluster
    """

    lattice: Lattice
    points: IntArray
    eigenvalues: FloatArray
    predictions: FloatArray
    columns: IntArray
    vectors: ComplexArray
    labels: list[Optional[BlockLabel]]
    chains: dict[int, Chain]
    interior: npt.NDArray[np.bool_]
    ambiguous: npt.NDArray[np.bool_]
    mismatched: npt.NDArray[np.bool_]
    clusters: ClusterDecomposition
    window_exhausted: bool = False

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def residuals(self) -> FloatArray:
        return np.asarray(self.eigenvalues - self.predictions, dtype=float)

    def is_bijection(self) -> bool:
        return bool(np.array_equal(np.sort(self.columns), np.arange(self.size)))

    def rows(self, label_filter: Optional[LabelFilter] = None, interior_only: bool = True) -> IntArray:
        """Rows passing the filters; rows without a label never pass a label filter."""
        keep = self.interior.copy() if interior_only else np.ones(self.size, dtype=bool)
        if label_filter is not None:
            keep &= np.array([label is not None and label_filter(label) for label in self.labels], dtype=bool)
        return np.flatnonzero(keep)

    def eigenvalue_of(self, xi: npt.ArrayLike) -> float:
        target = np.asarray(xi, dtype=np.int64)
        hits = np.flatnonzero(np.all(self.points == target, axis=1))
        if hits.size == 0:
            msg = f"Point {target.tolist()} is not in the box"
            raise KeyError(msg)
        return float(self.eigenvalues[hits[0]])

    def negative_norms(self, s_neg: float) -> FloatArray:
        """H^s norms of the eigenvector labeled by each row."""
        return np.asarray(neg_sobolev_norm(self.lattice, self.points, self.vectors[:, self.columns], s_neg))

    def records(self, s_neg: Optional[float] = None) -> list[dict[str, Any]]:
        """One flat record per row, for the spectrum table."""
        norms = self.negative_norms(s_neg) if s_neg is not None else None
        out: list[dict[str, Any]] = []
        for row in range(self.size):
            label = self.labels[row]
            chain = self.chains.get(row, [])
            out.append({
                "xi": " ".join(str(int(x)) for x in self.points[row]),
                "lambda": float(self.eigenvalues[row]),
                "prediction": float(self.predictions[row]),
                "residual": float(self.eigenvalues[row] - self.predictions[row]),
                "level": "" if label is None else label.level,
                "M": "" if label is None else str(label.module.basis.tolist()),
                "beta": "" if label is None else str(label.beta.tolist()),
                "certainty": "" if label is None else label.certainty,
                "chain": " > ".join(f"{m.basis.tolist()}+{b.tolist()}" for m, b in chain),
                "hneg_norm": "" if norms is None else float(norms[row]),
                "interior": bool(self.interior[row]),
                "ambiguous": bool(self.ambiguous[row]),
            })
        return out

    def to_json(self) -> dict[str, Any]:
        interior = self.interior
        return {
            "size": self.size,
            "interior": int(interior.sum()),
            "bijection": self.is_bijection(),
            "clusters": len(self.clusters),
            "window_exhausted": self.window_exhausted,
            "ambiguous": int(self.ambiguous.sum()),
            "mismatched": int(self.mismatched.sum()),
            "max_interior_residual": float(np.abs(self.residuals[interior]).max()) if interior.any() else None,
        }


def _match_cluster(computed: FloatArray, predicted: FloatArray) -> tuple[IntArray, npt.NDArray[np.bool_]]:
    """Optimal assignment of computed to predicted values and the rows with competing alternatives."""
    cost = np.abs(computed[:, None] - predicted[None, :])
    rows, cols = linear_sum_assignment(cost)
    assigned = np.empty(predicted.size, dtype=np.int64)
    assigned[cols] = rows
    ambiguous = np.zeros(predicted.size, dtype=bool)
    lam = computed[assigned]
    for i in range(predicted.size):
        for j in range(i + 1, predicted.size):
            if abs(predicted[i] - predicted[j]) <= TIE_TOLERANCE:
                continue
            current = abs(lam[i] - predicted[i]) + abs(lam[j] - predicted[j])
            swapped = abs(lam[i] - predicted[j]) + abs(lam[j] - predicted[i])
            if swapped - current <= TIE_TOLERANCE:
                ambiguous[i] = ambiguous[j] = True
    return assigned, ambiguous


def label_eigenvalues(
    eigs: Eigenpairs,
    output: NormalFormOutput,
    partition: Optional[PartitionResult] = None,
    tree: Optional[ReductionTree] = None,
    window: float = 0.5,
    exponent: int = 1,
) -> LabeledSpectrum:
    """Label every computed eigenvalue of H by a box point.

    Predictions are clustered; each cluster takes the same number of computed
    eigenvalues in sorted order and the assignment inside it minimises the total
    |lambda - prediction|.

    Args:
        eigs: Eigenpairs of H on the normal-form box
        output: Normal form on the same box
        partition: Partition supplying the class of every point
        tree: Reduction tree supplying (M, beta) chains
        window: Cluster half-width L
        exponent: Gap exponent N

    Raises:
        ValueError: If the eigenpairs live on a different box
    """
    index = output.index
    if not np.array_equal(eigs.operator.index, index):
        msg = "Eigenpairs and normal form are indexed by different boxes"
        raise ValueError(msg)
    n = index.shape[0]
    predictions, _ = _block_predictions(output)
    order = np.argsort(predictions, kind="stable")
    clusters, exhausted = _prediction_clusters(predictions, window, exponent)

    columns = np.empty(n, dtype=np.int64)
    ambiguous = np.zeros(n, dtype=bool)
    mismatched = np.zeros(n, dtype=bool)
    for j in range(len(clusters)):
        members = clusters.members(j)
        rows = order[members]
        positions = np.arange(n)[members]
        assigned, flags = _match_cluster(eigs.values[positions], predictions[rows])
        columns[rows] = positions[assigned]
        ambiguous[rows] = flags
        a, b = clusters.intervals[j]
        left = clusters.gaps[j - 1] / 2.0 if j > 0 else math.inf
        right = clusters.gaps[j] / 2.0
        lam = eigs.values[positions[assigned]]
        mismatched[rows] = (lam < a - left) | (lam > b + right)

    if ambiguous.any():
        logger.warning("%d eigenvalue assignments compete with a distinct prediction", int(ambiguous.sum()))
    labels: list[Optional[BlockLabel]] = [None] * n
    if partition is not None:
        for row, xi in enumerate(index):
            found = partition.row_of(xi)
            labels[row] = partition.labels[found] if found >= 0 else None
    return LabeledSpectrum(
        lattice=output.lattice,
        points=index,
        eigenvalues=eigs.values[columns],
        predictions=predictions,
        columns=columns,
        vectors=eigs.vectors,
        labels=labels,
        chains=_chains(tree, n),
        interior=output.interior.copy(),
        ambiguous=ambiguous,
        mismatched=mismatched,
        clusters=clusters,
        window_exhausted=exhausted,
    )


def _direction_brackets(labeled: LabeledSpectrum, rows: IntArray, module: Optional[Submodule]) -> tuple[FloatArray, FloatArray]:
    shifted = labeled.points[rows] + labeled.lattice.kappa
    if module is None:
        along, across = shifted, np.zeros_like(shifted)
    else:
        along, across = project(labeled.lattice, shifted, module)
    return (
        np.atleast_1d(np.asarray(bracket(labeled.lattice, along), dtype=float)),
        np.atleast_1d(np.asarray(bracket(labeled.lattice, across), dtype=float)),
    )


def asymptotic_fit(
    labeled: LabeledSpectrum,
    label_filter: Optional[LabelFilter] = None,
    module: Optional[Submodule] = None,
) -> PowerFit:
    """Regress |residual| against <(xi + kappa)_M> over interior rows.

    ``module=None`` measures the full <xi + kappa>. The exponent's 95% band is
    ``fit.band()``.

    Raises:
        InsufficientDataError: Fewer than 8 usable rows, or ``exact=True`` when all residuals vanish
    """
    rows = labeled.rows(label_filter)
    along, _ = _direction_brackets(labeled, rows, module)
    return power_law_fit(along, labeled.residuals[rows])


@dataclass(frozen=True)
class DirectionalFit:
    """Residual decay along a module and across it."""

    along: PowerFit
    across: PowerFit

    def to_json(self) -> dict[str, Any]:
        return {"along": self.along.to_json(), "across": self.across.to_json()}


def directional_fit(
    labeled: LabeledSpectrum, module: Submodule, label_filter: Optional[LabelFilter] = None
) -> DirectionalFit:
    """Two regressions of |residual|, against <(xi + kappa)_M> and against <(xi + kappa)_Mperp>.

    Raises:
        InsufficientDataError: If either regression lacks data
    """
    rows = labeled.rows(label_filter)
    along, across = _direction_brackets(labeled, rows, module)
    residuals = labeled.residuals[rows]
    return DirectionalFit(power_law_fit(along, residuals), power_law_fit(across, residuals))


def eigenfunction_decay_fit(labeled: LabeledSpectrum, s_neg: float) -> PowerFit:
    """Regress ||phi_xi||_{H^s} against lambda_xi over interior rows with lambda > 0.

    Raises:
        InsufficientDataError: If fewer than 8 such rows remain
    """
    rows = labeled.rows()
    rows = rows[labeled.eigenvalues[rows] > 0]
    norms = labeled.negative_norms(s_neg)[rows]
    return power_law_fit(labeled.eigenvalues[rows], norms)
