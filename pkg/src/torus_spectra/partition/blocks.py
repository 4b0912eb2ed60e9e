"""Extended blocks E^(s)_M and the invariant classes W_{M,beta}.

E^(0) = Z^(0) and, level by level,
E^(s)_M = (B^(s)_M + M) ∩ Z^(s)_M ∩ complement of E^(0..s-1).
Coset closure (B^(s)_M + M) is looked up among the raw blocks of an enlarged
box; a negative answer is only trusted when every point of the coset that
could lie in Z^(s)_M is inside that box.
"""

import logging
import math
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
import numpy.typing as npt

from torus_spectra.errors import ConstantsTooSmallError
from torus_spectra.lattice import FloatArray, IntArray, Lattice, dual_norm, lattice_cube
from torus_spectra.partition.params import PartitionParams
from torus_spectra.partition.zones import ZoneRecord, ZoneTable, projection_radius
from torus_spectra.submodules import Submodule, contains, coset_keys, coset_representative, project
from torus_spectra.workers import parallel_map

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 6
MIN_INNER_RADIUS = 5

CERTAIN = "certain"
UNCERTAIN = "boundary-uncertain"

ClassKey = tuple[int, tuple[tuple[int, ...], ...], tuple[int, ...]]
# closure value per point: True, False or None (undecided inside the box)
Closure = Optional[bool]


@dataclass(frozen=True, eq=False)
class BlockLabel:
    """Label (M, beta, s) of a point, i.e. the class W_{M,beta} it belongs to.

    Attributes:
        module: Saturated module M of rank s
        beta: Canonical representative of xi + M in M^(c)
        level: s = rank M
        certain: False when the label could change with data outside the box
    """

    module: Submodule
    beta: IntArray
    level: int
    certain: bool = True

    @property
    def certainty(self) -> str:
        return CERTAIN if self.certain else UNCERTAIN

    @property
    def key(self) -> ClassKey:
        return (self.level, self.module.key, tuple(int(x) for x in self.beta))

    def to_json(self, xi: npt.ArrayLike) -> dict[str, Any]:
        return {
            "xi": np.asarray(xi).tolist(),
            "M": self.module.basis.tolist(),
            "beta": self.beta.tolist(),
            "s": self.level,
            "certainty": self.certainty,
        }


@dataclass
class PartitionResult:
    """Labels of the inner points together with the data they were derived from.

    Attributes:
        lattice: The lattice
        params: Parameters actually used (after escalation)
        points: Labeled points (rows)
        labels: One BlockLabel per point
        records: Zone record of every labeled point
        inner_radius: Sup-norm radius N of the inner cube, None for a finite index set
        margin: Width of the enlargement used for coset closure
        attempts: Number of escalation attempts made
        conflicts: Points with more than one candidate label in the last attempt
    """

    lattice: Lattice
    params: PartitionParams
    points: IntArray
    labels: list[BlockLabel]
    records: list[ZoneRecord]
    inner_radius: Optional[int] = None
    margin: int = 0
    attempts: int = 1
    conflicts: int = 0
    _position: dict[tuple[int, ...], int] = field(default_factory=dict, init=False, repr=False)
    _classes: Optional[dict[ClassKey, IntArray]] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        self._position = {tuple(int(x) for x in p): i for i, p in enumerate(self.points)}

    def row_of(self, xi: npt.ArrayLike) -> int:
        """Row of a point, -1 when it was not labeled."""
        return self._position.get(tuple(int(x) for x in np.asarray(xi).reshape(-1)), -1)

    def label_of(self, xi: npt.ArrayLike) -> BlockLabel:
        row = self.row_of(xi)
        if row < 0:
            msg = f"Point {np.asarray(xi).tolist()} is outside the partitioned set"
            raise KeyError(msg)
        return self.labels[row]

    def classes(self) -> dict[ClassKey, IntArray]:
        """Rows of every class W_{M,beta}, keys sorted by (s, M, beta)."""
        if self._classes is not None:
            return self._classes
        grouped: dict[ClassKey, list[int]] = defaultdict(list)
        for row, label in enumerate(self.labels):
            grouped[label.key].append(row)
        self._classes = {key: np.asarray(grouped[key], dtype=np.int64) for key in sorted(grouped)}
        return self._classes

    def class_sizes(self) -> dict[str, Any]:
        per_level: dict[int, list[int]] = defaultdict(list)
        for key, rows in self.classes().items():
            per_level[key[0]].append(int(rows.size))
        return {
            str(level): {"classes": len(sizes), "points": sum(sizes), "largest": max(sizes)}
            for level, sizes in sorted(per_level.items())
        }

    def trivial_density(self, radii: Optional[list[float]] = None) -> dict[float, float]:
        """Fraction of points with label level 0 inside balls ||xi + kappa|| <= R.

        Default radii are N/8, N/4, N/2 and N scaled to the largest ball inside
        the inner cube.
        """
        norms = dual_norm(self.lattice, self.points + self.lattice.kappa)
        norms = np.atleast_1d(np.asarray(norms, dtype=float))
        if radii is None:
            largest = self.largest_ball()
            radii = [largest / 8, largest / 4, largest / 2, largest]
        trivial = np.array([label.level == 0 for label in self.labels], dtype=bool)
        density = {}
        for radius in radii:
            inside = norms <= radius + 1e-9
            density[float(radius)] = float(trivial[inside].mean()) if inside.any() else 0.0
        return density

    def largest_ball(self) -> float:
        """Radius of the largest ball ||xi + kappa|| <= R contained in the labeled set."""
        if self.inner_radius is None:
            norms = np.atleast_1d(np.asarray(dual_norm(self.lattice, self.points + self.lattice.kappa), dtype=float))
            return float(norms.max()) if norms.size else 0.0
        lam_min = float(np.linalg.eigvalsh(self.lattice.metric_g_star)[0])
        return float(self.inner_radius * math.sqrt(lam_min))

    def top_radius(self) -> Optional[float]:
        """max ||xi + kappa|| over E^(d), None when E^(d) has no labeled point."""
        d = self.lattice.dimension
        rows = [row for row, label in enumerate(self.labels) if label.level == d]
        if not rows:
            return None
        return float(np.max(np.atleast_1d(dual_norm(self.lattice, self.points[rows] + self.lattice.kappa))))

    def uncertain_count(self) -> int:
        return sum(1 for label in self.labels if not label.certain)

    def summary(self) -> dict[str, Any]:
        return {
            "points": int(self.points.shape[0]),
            "uncertain": self.uncertain_count(),
            "class_sizes": self.class_sizes(),
            "trivial_density": {f"{r:.6g}": v for r, v in self.trivial_density().items()},
            "top_radius": self.top_radius(),
        }

    def to_json(self) -> dict[str, Any]:
        return {
            "inner_radius": self.inner_radius,
            "margin": self.margin,
            "attempts": self.attempts,
            "params": self.params.schedule(self.lattice.dimension),
            "summary": self.summary(),
            "labels": [label.to_json(xi) for xi, label in zip(self.points, self.labels)],
        }


def _radius_table(lattice: Lattice, params: PartitionParams, level: int, ell_max: float) -> FloatArray:
    """projection_radius at ell = 0, 1, 2, ..., ceil(ell_max); read at ceil(ell) it bounds from above."""
    return np.array(
        [projection_radius(lattice, params, level, float(ell)) for ell in range(math.ceil(ell_max) + 1)], dtype=float
    )


def _coset_inside_box(
    lattice: Lattice, params: PartitionParams, module: Submodule, level: int, points: IntArray, box_radius: int
) -> npt.NDArray[np.bool_]:
    """Whether every point of xi + M that could lie in Z^(s)_M is inside the cube of the given radius."""
    shifted = points + lattice.kappa
    _, perp = project(lattice, shifted, module)
    ell = np.atleast_1d(np.asarray(dual_norm(lattice, perp), dtype=float))
    table = _radius_table(lattice, params, level, float(ell.max()) if ell.size else 0.0)
    t = table[np.ceil(ell - 1e-12).clip(0).astype(np.int64)]
    basis = module.basis.astype(float)
    gram_inv = np.linalg.inv(basis @ lattice.metric_g_star @ basis.T)
    spread = np.sqrt(np.einsum("ai,ab,bi->i", basis, gram_inv, basis))
    foot = perp - lattice.kappa
    return np.asarray(np.all(np.abs(foot) + t[:, None] * spread[None, :] <= box_radius + 1e-9, axis=1))


def margin_for(lattice: Lattice, params: PartitionParams, inner_radius: int) -> int:
    """Width of the enlargement needed for coset closure around the inner cube."""
    d = lattice.dimension
    # a convex norm peaks at a corner of the cube
    ell_max = float(np.max(dual_norm(lattice, lattice_cube(d, 1) * inner_radius + lattice.kappa)))
    t_max = max(
        [projection_radius(lattice, params, s, ell_max) for s in range(1, d)] + [projection_radius(lattice, params, d, 0.0)]
    )
    lam_min = float(np.linalg.eigvalsh(lattice.metric_g_star)[0])
    margin = math.ceil(t_max / math.sqrt(lam_min)) + 1
    if margin > inner_radius:
        logger.warning("Margin %d capped at the inner radius %d; more points will be uncertain", margin, inner_radius)
        margin = inner_radius
    return margin


def _raw_block_cosets(
    points: IntArray, records: Sequence[ZoneRecord]
) -> tuple[dict[Submodule, set[tuple[int, ...]]], int]:
    """Coset keys of the raw blocks B^(s)_M for every module, and the number of ambiguous points."""
    members: dict[Submodule, list[int]] = defaultdict(list)
    ambiguous = 0
    for row, record in enumerate(records):
        modules = record.top_modules
        if len(modules) > 1:
            ambiguous += 1
        for module in modules:
            members[module].append(row)
    cosets = {
        module: {tuple(int(x) for x in key) for key in coset_keys(module, points[rows])}
        for module, rows in members.items()
    }
    return cosets, ambiguous


def label_rows(
    lattice: Lattice,
    table_points: IntArray,
    table_records: Sequence[ZoneRecord],
    rows: IntArray,
    inside: Callable[[Submodule, int, IntArray], npt.NDArray[np.bool_]],
) -> tuple[list[BlockLabel], int]:
    """Labels of the given rows of a zone table, and the number of conflicting points.

    Raw blocks are collected over the whole table. ``inside`` tells, per point,
    whether a negative closure answer can be trusted.
    """
    d = lattice.dimension
    cosets, ambiguous = _raw_block_cosets(table_points, table_records)
    points = table_points[rows]
    records = [table_records[r] for r in rows]

    wanted: dict[tuple[int, Submodule], list[int]] = defaultdict(list)
    for i, record in enumerate(records):
        for membership in record.memberships:
            wanted[(membership.level, membership.module)].append(i)

    def closure(item: tuple[tuple[int, Submodule], list[int]]) -> tuple[tuple[int, Submodule], dict[int, Closure]]:
        (level, module), members = item
        idx = np.asarray(members, dtype=np.int64)
        found = cosets.get(module, set())
        hit = np.array([tuple(int(x) for x in key) in found for key in coset_keys(module, points[idx])], dtype=bool)
        settled = inside(module, level, points[idx])
        values: dict[int, Closure] = {}
        for i, h, s in zip(members, hit, settled):
            values[i] = True if h else (False if s else None)
        return (level, module), values

    closures = dict(parallel_map(closure, sorted(wanted.items(), key=lambda item: (item[0][0], item[0][1].key))))

    labels: list[BlockLabel] = []
    conflicts = ambiguous
    for i, record in enumerate(records):
        xi = points[i]
        if record.in_trivial_zone:
            labels.append(BlockLabel(Submodule.zero(d), xi.copy(), 0, True))
            continue
        undecided = False
        chosen: Optional[BlockLabel] = None
        for level in range(1, d + 1):
            values = [(m, closures[(level, m)][i]) for m in record.modules_at(level)]
            hits = [m for m, value in values if value is True]
            undecided = undecided or any(value is None for _, value in values)
            if hits:
                if len(hits) > 1:
                    conflicts += 1
                module = hits[0]
                chosen = BlockLabel(module, coset_representative(module, xi), level, not undecided and len(hits) == 1)
                break
        if chosen is None:
            # a point's own raw block always closes; reaching this means the table is inconsistent
            level = record.top_level
            module = record.top_modules[0]
            logger.warning("No extended block closed at %s; using raw block level %d", xi.tolist(), level)
            chosen = BlockLabel(module, coset_representative(module, xi), level, False)
        labels.append(chosen)
    return labels, conflicts


def overlap_violations(result: PartitionResult) -> list[dict[str, Any]]:
    """Certain points of E^(s)_M also lying in Z^(s')_M' with s' <= s and M' not inside M."""
    found = []
    for xi, label, record in zip(result.points, result.labels, result.records):
        if not label.certain:
            continue
        for membership in record.memberships:
            if membership.level <= label.level and not contains(label.module, membership.module):
                found.append({
                    "xi": xi.tolist(),
                    "s": label.level,
                    "M": label.module.basis.tolist(),
                    "foreign_level": membership.level,
                    "foreign_M": membership.module.basis.tolist(),
                })
    return found


def _with_escalation(lattice: Lattice, params: PartitionParams, build: Callable[[PartitionParams, int], PartitionResult]) -> PartitionResult:
    current = params
    for attempt in range(1, MAX_ATTEMPTS + 1):
        result = build(current, attempt)
        overlaps = len(overlap_violations(result))
        if result.conflicts == 0 and overlaps == 0:
            if attempt > 1:
                logger.info("Partition clean after %d escalation(s): C=%s", attempt - 1, current.schedule(lattice.dimension)["C"])
            return result
        logger.info("Attempt %d: %d conflicts, %d overlaps", attempt, result.conflicts, overlaps)
        if not current.auto_escalate:
            msg = f"{result.conflicts} label conflicts and {overlaps} overlaps with a fixed C/D schedule"
            raise ConstantsTooSmallError(msg)
        current = current.escalated()
    msg = f"Partition still overlapping after {MAX_ATTEMPTS} attempts; last schedule {current.schedule(lattice.dimension)}"
    raise ConstantsTooSmallError(msg)


def extended_partition(lattice: Lattice, radius: int, params: PartitionParams) -> PartitionResult:
    """Label every point of the cube ||xi||_inf <= radius with its class W_{M,beta}.

    Args:
        lattice: The lattice
        radius: Sup-norm radius N of the inner cube (at least 5)
        params: Resonance parameters; "auto" schedules are escalated on conflicts

    Returns:
        The partition of the inner cube with certainty flags

    Raises:
        ParamsInvalidError: If the parameters are not admissible
        ConstantsTooSmallError: If conflicts persist after escalation
    """
    if radius < MIN_INNER_RADIUS:
        msg = f"Inner radius must be at least {MIN_INNER_RADIUS}, got {radius}"
        raise ValueError(msg)
    params.validate(lattice.dimension)

    def build(current: PartitionParams, attempt: int) -> PartitionResult:
        margin = margin_for(lattice, current, radius)
        outer = radius + margin
        table = ZoneTable(lattice, lattice_cube(lattice.dimension, outer), current)
        rows = np.flatnonzero(np.max(np.abs(table.points), axis=1) <= radius)

        def inside(module: Submodule, level: int, points: IntArray) -> npt.NDArray[np.bool_]:
            return _coset_inside_box(lattice, current, module, level, points, outer)

        labels, conflicts = label_rows(lattice, table.points, table.records, rows, inside)
        logger.info("Partition N=%d margin=%d: %d points labeled", radius, margin, rows.size)
        return PartitionResult(
            lattice=lattice,
            params=current,
            points=table.points[rows],
            labels=labels,
            records=[table.records[r] for r in rows],
            inner_radius=radius,
            margin=margin,
            attempts=attempt,
            conflicts=conflicts,
        )

    return _with_escalation(lattice, params, build)


def partition_points(lattice: Lattice, points: npt.ArrayLike, params: PartitionParams) -> PartitionResult:
    """Partition a finite index set E, taking coset closures inside E.

    Every label is certain. Used for the reduced operators of resonant blocks.
    """
    params.validate(lattice.dimension, sublattice=True)
    index = np.asarray(points, dtype=np.int64).reshape(-1, lattice.dimension)

    def build(current: PartitionParams, attempt: int) -> PartitionResult:
        table = ZoneTable(lattice, index, current)

        def inside(module: Submodule, level: int, pts: IntArray) -> npt.NDArray[np.bool_]:
            return np.ones(pts.shape[0], dtype=bool)

        rows = np.arange(index.shape[0])
        labels, conflicts = label_rows(lattice, table.points, table.records, rows, inside)
        return PartitionResult(
            lattice=lattice,
            params=current,
            points=index,
            labels=labels,
            records=list(table.records),
            attempts=attempt,
            conflicts=conflicts,
        )

    return _with_escalation(lattice, params, build)


def plot_records(partition: PartitionResult) -> list[dict[str, Any]]:
    """``{xi, class, s}`` records, classes numbered in (s, M, beta) order."""
    numbering = {key: n for n, key in enumerate(partition.classes())}
    return [
        {"xi": xi.tolist(), "class": numbering[label.key], "s": label.level}
        for xi, label in zip(partition.points, partition.labels)
    ]

