"""Empirical checks of the block geometry on a computed partition."""

import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from torus_spectra.lattice import bracket, dual_norm
from torus_spectra.partition.blocks import PartitionResult, overlap_violations
from torus_spectra.partition.params import PartitionParams
from torus_spectra.partition.zones import frequency_ball, projection_radius, projection_ratio
from torus_spectra.submodules import contains, project

logger = logging.getLogger(__name__)

ESCALATION_ADVICE = "multiply C_s and D_s by 2 and recompute"


@dataclass
class GeometryReport:
    """Outcome of the geometry checks.

    Attributes:
        overlaps: Points of E^(s)_M found in a foreign zone Z^(s')_M', s' <= s
        projection_constant: Fitted K per level, max of ||(xi+kappa)_M|| / <xi+kappa>^(delta_{s-1}+d eps)
        projection_violations: Zone points exceeding the closed-form projection radius
        trivial_density: Density of E^(0) per ball radius
        density_nondecreasing: Whether that density never decreases with the radius
        separation_violations: Translates xi + k' of E^(s)_M points landing in a foreign zone
        separation_checked: Number of translates examined
        top_radius: Observed max ||xi + kappa|| over E^(d)
        uncertain: Number of boundary-uncertain labels
    """

    overlaps: list[dict[str, Any]] = field(default_factory=list)
    projection_constant: dict[int, float] = field(default_factory=dict)
    projection_violations: int = 0
    trivial_density: dict[float, float] = field(default_factory=dict)
    density_nondecreasing: bool = True
    separation_violations: int = 0
    separation_checked: int = 0
    top_radius: Optional[float] = None
    uncertain: int = 0

    @property
    def clean(self) -> bool:
        return not self.overlaps and self.separation_violations == 0 and self.projection_violations == 0

    @property
    def advice(self) -> Optional[str]:
        return None if self.clean else ESCALATION_ADVICE

    def to_json(self) -> dict[str, Any]:
        return {
            "overlap_violations": len(self.overlaps),
            "overlap_examples": self.overlaps[:10],
            "projection_constant": {str(s): k for s, k in sorted(self.projection_constant.items())},
            "projection_violations": self.projection_violations,
            "trivial_density": {f"{r:.6g}": v for r, v in self.trivial_density.items()},
            "density_nondecreasing": self.density_nondecreasing,
            "separation_violations": self.separation_violations,
            "separation_checked": self.separation_checked,
            "top_radius": self.top_radius,
            "uncertain": self.uncertain,
            "advice": self.advice,
        }


def _projection_check(partition: PartitionResult, params: PartitionParams, report: GeometryReport) -> None:
    lattice = partition.lattice
    for xi, record in zip(partition.points, partition.records):
        shifted = xi + lattice.kappa
        for membership in record.memberships:
            along, perp = project(lattice, shifted, membership.module)
            ratio = float(projection_ratio(lattice, params, membership.level, along, shifted))
            level = membership.level
            report.projection_constant[level] = max(report.projection_constant.get(level, 0.0), ratio)
            bound = projection_radius(lattice, params, level, float(dual_norm(lattice, perp)))
            if float(dual_norm(lattice, along)) > bound + 1e-9:
                report.projection_violations += 1


def _separation_check(partition: PartitionResult, params: PartitionParams, report: GeometryReport) -> None:
    lattice = partition.lattice
    d = lattice.dimension
    rows = [r for r, label in enumerate(partition.labels) if label.certain and 1 <= label.level < d]
    if not rows:
        return
    norms = np.atleast_1d(np.asarray(bracket(lattice, partition.points[rows] + lattice.kappa), dtype=float))
    steps = frequency_ball(lattice, 2.0 * float(norms.max()) ** params.epsilon + 2.0)
    for row in rows:
        xi = partition.points[row]
        label = partition.labels[row]
        for k in steps:
            if dual_norm(lattice, k) > bracket(lattice, xi + lattice.kappa + k / 2.0) ** params.epsilon:
                continue
            target = partition.row_of(xi + k)
            if target < 0:
                continue
            report.separation_checked += 1
            for membership in partition.records[target].memberships:
                if membership.level <= label.level and not contains(label.module, membership.module):
                    report.separation_violations += 1
                    break


def verify_geometry(partition: PartitionResult, params: Optional[PartitionParams] = None) -> GeometryReport:
    """Check non-overlap, projection bounds, density of E^(0) and separation.

    Report-only: violations are counted and come with escalation advice.

    Args:
        partition: A computed partition
        params: Parameters to check against; defaults to those the partition used
    """
    used = params or partition.params
    report = GeometryReport(
        overlaps=overlap_violations(partition),
        top_radius=partition.top_radius(),
        uncertain=partition.uncertain_count(),
    )
    _projection_check(partition, used, report)
    density = partition.trivial_density()
    report.trivial_density = density
    values = [density[r] for r in sorted(density)]
    report.density_nondecreasing = all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    _separation_check(partition, used, report)
    if not report.clean:
        logger.warning(
            "Geometry check: %d overlaps, %d separation violations; %s",
            len(report.overlaps),
            report.separation_violations,
            ESCALATION_ADVICE,
        )
    return report
