"""Resonance partition of the dual lattice into the classes W_{M,beta}."""

from torus_spectra.partition.blocks import (
    BlockLabel,
    PartitionResult,
    extended_partition,
    label_rows,
    margin_for,
    overlap_violations,
    partition_points,
    plot_records,
)
from torus_spectra.partition.params import PartitionParams
from torus_spectra.partition.verify import GeometryReport, verify_geometry
from torus_spectra.partition.zones import (
    ZoneMembership,
    ZoneRecord,
    ZoneTable,
    block_label_raw,
    projection_radius,
    resonant_vectors,
    zone_membership,
)

__all__ = [
    "BlockLabel",
    "GeometryReport",
    "PartitionParams",
    "PartitionResult",
    "ZoneMembership",
    "ZoneRecord",
    "ZoneTable",
    "block_label_raw",
    "extended_partition",
    "label_rows",
    "margin_for",
    "overlap_violations",
    "partition_points",
    "plot_records",
    "projection_radius",
    "resonant_vectors",
    "verify_geometry",
    "zone_membership",
]
