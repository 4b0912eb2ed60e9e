"""torus-spectra: spectral asymptotics of Schroedinger operators on flat tori."""

from torus_spectra.config import RunConfig, load_config
from torus_spectra.dimred import ReductionTree, iterate_reduction, reduce_block
from torus_spectra.errors import TorusSpectraError
from torus_spectra.lattice import Lattice, build_lattice, lattice_ball
from torus_spectra.normalform import NormalFormOutput, normal_form
from torus_spectra.partition import PartitionParams, PartitionResult, extended_partition, verify_geometry
from torus_spectra.pipeline import Pipeline
from torus_spectra.spectra import (
    LabeledSpectrum,
    eigensolve,
    find_clusters,
    label_eigenvalues,
    quasimode_match,
    weyl_count_check,
)
from torus_spectra.submodules import Submodule, saturate
from torus_spectra.symbols import FourierSymbol, weyl_matrix

__version__ = "0.0.1"

__all__ = [
    "FourierSymbol",
    "LabeledSpectrum",
    "Lattice",
    "NormalFormOutput",
    "PartitionParams",
    "PartitionResult",
    "Pipeline",
    "ReductionTree",
    "RunConfig",
    "Submodule",
    "TorusSpectraError",
    "build_lattice",
    "eigensolve",
    "extended_partition",
    "find_clusters",
    "iterate_reduction",
    "label_eigenvalues",
    "lattice_ball",
    "load_config",
    "normal_form",
    "quasimode_match",
    "reduce_block",
    "saturate",
    "verify_geometry",
    "weyl_count_check",
    "weyl_matrix",
]
