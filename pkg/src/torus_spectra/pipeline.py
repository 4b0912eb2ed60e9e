"""End-to-end orchestration: lattice, partition, normal form, reduction, spectra, verification."""

import csv
import json
import logging
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from torus_spectra.config import RunConfig
from torus_spectra.dimred import ReductionNode, ReductionTree, eigenvalues, iterate_reduction
from torus_spectra.errors import InsufficientDataError, TorusSpectraError, WindowExhaustedError
from torus_spectra.fitting import PowerFit
from torus_spectra.lattice import IntArray, lattice_ball
from torus_spectra.normalform import (
    NormalFormOutput,
    decay_target,
    fit_remainder_decay,
    normal_form,
    remainder_profile,
    verify_block_invariance,
)
from torus_spectra.partition import PartitionResult, extended_partition, plot_records, verify_geometry
from torus_spectra.spectra import (
    Eigenpairs,
    LabeledSpectrum,
    asymptotic_fit,
    cluster_count_constant,
    directional_fit,
    eigenfunction_decay_fit,
    eigensolve,
    find_clusters,
    label_eigenvalues,
    quasimode_suite,
    weyl_count_check,
)

logger = logging.getLogger(__name__)

WEYL_RADII = (5.0, 10.0, 20.0)
# Accepted remainder slope as a fraction of the target exponent
DECAY_ACCEPTANCE = 0.7
SPECTRAL_TOLERANCE = 1e-10


def _fit_record(fit: Callable[[], PowerFit]) -> dict[str, Any]:
    try:
        result = fit()
    except InsufficientDataError as e:
        return {"exact": e.exact, "fit": None, "reason": str(e)}
    low, high = result.band()
    return {"exact": False, "fit": result.to_json(), "band": [low, high]}


def _max_defect(nodes: list[ReductionNode]) -> float:
    return max((max(node.defect, _max_defect(node.children)) for node in nodes), default=0.0)


class Pipeline:
    """Runs the configured stages and writes their artifacts.

    Intermediate results are computed on first use, so any stage can run
    alone and ``verify`` can run without writing the other artifacts.

    Example:
        >>> from torus_spectra.config import load_config
        >>> pipeline = Pipeline(load_config("configs/d1_cos.json"), verbose=True)  # doctest: +SKIP
        >>> pipeline.run()  # doctest: +SKIP
    """

    def __init__(self, config: RunConfig, verbose: bool = True, emit_plot_data: bool = False) -> None:
        """Initialize the pipeline.

        Args:
            config: Validated run configuration
            verbose: Whether to print progress lines
            emit_plot_data: Whether the partition stage also writes plot.json
        """
        self.config = config
        self.verbose = verbose
        self.emit_plot_data = emit_plot_data
        self.written: list[Path] = []

    def _say(self, line: str) -> None:
        if self.verbose:
            print(line)

    @property
    def meta(self) -> dict[str, Any]:
        from torus_spectra import __version__

        return {"config_hash": self.config.hash, "version": __version__}

    def _write_json(self, name: str, payload: dict[str, Any]) -> Path:
        path = self.config.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"meta": self.meta, **payload}, indent=2) + "\n", encoding="utf-8")
        self.written.append(path)
        self._say(f"   📄 {path}")
        return path

    def _write_csv(self, name: str, rows: list[dict[str, Any]], columns: list[str]) -> Path:
        path = self.config.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            handle.write(f"# torus-spectra {self.meta['version']} config {self.meta['config_hash']}\n")
            writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        self.written.append(path)
        self._say(f"   📄 {path}")
        return path

    @cached_property
    def box(self) -> IntArray:
        return lattice_ball(self.config.lattice, self.config.radius)

    @cached_property
    def partition(self) -> PartitionResult:
        radius = self.config.partition_radius
        if radius is None:
            radius = max(5, int(np.abs(self.box).max(initial=0)))
        self._say(f"🧩 Partitioning the cube of sup-radius {radius}...")
        result = extended_partition(self.config.lattice, radius, self.config.params)
        self._say(f"   {result.points.shape[0]} points, {len(result.classes())} classes, {result.attempts} attempt(s)")
        return result

    @cached_property
    def output(self) -> NormalFormOutput:
        self._say(f"🔁 Normal form: {self.config.steps} steps on {self.box.shape[0]} modes...")
        return normal_form(self.config.lattice, self.config.potential, self.box, self.config.params, self.config.steps)

    @cached_property
    def tree(self) -> ReductionTree:
        self._say(f"🌳 Reducing resonant blocks (depth {self.config.depth})...")
        return iterate_reduction(
            self.config.lattice,
            self.config.potential,
            self.box,
            self.config.params,
            depth=self.config.depth,
            steps=self.config.steps,
            partition=self.partition,
            output=self.output,
        )

    @cached_property
    def eigenpairs(self) -> Eigenpairs:
        self._say("🧮 Diagonalising H on the box...")
        return eigensolve(self.output.hamiltonian)

    @cached_property
    def labeled(self) -> LabeledSpectrum:
        return label_eigenvalues(
            self.eigenpairs,
            self.output,
            self.partition,
            self.tree,
            window=self.config.label_window,
            exponent=self.config.cluster_exponent,
        )

    def lattice_info(self) -> None:
        self._write_json("lattice.json", {"lattice": self.config.lattice.to_json()})

    def partition_stage(self) -> None:
        self._write_json("partition.json", {"partition": self.partition.to_json()})
        if self.emit_plot_data:
            self._write_json("plot.json", {"points": plot_records(self.partition)})

    def normal_form_stage(self) -> None:
        decay = {
            str(step): {
                "target": decay_target(self.config.params, step),
                **_fit_record(lambda step=step: fit_remainder_decay(self.output, step)),
            }
            for step in range(1, self.output.steps + 1)
        }
        self._write_json("nf.json", {"normal_form": self.output.to_json(), "decay": decay})
        rows = [{"norm": n, "row_norm": r, "step": s} for n, r, s in remainder_profile(self.output)]
        self._write_csv("nf_decay.csv", rows, ["norm", "row_norm", "step"])
        self._write_json("tree.json", {"tree": self.tree.to_json()})

    def spectrum_stage(self) -> None:
        records = self.labeled.records(self.config.sobolev_order)
        columns = list(records[0]) if records else ["xi", "lambda"]
        self._write_csv("spectrum.csv", records, columns)

    def _potential_bound(self) -> float:
        shifted = self.box + self.config.lattice.kappa
        potential = self.config.potential
        return float(sum(np.abs(potential.coefficient(tuple(k), shifted)).max(initial=0.0) for k in potential.support))

    def _weyl_checks(self) -> list[dict[str, Any]]:
        bound = self._potential_bound()
        checks = []
        for radius in WEYL_RADII:
            if radius > self.config.radius:
                continue
            try:
                count, limit = weyl_count_check(self.eigenpairs.values, self.config.lattice, radius, bound)
            except ValueError as e:
                checks.append({"radius": radius, "skipped": str(e)})
                continue
            checks.append({"radius": radius, "count": count, "bound": limit, "held": count <= limit})
        return checks

    def _cluster_check(self) -> dict[str, Any]:
        values = np.sort(self.labeled.eigenvalues[self.labeled.interior])
        try:
            clusters = find_clusters(values, self.config.label_window, self.config.cluster_exponent)
        except WindowExhaustedError as e:
            return {"clusters": None, "reason": str(e)}
        violations = clusters.invariant_violations(cluster_count_constant(self.config.lattice), self.config.dimension)
        return {"clusters": len(clusters), "violations": violations}

    def _directional(self) -> Optional[dict[str, Any]]:
        d = self.config.dimension
        counts: dict[Any, int] = {}
        for row in self.labeled.rows():
            label = self.labeled.labels[row]
            if label is not None and 0 < label.level < d and label.certain:
                counts[label.module] = counts.get(label.module, 0) + 1
        if not counts:
            return None
        module = max(counts, key=lambda m: (counts[m], m.key))
        try:
            fit = directional_fit(self.labeled, module, lambda label: label.module == module)
        except InsufficientDataError as e:
            return {"M": module.basis.tolist(), "fit": None, "reason": str(e)}
        return {"M": module.basis.tolist(), **fit.to_json()}

    def verification(self) -> dict[str, Any]:
        """Every check of the run, as one report."""
        output = self.output
        spectrum = self.eigenpairs.values
        conjugated = eigenvalues(output.laplacian.matrix + output.normal.matrix + output.remainder.matrix)
        scale = max(1.0, float(np.abs(spectrum).max(initial=0.0)))
        conservation = float(np.abs(spectrum - conjugated).max(initial=0.0)) / scale
        defect = _max_defect(self.tree.nodes)
        return {
            "geometry": verify_geometry(self.partition).to_json(),
            "block_invariance": verify_block_invariance(output, self.partition),
            "unitarity_defect": output.unitarity_defect(),
            "conjugation_defect": output.conjugation_defect(),
            "spectral_conservation": conservation,
            "spectral_conservation_held": conservation <= SPECTRAL_TOLERANCE,
            "reduction": {
                "nodes": len(self.tree.nodes),
                "depth": self.tree.depth(),
                "max_defect": defect,
                "coercivity_violations": self.tree.coercivity_violations(),
            },
            "remainder_decay": {
                str(step): {
                    "target": decay_target(self.config.params, step),
                    "acceptance": DECAY_ACCEPTANCE * decay_target(self.config.params, step),
                    **_fit_record(lambda step=step: fit_remainder_decay(output, step)),
                }
                for step in range(1, output.steps + 1)
            },
            "labeling": self.labeled.to_json(),
            "asymptotics": _fit_record(lambda: asymptotic_fit(self.labeled, lambda label: label.level == 0)),
            "directional": self._directional(),
            "eigenfunction_decay": _fit_record(
                lambda: eigenfunction_decay_fit(self.labeled, self.config.sobolev_order)
            ),
            "weyl": self._weyl_checks(),
            "clusters": self._cluster_check(),
            "quasimode": quasimode_suite(self.config.quasimode_trials, self.config.seed).to_json(),
        }

    def verify_stage(self) -> None:
        self._say("🔍 Verifying...")
        self._write_json("verify.json", {"verify": self.verification()})

    def run(self, stages: Optional[list[str]] = None, verify_only: bool = False) -> list[Path]:
        """Run the given stages (default: the configured ones) and return the written paths.

        Raises:
            TorusSpectraError: If a stage fails
        """
        handlers: dict[str, Callable[[], None]] = {
            "lattice-info": self.lattice_info,
            "partition": self.partition_stage,
            "normal-form": self.normal_form_stage,
            "spectrum": self.spectrum_stage,
            "verify": self.verify_stage,
        }
        chosen = ["verify"] if verify_only else list(stages or self.config.commands)
        self._say(f"🚀 torus-spectra run {self.meta['config_hash'][:12]} -> {self.config.output_dir}")
        try:
            for stage in chosen:
                handlers[stage]()
        except TorusSpectraError as e:
            self._say(f"❌ {type(e).__name__}: {e}")
            raise
        self._say(f"✅ Done: {len(self.written)} artifacts")
        return list(self.written)
