"""Iterative quantum normal form of -Delta_{g,kappa} + V on a truncated box.

Each step splits the current remainder entrywise, solves the homological
equation for the couplings outside the resonance cutoff and conjugates the
whole matrix exactly with exp(-iG). Whatever the conjugation leaves behind
becomes the next remainder, so L + N + R = U H U* holds at every step.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import numpy.typing as npt
from scipy.linalg import expm

from torus_spectra.errors import CutoffLeakError, InsufficientMarginError, SolverFailureError
from torus_spectra.fitting import PowerFit, power_law_fit
from torus_spectra.lattice import FloatArray, IntArray, Lattice, dual_norm, dual_norm_squared
from torus_spectra.partition.blocks import PartitionResult
from torus_spectra.partition.params import PartitionParams
from torus_spectra.symbols import (
    ComplexArray,
    FourierSymbol,
    TruncatedOperator,
    laplacian_matrix,
    midpoint_geometry,
    split_matrix,
    weyl_matrix,
)

logger = logging.getLogger(__name__)

UNITARITY_TOLERANCE = 1e-10
STEP_UNITARITY_TOLERANCE = 1e-12
# Entries below this are treated as structurally zero
ENTRY_TOLERANCE = 1e-14
_ROW_BLOCK = 256


@dataclass(frozen=True, eq=False)
class NormalFormState:
    """H = L + N + R on a box after some number of steps.

    Attributes:
        index: Box points (rows)
        eigen: Diagonal of L, i.e. ||xi + kappa||^2
        normal: Accumulated normal form N
        remainder: Remainder R
    """

    index: IntArray
    eigen: FloatArray
    normal: ComplexArray
    remainder: ComplexArray

    @property
    def total(self) -> ComplexArray:
        return np.diag(self.eigen).astype(complex) + self.normal + self.remainder


@dataclass
class NormalFormOutput:
    """Result of the iterated conjugation.

    Attributes:
        steps: Number of steps performed
        laplacian: L on the box
        normal: The normal form N as an operator
        remainder: The remainder R as an operator
        unitary: U with U H U* = L + N + R
        hamiltonian: The original H = L + V
        interior: Rows far enough from the box boundary to be trusted
        row_norms: Remainder row norms, one array per step (entry 0 is V)
        subset_leak: max |U| entry across the subset boundary, when a subset was checked
    """

    steps: int
    laplacian: TruncatedOperator
    normal: TruncatedOperator
    remainder: TruncatedOperator
    unitary: ComplexArray
    hamiltonian: TruncatedOperator
    interior: npt.NDArray[np.bool_]
    row_norms: list[FloatArray] = field(default_factory=list)
    subset_leak: Optional[float] = None

    @property
    def lattice(self) -> Lattice:
        return self.laplacian.lattice

    @property
    def index(self) -> IntArray:
        return self.laplacian.index

    def conjugation_defect(self) -> float:
        """Relative max |U H U* - (L + N + R)|."""
        u = self.unitary
        lhs = u @ self.hamiltonian.matrix @ u.conj().T
        rhs = self.laplacian.matrix + self.normal.matrix + self.remainder.matrix
        scale = max(1.0, float(np.abs(rhs).max()))
        return float(np.abs(lhs - rhs).max()) / scale

    def unitarity_defect(self) -> float:
        n = self.unitary.shape[0]
        return float(np.abs(self.unitary.conj().T @ self.unitary - np.eye(n)).max()) if n else 0.0

    def offdiagonal_support_radius(self) -> float:
        """Largest ||xi + kappa|| of a row where N has a nonzero off-diagonal entry (0 if none)."""
        off = np.abs(self.normal.matrix - np.diag(np.diag(self.normal.matrix))) > ENTRY_TOLERANCE
        rows = np.flatnonzero(off.any(axis=1))
        if rows.size == 0:
            return 0.0
        return float(np.max(dual_norm(self.lattice, self.index[rows] + self.lattice.kappa)))

    def to_json(self) -> dict[str, Any]:
        profile = [float(norms[self.interior].max()) if self.interior.any() else 0.0 for norms in self.row_norms]
        return {
            "steps": self.steps,
            "box_size": int(self.index.shape[0]),
            "interior_size": int(self.interior.sum()),
            "max_interior_remainder": profile,
            "unitarity_defect": self.unitarity_defect(),
            "conjugation_defect": self.conjugation_defect(),
            "normal_offdiagonal_radius": self.offdiagonal_support_radius(),
            "subset_leak": self.subset_leak,
        }


def homological_generator(lattice: Lattice, r_nr: TruncatedOperator, params: PartitionParams) -> ComplexArray:
    """Solve i[L, G] + R_nr = 0 entrywise: G[xi+k, xi] = i R_nr[xi+k, xi] / (lambda_{xi+k} - lambda_xi).

    Raises:
        CutoffLeakError: If a nonzero entry sits on a denominator below
            (1/2) <xi_k>^delta ||k||^-tau
    """
    index = r_nr.index
    n = r_nr.size
    eigen = dual_norm_squared(lattice, index + lattice.kappa)
    values = r_nr.matrix.copy()
    np.fill_diagonal(values, 0.0)
    generator = np.zeros((n, n), dtype=complex)
    for start in range(0, n, _ROW_BLOCK):
        rows = slice(start, min(start + _ROW_BLOCK, n))
        _, knorm, _, br = midpoint_geometry(lattice, index, rows)
        gap = eigen[rows, None] - eigen[None, :]
        active = np.abs(values[rows]) > 0
        floor = 0.5 * np.power(br, params.delta) * np.power(np.where(knorm > 0, knorm, 1.0), -params.tau)
        leak = active & (np.abs(gap) < floor * (1.0 - 1e-9))
        if leak.any():
            i, j = np.argwhere(leak)[0]
            msg = (
                f"Nonresonant entry at ({index[start + i].tolist()}, {index[j].tolist()}) has gap "
                f"{gap[i, j]:.3e} below the floor {floor[i, j]:.3e}"
            )
            raise CutoffLeakError(msg)
        block = np.zeros(gap.shape, dtype=complex)
        block[active] = 1j * values[rows][active] / gap[active]
        generator[rows] = block
    return generator


def _step_unitary(generator: ComplexArray) -> ComplexArray:
    try:
        unitary = np.asarray(expm(-1j * generator), dtype=complex)
    except (ValueError, np.linalg.LinAlgError) as e:
        msg = f"Matrix exponential failed: {e}"
        raise SolverFailureError(msg) from e
    n = unitary.shape[0]
    defect = float(np.abs(unitary @ unitary.conj().T - np.eye(n)).max()) if n else 0.0
    if defect > STEP_UNITARITY_TOLERANCE:
        msg = f"Step unitary is off by {defect:.3e}"
        raise SolverFailureError(msg)
    return unitary


def normal_form_step(
    lattice: Lattice, state: NormalFormState, params: PartitionParams
) -> tuple[NormalFormState, ComplexArray]:
    """One conjugation step: N' = N + <R> + R^res, R' = U H U* - L - N'.

    Returns:
        The next state and the step unitary U = exp(-iG)
    """
    operator = TruncatedOperator(lattice, state.index, state.remainder, "remainder")
    split = split_matrix(operator, params)
    generator = homological_generator(lattice, operator.with_matrix(split.eliminable, "eliminable"), params)
    unitary = _step_unitary(generator)
    conjugated = unitary @ state.total @ unitary.conj().T
    conjugated = (conjugated + conjugated.conj().T) / 2.0
    normal = state.normal + split.average + split.absorbable
    normal = (normal + normal.conj().T) / 2.0
    remainder = conjugated - np.diag(state.eigen) - normal
    return NormalFormState(state.index, state.eigen, normal, remainder), unitary


def interior_rows(lattice: Lattice, index: IntArray, width: float) -> npt.NDArray[np.bool_]:
    """Rows at g*-distance at least ``width`` from the outside of the box.

    The box is taken to be the ball ||xi + kappa|| <= max over its points.
    """
    norms = np.atleast_1d(np.asarray(dual_norm(lattice, index + lattice.kappa), dtype=float))
    if norms.size == 0:
        return np.zeros(0, dtype=bool)
    return np.asarray(norms <= norms.max() - width + 1e-9)


def _subset_leak(matrix: ComplexArray, subset: npt.NDArray[np.bool_]) -> float:
    across = subset[:, None] != subset[None, :]
    return float(np.abs(matrix[across]).max()) if across.any() else 0.0


def normal_form_from_matrix(
    lattice: Lattice,
    index: npt.ArrayLike,
    potential: npt.ArrayLike,
    params: PartitionParams,
    steps: int,
    support_radius: float = 1.0,
    subset: Optional[npt.ArrayLike] = None,
) -> NormalFormOutput:
    """Normal form of L + potential for an already assembled potential matrix.

    Args:
        lattice: The lattice
        index: Box points (rows)
        potential: Hermitian potential matrix on the box
        params: Resonance parameters
        steps: Number of conjugation steps
        support_radius: Fourier support radius of the potential, sets the interior margin
        subset: Optional boolean mask (or row list) of a set the potential should leave invariant

    Raises:
        InsufficientMarginError: If no interior row survives the margin
    """
    points = np.asarray(index, dtype=np.int64).reshape(-1, lattice.dimension)
    laplacian = laplacian_matrix(lattice, points)
    v = TruncatedOperator(lattice, points, np.asarray(potential, dtype=complex), "potential")
    v.check_hermitian()
    hamiltonian = laplacian.with_matrix(laplacian.matrix + v.matrix, "hamiltonian")

    interior = interior_rows(lattice, points, steps * support_radius * 2.0)
    if steps > 0 and not interior.any():
        msg = f"Box of {points.shape[0]} points has no interior rows for {steps} steps of width {support_radius}"
        raise InsufficientMarginError(msg)

    eigen = np.real(np.diag(laplacian.matrix)).astype(float)
    n = points.shape[0]
    state = NormalFormState(points, eigen, np.zeros((n, n), dtype=complex), v.matrix.copy())
    unitary = np.eye(n, dtype=complex)
    row_norms = [np.linalg.norm(state.remainder, axis=1)]
    for step in range(1, steps + 1):
        state, step_unitary = normal_form_step(lattice, state, params)
        unitary = step_unitary @ unitary
        row_norms.append(np.linalg.norm(state.remainder, axis=1))
        logger.info(
            "Step %d: max interior remainder row norm %.3e",
            step,
            float(row_norms[-1][interior].max()) if interior.any() else 0.0,
        )

    leak = None
    if subset is not None:
        mask = np.zeros(n, dtype=bool)
        chosen = np.asarray(subset)
        if chosen.dtype == bool:
            mask[:] = chosen
        else:
            mask[chosen.astype(np.int64)] = True
        if _subset_leak(v.matrix, mask) <= ENTRY_TOLERANCE:
            leak = _subset_leak(unitary, mask)
        else:
            logger.warning("Potential does not leave the subset invariant; projector check skipped")

    return NormalFormOutput(
        steps=steps,
        laplacian=laplacian,
        normal=laplacian.with_matrix(state.normal, "normal"),
        remainder=laplacian.with_matrix(state.remainder, "remainder"),
        unitary=unitary,
        hamiltonian=hamiltonian,
        interior=interior,
        row_norms=row_norms,
        subset_leak=leak,
    )


def normal_form(
    lattice: Lattice,
    potential: FourierSymbol,
    box: npt.ArrayLike,
    params: PartitionParams,
    steps: int,
    subset: Optional[npt.ArrayLike] = None,
) -> NormalFormOutput:
    """Conjugate -Delta_{g,kappa} + V on the box to L + N + R in ``steps`` steps.

    Args:
        lattice: The lattice
        potential: Hermitian finite-Fourier potential V
        box: Box points (rows), normally a ball ||xi + kappa|| <= R
        params: Resonance parameters
        steps: Number of steps
        subset: Optional set the potential should leave invariant; U is checked against it

    Returns:
        The normal form, remainder and unitary with diagnostics
    """
    v = weyl_matrix(lattice, potential, box)
    return normal_form_from_matrix(
        lattice, v.index, v.matrix, params, steps, support_radius=max(1.0, potential.support_radius(lattice)), subset=subset
    )


def verify_block_invariance(output: NormalFormOutput, partition: PartitionResult) -> float:
    """max |(L + N)[xi', xi]| over certain xi and xi' in a different class W_{M,beta}.

    Box points missing from the partition are skipped.
    """
    rows = np.array([partition.row_of(xi) for xi in output.index], dtype=np.int64)
    known = rows >= 0
    keys = [partition.labels[r].key if r >= 0 else None for r in rows]
    certain = np.array([r >= 0 and partition.labels[r].certain for r in rows], dtype=bool)
    matrix = output.normal.matrix
    worst = 0.0
    for j in np.flatnonzero(certain):
        column = np.abs(matrix[:, j])
        for i in np.flatnonzero((column > 0) & known):
            if keys[i] != keys[j]:
                worst = max(worst, float(column[i]))
    return worst


def remainder_profile(output: NormalFormOutput) -> list[tuple[float, float, int]]:
    """Rows ``(||xi + kappa||, remainder row norm, step)`` over interior rows, every step."""
    norms = np.atleast_1d(np.asarray(dual_norm(output.lattice, output.index + output.lattice.kappa), dtype=float))
    rows = np.flatnonzero(output.interior)
    return [(float(norms[i]), float(step_norms[i]), step) for step, step_norms in enumerate(output.row_norms) for i in rows]


def fit_remainder_decay(output: NormalFormOutput, step: Optional[int] = None) -> PowerFit:
    """Fit interior remainder row norms against <xi + kappa> after the given step (default: last).

    Raises:
        InsufficientDataError: If too few interior rows carry a nonzero remainder
    """
    chosen = output.steps if step is None else step
    brackets = np.sqrt(1.0 + dual_norm_squared(output.lattice, output.index + output.lattice.kappa))
    rows = output.interior
    return power_law_fit(brackets[rows], output.row_norms[chosen][rows])


def decay_target(params: PartitionParams, steps: int) -> float:
    """Expected remainder exponent -2 delta steps for bounded potentials."""
    return -2.0 * params.delta * steps
