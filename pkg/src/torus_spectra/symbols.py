"""Finite-Fourier torus symbols and their Weyl quantization on truncated boxes.

A symbol a(x, xi) = sum_k a_k(xi) e^{ik.x} is stored as a map from integer
frequencies k to coefficient evaluators. Evaluators receive xi *without* the
Floquet shift; cutoffs add kappa themselves.
"""

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Optional, Union

import numpy as np
import numpy.typing as npt

from torus_spectra.errors import ConfigError, NotSelfAdjointError
from torus_spectra.lattice import FloatArray, IntArray, Lattice, bracket, dual_norm, dual_norm_squared, scalar
from torus_spectra.partition.params import PartitionParams
from torus_spectra.workers import parallel_map

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
Evaluator = Callable[[FloatArray], Any]
Frequency = tuple[int, ...]

HERMITIAN_TOLERANCE = 1e-12
# Rows per block when splitting large matrices
_ROW_BLOCK = 256


@dataclass(frozen=True)
class ConstantCoefficient:
    """Coefficient that does not depend on xi (plain potentials)."""

    value: complex

    def __call__(self, xi: FloatArray) -> ComplexArray:
        return np.full(np.shape(xi)[:-1], self.value, dtype=complex)


@dataclass(frozen=True)
class _Conjugate:
    inner: Evaluator

    def __call__(self, xi: FloatArray) -> ComplexArray:
        return np.conj(np.asarray(self.inner(xi), dtype=complex))


@dataclass(frozen=True)
class _Sum:
    parts: tuple[Evaluator, ...]

    def __call__(self, xi: FloatArray) -> ComplexArray:
        return sum((np.asarray(p(xi), dtype=complex) for p in self.parts), np.zeros(np.shape(xi)[:-1], dtype=complex))


@dataclass(frozen=True, eq=False)
class FourierSymbol:
    """Symbol with finite Fourier support.

    Attributes:
        dimension: Dimension d of the torus
        terms: Map from frequency k to its coefficient evaluator xi -> a_k(xi)
    """

    dimension: int
    terms: Mapping[Frequency, Evaluator]

    @classmethod
    def zero(cls, dimension: int) -> "FourierSymbol":
        return cls(dimension, {})

    @classmethod
    def from_terms(
        cls, terms: Mapping[Frequency, Union[complex, float, Evaluator]], dimension: Optional[int] = None
    ) -> "FourierSymbol":
        """Build a hermitian symbol, adding missing mirror terms.

        Args:
            terms: Map k -> constant or evaluator
            dimension: Dimension d (inferred from the keys when omitted)

        Returns:
            FourierSymbol with a_{-k} = conj(a_k) for every k

        Raises:
            NotSelfAdjointError: If two constant mirror terms are inconsistent
        """
        if dimension is None:
            if not terms:
                msg = "Dimension must be given for an empty symbol"
                raise ValueError(msg)
            dimension = len(next(iter(terms)))

        evaluators: dict[Frequency, Evaluator] = {}
        for k, value in terms.items():
            key = tuple(int(x) for x in k)
            if len(key) != dimension:
                msg = f"Frequency {key} does not have {dimension} components"
                raise ValueError(msg)
            evaluators[key] = value if callable(value) else ConstantCoefficient(complex(value))

        closed = dict(evaluators)
        for key, evaluator in evaluators.items():
            mirror = tuple(-x for x in key)
            if mirror not in evaluators:
                logger.warning("Adding hermitian mirror term for k=%s", mirror)
                if isinstance(evaluator, ConstantCoefficient):
                    closed[mirror] = ConstantCoefficient(evaluator.value.conjugate())
                else:
                    closed[mirror] = _Conjugate(evaluator)
                continue
            other = evaluators[mirror]
            if isinstance(evaluator, ConstantCoefficient) and isinstance(other, ConstantCoefficient):
                if abs(other.value - evaluator.value.conjugate()) > HERMITIAN_TOLERANCE * max(1.0, abs(evaluator.value)):
                    msg = f"Coefficients of k={key} and k={mirror} are not complex conjugates"
                    raise NotSelfAdjointError(msg)
        return cls(dimension, closed)

    @classmethod
    def from_json(cls, data: Mapping[str, Any], dimension: int) -> "FourierSymbol":
        """Build from ``{"terms": [{"k": [...], "re": ..., "im": ...}, ...]}``; repeated k are summed.

        Raises:
            ConfigError: If a term is malformed
        """
        totals: dict[Frequency, complex] = {}
        for position, term in enumerate(data.get("terms", [])):
            try:
                key = tuple(int(x) for x in term["k"])
                value = complex(float(term.get("re", 0.0)), float(term.get("im", 0.0)))
            except (KeyError, TypeError, ValueError) as e:
                msg = f"Malformed potential term #{position}: {term!r}"
                raise ConfigError(msg, [{"field": f"potential.terms[{position}]", "message": str(e)}]) from e
            if len(key) != dimension:
                msg = f"Potential term #{position} has {len(key)} components, expected {dimension}"
                raise ConfigError(msg, [{"field": f"potential.terms[{position}].k", "message": msg}])
            totals[key] = totals.get(key, 0j) + value
        return cls.from_terms(totals, dimension)

    def to_json(self) -> dict[str, Any]:
        """Serialise a constant-coefficient symbol."""
        terms = []
        for key in sorted(self.terms):
            evaluator = self.terms[key]
            if not isinstance(evaluator, ConstantCoefficient):
                msg = "Only constant-coefficient symbols can be serialised"
                raise TypeError(msg)
            terms.append({"k": list(key), "re": evaluator.value.real, "im": evaluator.value.imag})
        return {"terms": terms}

    @property
    def support(self) -> IntArray:
        """Frequencies with a coefficient, in lexicographic order."""
        return np.array(sorted(self.terms), dtype=np.int64).reshape(-1, self.dimension)

    def coefficient(self, k: Frequency, xi: npt.ArrayLike) -> ComplexArray:
        """Evaluate a_k at xi (zero outside the support)."""
        points = np.asarray(xi, dtype=float)
        evaluator = self.terms.get(tuple(int(x) for x in k))
        if evaluator is None:
            return np.zeros(points.shape[:-1], dtype=complex)
        return np.asarray(evaluator(points), dtype=complex)

    def support_radius(self, lattice: Optional[Lattice] = None) -> float:
        """Largest frequency norm in the support (g* norm, or sup norm without a lattice)."""
        nonzero = [k for k in self.terms if any(k)]
        if not nonzero:
            return 0.0
        ks = np.array(nonzero, dtype=float)
        if lattice is None:
            return float(np.abs(ks).max())
        return float(np.max(dual_norm(lattice, ks)))

    def __add__(self, other: "FourierSymbol") -> "FourierSymbol":
        if self.dimension != other.dimension:
            msg = "Cannot add symbols of different dimensions"
            raise ValueError(msg)
        merged: dict[Frequency, Evaluator] = dict(self.terms)
        for key, evaluator in other.terms.items():
            merged[key] = _Sum((merged[key], evaluator)) if key in merged else evaluator
        return FourierSymbol(self.dimension, merged)


def average(symbol: FourierSymbol) -> Evaluator:
    """The k = 0 coefficient xi -> a_0(xi)."""
    return symbol.terms.get((0,) * symbol.dimension, ConstantCoefficient(0j))


def cutoff(t: npt.ArrayLike) -> Any:
    """Pinned even cutoff: 1 on |t| <= 1/2, 0 on |t| >= 1, smooth and monotone between.

    >>> float(cutoff(0.25)), float(cutoff(1.5)), round(float(cutoff(0.75)), 12)
    (1.0, 0.0, 0.5)
    """
    a = np.abs(np.asarray(t, dtype=float))

    def flat(s: FloatArray) -> FloatArray:
        positive = s > 0
        return np.where(positive, np.exp(-1.0 / np.where(positive, s, 1.0)), 0.0)

    rising = flat(2.0 - 2.0 * a)
    falling = flat(2.0 * a - 1.0)
    result = np.where(a <= 0.5, 1.0, np.where(a >= 1.0, 0.0, rising / (rising + falling)))
    return float(result) if result.ndim == 0 else result


def resonance_cutoff(lattice: Lattice, k: npt.ArrayLike, shifted: npt.ArrayLike, params: PartitionParams) -> Any:
    """chi_k = chi(2 ||k||^tau <eta, k> / <eta>^delta) at eta = xi + kappa."""
    knorm = dual_norm(lattice, k)
    argument = 2.0 * np.power(knorm, params.tau) * scalar(lattice, shifted, k) / np.power(bracket(lattice, shifted), params.delta)
    return cutoff(argument)


def size_cutoff(lattice: Lattice, k: npt.ArrayLike, shifted: npt.ArrayLike, params: PartitionParams) -> Any:
    """chi-tilde_k = chi(||k|| / <eta>^epsilon) at eta = xi + kappa."""
    return cutoff(dual_norm(lattice, k) / np.power(bracket(lattice, shifted), params.epsilon))


@dataclass(frozen=True)
class _CutoffWeighted:
    inner: Evaluator
    frequency: Frequency
    lattice: Lattice
    params: PartitionParams
    part: str

    def __call__(self, xi: FloatArray) -> ComplexArray:
        points = np.asarray(xi, dtype=float)
        shifted = points + self.lattice.kappa
        k = np.broadcast_to(np.asarray(self.frequency, dtype=float), shifted.shape)
        chi = resonance_cutoff(self.lattice, k, shifted, self.params)
        chi_size = size_cutoff(self.lattice, k, shifted, self.params)
        weight = {
            "resonant": chi * chi_size,
            "nonresonant": (1.0 - chi) * chi_size,
            "smoothing": 1.0 - chi_size,
        }[self.part]
        return np.asarray(weight * np.asarray(self.inner(points), dtype=complex), dtype=complex)


@dataclass(frozen=True, eq=False)
class SymbolDecomposition:
    """w = <w> + w_nr + w_res + w_S."""

    average: FourierSymbol
    nonresonant: FourierSymbol
    resonant: FourierSymbol
    smoothing: FourierSymbol


def decompose(lattice: Lattice, symbol: FourierSymbol, params: PartitionParams) -> SymbolDecomposition:
    """Split a symbol into average, nonresonant, resonant and smoothing parts.

    For k != 0 the weights are (1 - chi_k) chi-tilde_k, chi_k chi-tilde_k and
    1 - chi-tilde_k, which sum to one pointwise.
    """
    zero = (0,) * symbol.dimension
    parts: dict[str, dict[Frequency, Evaluator]] = {"nonresonant": {}, "resonant": {}, "smoothing": {}}
    for key, evaluator in symbol.terms.items():
        if key == zero:
            continue
        for part, terms in parts.items():
            terms[key] = _CutoffWeighted(evaluator, key, lattice, params, part)
    avg = {zero: symbol.terms[zero]} if zero in symbol.terms else {}
    return SymbolDecomposition(
        average=FourierSymbol(symbol.dimension, avg),
        nonresonant=FourierSymbol(symbol.dimension, parts["nonresonant"]),
        resonant=FourierSymbol(symbol.dimension, parts["resonant"]),
        smoothing=FourierSymbol(symbol.dimension, parts["smoothing"]),
    )


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """Hermitian matrix indexed by the lattice points of a finite box.

    Attributes:
        lattice: Lattice the index points belong to
        index: Ordered index points (n x d integers)
        matrix: n x n complex matrix, entry [i, j] = A[index[i], index[j]]
        tag: Provenance tag
    """

    lattice: Lattice
    index: IntArray
    matrix: ComplexArray
    tag: str = ""

    @property
    def size(self) -> int:
        return int(self.index.shape[0])

    @cached_property
    def position(self) -> dict[Frequency, int]:
        """Map from index point to its row."""
        return {tuple(int(x) for x in p): i for i, p in enumerate(self.index)}

    def locate(self, points: npt.ArrayLike) -> IntArray:
        """Rows of the given points, -1 for points outside the box."""
        pts = np.asarray(points, dtype=np.int64).reshape(-1, self.index.shape[1])
        return np.array([self.position.get(tuple(int(x) for x in p), -1) for p in pts], dtype=np.int64)

    def entry(self, row: npt.ArrayLike, column: npt.ArrayLike) -> complex:
        """Matrix element A[row, column] addressed by lattice points."""
        i, j = self.locate(np.vstack([np.asarray(row), np.asarray(column)]))
        if i < 0 or j < 0:
            msg = f"Points {np.asarray(row).tolist()}, {np.asarray(column).tolist()} are outside the box"
            raise KeyError(msg)
        return complex(self.matrix[i, j])

    def with_matrix(self, matrix: npt.ArrayLike, tag: str) -> "TruncatedOperator":
        return TruncatedOperator(self.lattice, self.index, np.asarray(matrix, dtype=complex), tag)

    def restrict(self, rows: npt.ArrayLike, tag: Optional[str] = None) -> "TruncatedOperator":
        """Principal submatrix on the given rows."""
        r = np.asarray(rows, dtype=np.int64)
        return TruncatedOperator(self.lattice, self.index[r], self.matrix[np.ix_(r, r)], tag or self.tag)

    def coupling_radius(self, tolerance: float = 1e-14) -> float:
        """Largest ||xi - xi'||_{g*} over off-diagonal entries above ``tolerance`` (0 if none)."""
        off = np.abs(self.matrix) > tolerance
        np.fill_diagonal(off, False)
        rows, columns = np.nonzero(off)
        if rows.size == 0:
            return 0.0
        steps = (self.index[rows] - self.index[columns]).astype(float)
        return float(np.sqrt(dual_norm_squared(self.lattice, steps).max()))

    def hermitian_defect(self) -> float:
        """max |A - A^*| relative to max(1, max |A|)."""
        if self.size == 0:
            return 0.0
        scale = max(1.0, float(np.abs(self.matrix).max()))
        return float(np.abs(self.matrix - self.matrix.conj().T).max()) / scale

    def check_hermitian(self, tolerance: float = HERMITIAN_TOLERANCE) -> None:
        """Raise NotSelfAdjointError if the matrix is not hermitian to ``tolerance``."""
        defect = self.hermitian_defect()
        if defect > tolerance:
            msg = f"Operator '{self.tag}' is not hermitian (relative defect {defect:.3e})"
            raise NotSelfAdjointError(msg)


def pair_positions(index: IntArray, shift: npt.ArrayLike) -> tuple[IntArray, IntArray]:
    """Rows i and columns j with index[i] = index[j] + shift."""
    position = {tuple(int(x) for x in p): i for i, p in enumerate(index)}
    h = np.asarray(shift, dtype=np.int64)
    rows, cols = [], []
    for j, p in enumerate(index + h):
        i = position.get(tuple(int(x) for x in p))
        if i is not None:
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)


def weyl_matrix(lattice: Lattice, symbol: FourierSymbol, box: npt.ArrayLike) -> TruncatedOperator:
    """Weyl quantization on a box: A[xi + h, xi] = a_h(xi + h/2).

    Raises:
        NotSelfAdjointError: If the assembled matrix is not hermitian
    """
    index = np.asarray(box, dtype=np.int64).reshape(-1, lattice.dimension)
    n = index.shape[0]

    def assemble(key: Frequency) -> tuple[IntArray, IntArray, ComplexArray]:
        rows, cols = pair_positions(index, key)
        midpoints = index[cols] + np.asarray(key, dtype=float) / 2.0
        values = symbol.coefficient(key, midpoints.reshape(-1, lattice.dimension))
        return rows, cols, values

    matrix = np.zeros((n, n), dtype=complex)
    for rows, cols, values in parallel_map(assemble, sorted(symbol.terms)):
        matrix[rows, cols] += values
    operator = TruncatedOperator(lattice, index, matrix, "weyl")
    operator.check_hermitian()
    return operator


def laplacian_matrix(lattice: Lattice, box: npt.ArrayLike) -> TruncatedOperator:
    """Diagonal operator with entries ||xi + kappa||^2_{g*}."""
    index = np.asarray(box, dtype=np.int64).reshape(-1, lattice.dimension)
    diagonal = dual_norm_squared(lattice, index + lattice.kappa)
    return TruncatedOperator(lattice, index, np.diag(diagonal).astype(complex), "laplacian")


@dataclass(frozen=True, eq=False)
class MatrixSplit:
    """Entrywise decomposition of a truncated operator.

    Off-diagonal entries (xi + k, xi) are weighted by the cutoffs evaluated at
    the Weyl midpoint xi + k/2 + kappa. The smoothing share (1 - chi-tilde) is
    further split by the resonance cutoff.

    Attributes:
        average: Diagonal part
        nonresonant: (1 - chi) chi-tilde share
        resonant: chi chi-tilde share
        smoothing_nonresonant: (1 - chi)(1 - chi-tilde) share
        smoothing_resonant: chi (1 - chi-tilde) share
        chi: Entrywise resonance cutoff
        within_size: Entrywise indicator of ||k|| <= <xi_k>^epsilon
    """

    average: ComplexArray
    nonresonant: ComplexArray
    resonant: ComplexArray
    smoothing_nonresonant: ComplexArray
    smoothing_resonant: ComplexArray
    chi: FloatArray
    within_size: npt.NDArray[np.bool_]

    @property
    def smoothing(self) -> ComplexArray:
        return self.smoothing_nonresonant + self.smoothing_resonant

    @property
    def eliminable(self) -> ComplexArray:
        """Couplings weighted by 1 - chi, removed by the homological equation."""
        return self.nonresonant + self.smoothing_nonresonant

    @property
    def absorbable(self) -> ComplexArray:
        """chi-weighted couplings with ||k|| <= <xi_k>^epsilon, admissible in a normal form."""
        return np.where(self.within_size, self.resonant + self.smoothing_resonant, 0.0)


def midpoint_geometry(lattice: Lattice, index: IntArray, rows: slice) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    block = index[rows]
    k = (block[:, None, :] - index[None, :, :]).astype(float)
    shifted = (block[:, None, :] + index[None, :, :]) / 2.0 + lattice.kappa
    knorm = np.sqrt(dual_norm_squared(lattice, k))
    pairing = scalar(lattice, shifted, k)
    br = np.sqrt(1.0 + dual_norm_squared(lattice, shifted))
    return k, knorm, pairing, br


def split_matrix(op: TruncatedOperator, params: PartitionParams) -> MatrixSplit:
    """Apply the average/nonresonant/resonant/smoothing split entrywise to a matrix."""
    lattice, index, a = op.lattice, op.index, op.matrix
    n = op.size

    def split_rows(start: int) -> tuple[int, FloatArray, FloatArray, npt.NDArray[np.bool_]]:
        rows = slice(start, min(start + _ROW_BLOCK, n))
        _, knorm, pairing, br = midpoint_geometry(lattice, index, rows)
        chi = cutoff(2.0 * np.power(knorm, params.tau) * pairing / np.power(br, params.delta))
        size_ratio = knorm / np.power(br, params.epsilon)
        return start, np.asarray(chi, dtype=float), np.asarray(cutoff(size_ratio), dtype=float), size_ratio <= 1.0

    chi = np.ones((n, n))
    chi_size = np.ones((n, n))
    within = np.ones((n, n), dtype=bool)
    for start, block_chi, block_size, block_within in parallel_map(split_rows, range(0, n, _ROW_BLOCK)):
        chi[start : start + block_chi.shape[0]] = block_chi
        chi_size[start : start + block_chi.shape[0]] = block_size
        within[start : start + block_chi.shape[0]] = block_within

    diagonal = np.diag(np.diag(a))
    off = a - diagonal
    return MatrixSplit(
        average=diagonal,
        nonresonant=(1.0 - chi) * chi_size * off,
        resonant=chi * chi_size * off,
        smoothing_nonresonant=(1.0 - chi) * (1.0 - chi_size) * off,
        smoothing_resonant=chi * (1.0 - chi_size) * off,
        chi=chi,
        within_size=within,
    )


def resonant_support_mask(lattice: Lattice, index: IntArray, params: PartitionParams) -> npt.NDArray[np.bool_]:
    """Entries (xi + k, xi) allowed in a normal form.

    The conditions are |<xi_k, k>| <= <xi_k>^delta ||k||^-tau and
    ||k|| <= <xi_k>^epsilon, with xi_k = xi + kappa + k/2. The diagonal is
    always allowed.
    """
    _, knorm, pairing, br = midpoint_geometry(lattice, index, slice(0, index.shape[0]))
    safe = np.where(knorm > 0, knorm, 1.0)
    allowed = (np.abs(pairing) <= np.power(br, params.delta) * np.power(safe, -params.tau)) & (
        knorm <= np.power(br, params.epsilon)
    )
    return allowed | (knorm == 0)


def resonant_support_violations(op: TruncatedOperator, params: PartitionParams, tolerance: float = 0.0) -> int:
    """Number of nonzero entries that break the normal-form support conditions."""
    mask = resonant_support_mask(op.lattice, op.index, params)
    return int(np.count_nonzero((np.abs(op.matrix) > tolerance) & ~mask))


def seminorm_estimate(
    lattice: Lattice,
    symbol: FourierSymbol,
    n1: int,
    n2: int,
    m: float,
    grid: npt.ArrayLike,
    delta: float = 0.0,
    step: float = 1e-4,
) -> float:
    """Estimate of sup <xi + kappa>^(delta n2 - m) ||d_x^n1 d_xi^n2 a|| on a grid of xi.

    Sampling xi gives a lower bound in xi. In x the sum of |d_xi^n2 a_k| ||k||^n1
    over the frequencies bounds the supremum from above. xi-derivatives use
    central differences of the given step, measured in the metric g.

    Args:
        lattice: The lattice
        symbol: Symbol to estimate
        n1: Order of x-derivatives
        n2: Order of xi-derivatives (0, 1 or 2)
        m: Order of the symbol class
        grid: Sample points xi (rows)
        delta: Loss per xi-derivative
        step: Finite-difference step

    Returns:
        The largest weighted value over the grid
    """
    if n2 not in (0, 1, 2):
        msg = f"xi-derivatives of order {n2} are not supported"
        raise ValueError(msg)
    points = np.asarray(grid, dtype=float).reshape(-1, lattice.dimension)
    d = lattice.dimension
    eye = np.eye(d) * step
    total = np.zeros(points.shape[0])
    for key in symbol.terms:
        knorm = dual_norm(lattice, np.asarray(key, dtype=float)) if any(key) else 0.0
        if n1 > 0 and knorm == 0.0:
            continue
        factor = float(knorm) ** n1
        if n2 == 0:
            size = np.abs(symbol.coefficient(key, points))
        elif n2 == 1:
            grad = np.stack(
                [(symbol.coefficient(key, points + eye[i]) - symbol.coefficient(key, points - eye[i])) / (2 * step) for i in range(d)],
                axis=-1,
            )
            size = np.sqrt(np.abs(np.einsum("ni,ij,nj->n", grad, lattice.metric_g, grad.conj())))
        else:
            hess = np.empty((points.shape[0], d, d), dtype=complex)
            for i in range(d):
                for j in range(d):
                    hess[:, i, j] = (
                        symbol.coefficient(key, points + eye[i] + eye[j])
                        - symbol.coefficient(key, points + eye[i] - eye[j])
                        - symbol.coefficient(key, points - eye[i] + eye[j])
                        + symbol.coefficient(key, points - eye[i] - eye[j])
                    ) / (4 * step * step)
            size = np.sqrt(np.abs(np.einsum("ij,njk,kl,nli->n", lattice.metric_g, hess, lattice.metric_g, hess.conj())))
        total += factor * size
    weight = np.power(bracket(lattice, points + lattice.kappa), delta * n2 - m)
    return float(np.max(weight * total)) if points.shape[0] else 0.0
