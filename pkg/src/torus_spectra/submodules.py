"""Exact integer algebra for saturated submodules of Z^d.

A submodule is stored through a canonical Hermite-normal-form basis together
with a unimodular completion, so two modules are equal exactly when their
bases are equal. All integer work is done on Python integers (object arrays)
and converted to ``int64`` at the end.
"""

import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import numpy.typing as npt
from sympy import Matrix
from sympy.matrices.normalforms import hermite_normal_form

from torus_spectra.errors import NotSaturatedError
from torus_spectra.lattice import FloatArray, IntArray, Lattice, dual_norm_squared

# Coefficients closer than this to an integer are snapped before taking floors
_SNAP_TOLERANCE = 1e-9


def exgcd(a: int, b: int) -> npt.NDArray[Any]:
    """Extended gcd as a determinant-one integer matrix.

    Args:
        a: An integer
        b: An integer

    Returns:
        2x2 object matrix M with det M = 1 and M @ [a, b] = [gcd(a, b), 0]
    """
    a_sign = -1 if a < 0 else 1
    b_sign = -1 if b < 0 else 1
    a, b = a * a_sign, b * b_sign
    m = np.array([[b, 0, 1], [a, 1, 0]], dtype=object)
    while m[1, 0] != 0:
        q = m[0, 0] // m[1, 0]
        m[0] -= q * m[1]
        m = m[::-1]
    g = m[0, 0]
    if g == 0:
        return np.eye(2, dtype=object)
    m = m[:, 1:] * np.array([a_sign, b_sign], dtype=object)
    m[1] = [-b_sign * b // g, a_sign * a // g]
    return m


def _inverse_det_one(m: npt.NDArray[Any]) -> npt.NDArray[Any]:
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], dtype=object)


def diagonalize(a: npt.ArrayLike) -> tuple[npt.NDArray[Any], npt.NDArray[Any], npt.NDArray[Any]]:
    """Diagonalize an integer matrix by unimodular row and column operations.

    This is a Smith-like form without the divisibility chain, which is all that
    saturation and completion need.

    Args:
        a: Integer matrix of shape (m, n)

    Returns:
        Tuple (S, D, T) of object matrices with a == S @ D @ T, D diagonal and
        S, T of determinant one
    """
    d = np.array(a, dtype=object)
    rows, cols = d.shape
    s = np.eye(rows, dtype=object)
    t = np.eye(cols, dtype=object)

    def clear_column(i: int) -> bool:
        if all(d[j, i] == 0 for j in range(i + 1, rows)):
            return False
        for j in range(i + 1, rows):
            m = exgcd(d[i, i], d[j, i])
            d[[i, j]] = m @ d[[i, j]]
            s[:, [i, j]] = s[:, [i, j]] @ _inverse_det_one(m)
        return True

    def clear_row(i: int) -> bool:
        if all(d[i, j] == 0 for j in range(i + 1, cols)):
            return False
        for j in range(i + 1, cols):
            m = exgcd(d[i, i], d[i, j]).T
            d[:, [i, j]] = d[:, [i, j]] @ m
            t[[i, j]] = _inverse_det_one(m) @ t[[i, j]]
        return True

    for i in range(min(rows, cols)):
        clear_column(i)
        while clear_row(i) and clear_column(i):
            pass
    return s, d, t


def canonical_rows(rows: npt.ArrayLike, dimension: int) -> IntArray:
    """Canonical Hermite-normal-form basis of the lattice spanned by ``rows``."""
    r = np.asarray(rows, dtype=np.int64).reshape(-1, dimension)
    if r.shape[0] == 0 or not np.any(r):
        return np.zeros((0, dimension), dtype=np.int64)
    hnf = hermite_normal_form(Matrix(r.tolist()).T)
    columns = [[int(hnf[i, j]) for i in range(hnf.rows)] for j in range(hnf.cols)]
    columns = [c for c in columns if any(c)]
    return np.array(columns, dtype=np.int64).reshape(-1, dimension)


def saturation_index(rows: npt.ArrayLike, dimension: int) -> int:
    """Index of the lattice spanned by ``rows`` inside its saturation (1 when saturated)."""
    r = np.asarray(rows, dtype=np.int64).reshape(-1, dimension)
    if r.shape[0] == 0 or not np.any(r):
        return 1
    _, diag, _ = diagonalize(r.T)
    entries = [int(diag[i, i]) for i in range(min(diag.shape))]
    return abs(math.prod(e for e in entries if e != 0))


@dataclass(frozen=True, eq=False)
class Submodule:
    """Saturated submodule of Z^d with a canonical basis and a unimodular completion.

    Attributes:
        dimension: Ambient dimension d
        basis: Canonical basis rows v^1..v^{d'}
        completion: Rows v^{d'+1}..v^d completing the basis to a unimodular matrix
    """

    dimension: int
    basis: IntArray
    completion: IntArray
    _inverse: IntArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        adapted = np.vstack([self.basis, self.completion]).astype(np.int64)
        inverse = Matrix(adapted.tolist()).inv() if self.dimension else Matrix([])
        object.__setattr__(self, "_inverse", np.array(inverse.tolist(), dtype=np.int64).reshape(self.dimension, -1))

    @property
    def rank(self) -> int:
        return int(self.basis.shape[0])

    @property
    def key(self) -> tuple[tuple[int, ...], ...]:
        """Hashable canonical key (the basis rows)."""
        return tuple(tuple(int(x) for x in row) for row in self.basis)

    @property
    def adapted(self) -> IntArray:
        """The unimodular matrix [basis; completion]."""
        return np.vstack([self.basis, self.completion]).astype(np.int64)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Submodule):
            return NotImplemented
        return self.dimension == other.dimension and self.key == other.key

    def __hash__(self) -> int:
        return hash((self.dimension, self.key))

    def __repr__(self) -> str:
        return f"Submodule(d={self.dimension}, basis={self.basis.tolist()})"

    @classmethod
    def zero(cls, dimension: int) -> "Submodule":
        return cls(dimension, np.zeros((0, dimension), dtype=np.int64), np.eye(dimension, dtype=np.int64))

    @classmethod
    def full(cls, dimension: int) -> "Submodule":
        return cls(dimension, np.eye(dimension, dtype=np.int64), np.zeros((0, dimension), dtype=np.int64))

    def coordinates(self, points: npt.ArrayLike) -> IntArray:
        """Coordinates of integer points in the adapted basis [basis; completion]."""
        p = np.asarray(points, dtype=np.int64)
        return np.asarray(p @ self._inverse, dtype=np.int64)

    def to_json(self) -> dict[str, Any]:
        return {"basis": self.basis.tolist(), "completion": self.completion.tolist()}

    @classmethod
    def from_json(cls, data: dict[str, Any], dimension: int) -> "Submodule":
        return saturate(np.asarray(data.get("basis", []), dtype=np.int64).reshape(-1, dimension), dimension)


def saturate(generators: Iterable[Iterable[int]] | npt.ArrayLike, dimension: Optional[int] = None) -> Submodule:
    """Saturation Z^d ∩ span_R(generators) with its canonical basis.

    Args:
        generators: Integer vectors (rows); may be empty
        dimension: Ambient dimension, required when ``generators`` is empty

    Returns:
        The saturated submodule containing every generator
    """
    g = np.asarray(list(generators) if not isinstance(generators, np.ndarray) else generators, dtype=np.int64)
    if dimension is None:
        if g.ndim != 2 or g.shape[1] == 0:
            msg = "Dimension must be given for an empty generator set"
            raise ValueError(msg)
        dimension = int(g.shape[1])
    g = g.reshape(-1, dimension)
    g = g[np.any(g != 0, axis=1)]
    if g.shape[0] == 0:
        return Submodule.zero(dimension)

    s, diag, _ = diagonalize(g.T)
    nonzero = np.zeros(dimension, dtype=bool)
    for i in range(min(diag.shape)):
        nonzero[i] = diag[i, i] != 0
    span_rows = np.array(s[:, nonzero].T.tolist(), dtype=np.int64).reshape(-1, dimension)
    completion_rows = np.array(s[:, ~nonzero].T.tolist(), dtype=np.int64).reshape(-1, dimension)
    return Submodule(dimension, canonical_rows(span_rows, dimension), canonical_rows(completion_rows, dimension))


def adapted_basis(module: "Submodule | npt.ArrayLike", dimension: Optional[int] = None) -> IntArray:
    """Unimodular completion of a saturated module.

    Args:
        module: A Submodule or raw basis rows
        dimension: Ambient dimension for raw rows (inferred when possible)

    Returns:
        Rows v^{d'+1}..v^d such that [basis; completion] has determinant +-1

    Raises:
        NotSaturatedError: If the rows do not span a saturated module
    """
    if isinstance(module, Submodule):
        rows, d = module.basis, module.dimension
    else:
        rows = np.asarray(module, dtype=np.int64)
        d = dimension if dimension is not None else int(rows.shape[-1])
        rows = rows.reshape(-1, d)
    index = saturation_index(rows, d)
    if index != 1:
        msg = f"Module spanned by {rows.tolist()} is not saturated (index {index})"
        raise NotSaturatedError(msg)
    return saturate(rows, d).completion


def contains(outer: Submodule, inner: Submodule) -> bool:
    """True when ``inner`` is a submodule of ``outer``."""
    if inner.rank == 0:
        return True
    if inner.rank > outer.rank:
        return False
    coords = outer.coordinates(inner.basis)
    return bool(np.all(coords[:, outer.rank :] == 0))


def coset_keys(module: Submodule, points: npt.ArrayLike) -> IntArray:
    """Completion coordinates of each point; equal keys mean equal cosets of ``module``."""
    return module.coordinates(points)[..., module.rank :]


def coset_key(module: Submodule, xi: npt.ArrayLike) -> tuple[int, ...]:
    """Hashable coset key of a single point."""
    return tuple(int(x) for x in coset_keys(module, np.asarray(xi, dtype=np.int64)))


def coset_representative(module: Submodule, xi: npt.ArrayLike) -> IntArray:
    """Canonical representative beta in M^(c) of the coset xi + M."""
    keys = coset_keys(module, xi)
    return np.asarray(keys @ module.completion, dtype=np.int64)


def _span_coefficients(lattice: Lattice, w: npt.ArrayLike, module: Submodule) -> FloatArray:
    b = module.basis.astype(float)
    gram = b @ lattice.metric_g_star @ b.T
    rhs = np.asarray(w, dtype=float) @ lattice.metric_g_star @ b.T
    return np.asarray(np.linalg.solve(gram, rhs[..., None])[..., 0], dtype=float)


def project(lattice: Lattice, w: npt.ArrayLike, module: Submodule) -> tuple[FloatArray, FloatArray]:
    """Orthogonal decomposition w = w_M + w_Mperp with respect to g*.

    Broadcasts over leading axes of ``w``.
    """
    v = np.asarray(w, dtype=float)
    if module.rank == 0:
        return np.zeros_like(v), v.copy()
    w_m = _span_coefficients(lattice, v, module) @ module.basis.astype(float)
    return w_m, v - w_m


@dataclass(frozen=True, eq=False)
class FloquetSplit:
    """Decomposition of xi + kappa along a module.

    Attributes:
        zeta: Integer part [(xi + kappa)_M], an element of M
        kappa_prime: Fractional part, a real vector in span M
        xi_tilde: xi - zeta
        ell_squared: ||(xi + kappa)_Mperp||^2_{g*}
        integer_coefficients: Coefficients of zeta in the module basis
        kappa_coefficients: Coefficients of kappa_prime in the module basis, in [0, 1)
    """

    zeta: IntArray
    kappa_prime: FloatArray
    xi_tilde: IntArray
    ell_squared: float
    integer_coefficients: IntArray
    kappa_coefficients: FloatArray


def floquet_split(lattice: Lattice, xi: npt.ArrayLike, module: Submodule) -> FloquetSplit:
    """Split xi + kappa into integer and fractional parts along ``module``.

    Coefficients in the module basis are floored; the fractional part lies in
    [0, 1) per coefficient.
    """
    point = np.asarray(xi, dtype=np.int64)
    shifted = point + lattice.kappa
    d = lattice.dimension
    if module.rank == 0:
        return FloquetSplit(
            zeta=np.zeros(d, dtype=np.int64),
            kappa_prime=np.zeros(d),
            xi_tilde=point.copy(),
            ell_squared=float(dual_norm_squared(lattice, shifted)),
            integer_coefficients=np.zeros(0, dtype=np.int64),
            kappa_coefficients=np.zeros(0),
        )
    coeffs = _span_coefficients(lattice, shifted, module)
    rounded = np.round(coeffs)
    coeffs = np.where(np.abs(coeffs - rounded) < _SNAP_TOLERANCE, rounded, coeffs)
    integer = np.floor(coeffs).astype(np.int64)
    fractional = coeffs - integer
    zeta = integer @ module.basis
    kappa_prime = fractional @ module.basis.astype(float)
    _, perp = project(lattice, shifted, module)
    return FloquetSplit(
        zeta=np.asarray(zeta, dtype=np.int64),
        kappa_prime=np.asarray(kappa_prime, dtype=float),
        xi_tilde=np.asarray(point - zeta, dtype=np.int64),
        ell_squared=float(dual_norm_squared(lattice, perp)),
        integer_coefficients=integer,
        kappa_coefficients=fractional,
    )
