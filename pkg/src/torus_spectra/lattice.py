"""Flat-metric lattice geometry: metrics, dual norms and the metric constants."""

import itertools
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import numpy.typing as npt

from torus_spectra.errors import ConfigError, DegenerateLatticeError, DependentVectorsError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

# Relative tolerance used when comparing candidate minima during enumeration
_TIE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class CoVector:
    """Point of the dual space, in coordinates of the dual basis.

    Attributes:
        components: Coordinates of xi (or xi + kappa)
    """

    components: FloatArray

    @classmethod
    def of(cls, values: Sequence[float]) -> "CoVector":
        """Create a covector from any sequence of numbers."""
        return cls(np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class VolumeConstant:
    """Lower bound on volumes of integer parallelepipeds.

    Attributes:
        bound: Formula bound c2^(-d) * sqrt(det g), c2 the longest basis vector
        exact: Exact minimum over enumerated integer tuples (only for d <= 3)
        witness: Integer tuple attaining the exact minimum
    """

    bound: float
    exact: Optional[float] = None
    witness: Optional[IntArray] = None

    @property
    def value(self) -> float:
        """Best available lower bound: the exact minimum if known, else the formula bound."""
        return self.exact if self.exact is not None else self.bound


@dataclass(frozen=True, eq=False)
class Lattice:
    """Rank-d lattice with its flat metric and Floquet parameter.

    Attributes:
        dimension: Ambient dimension d
        basis: Rows e_A of the lattice basis
        metric_g: Gram matrix g_AB = e_A . e_B
        metric_g_star: Inverse of metric_g, the metric on covectors
        kappa: Floquet parameter in [0, 1)^d, dual-basis coordinates
        coercivity: Minimum of ||k||^2_{g*} over nonzero integer k
        coercivity_witness: Integer vector attaining the coercivity constant
        volume: Parallelepiped volume constant (bound and exact minimum)
    """

    dimension: int
    basis: FloatArray
    metric_g: FloatArray
    metric_g_star: FloatArray
    kappa: FloatArray
    coercivity: float
    coercivity_witness: IntArray
    volume: VolumeConstant

    @property
    def min_volume(self) -> float:
        """The volume constant reported as the lattice's c-bar."""
        return self.volume.bound

    @classmethod
    def from_metric(cls, metric_g: npt.ArrayLike, kappa: Optional[npt.ArrayLike] = None) -> "Lattice":
        """Build a lattice from a metric, choosing the Cholesky factor as basis.

        Args:
            metric_g: Symmetric positive definite d x d matrix
            kappa: Floquet parameter (defaults to zero)

        Returns:
            Lattice whose basis rows satisfy e e^T = metric_g
        """
        g = np.asarray(metric_g, dtype=float)
        try:
            basis = np.linalg.cholesky(g)
        except np.linalg.LinAlgError as e:
            msg = f"Metric is not positive definite: {g.tolist()}"
            raise DegenerateLatticeError(msg) from e
        return build_lattice(basis, kappa)

    def to_json(self) -> dict[str, Any]:
        """Serialise the lattice and its constants."""
        return {
            "dimension": self.dimension,
            "basis": self.basis.tolist(),
            "kappa": self.kappa.tolist(),
            "metric_g": self.metric_g.tolist(),
            "metric_g_star": self.metric_g_star.tolist(),
            "coercivity": self.coercivity,
            "coercivity_witness": self.coercivity_witness.tolist(),
            "min_volume_bound": self.volume.bound,
            "min_volume_exact": self.volume.exact,
            "min_volume_witness": None if self.volume.witness is None else self.volume.witness.tolist(),
        }


def lattice_cube(dimension: int, radius: int) -> IntArray:
    """All integer points with sup-norm at most ``radius``, in lexicographic order."""
    axis = range(-radius, radius + 1)
    return np.array(list(itertools.product(axis, repeat=dimension)), dtype=np.int64).reshape(-1, dimension)


def _quadratic(metric: FloatArray, vectors: npt.ArrayLike) -> FloatArray:
    v = np.asarray(vectors, dtype=float)
    return np.asarray(np.einsum("...i,ij,...j->...", v, metric, v), dtype=float)


def scalar(lattice: Lattice, a: npt.ArrayLike, b: npt.ArrayLike) -> FloatArray:
    """Scalar product (a, b)_{g*} of covectors, broadcasting over leading axes."""
    return np.asarray(
        np.einsum("...i,ij,...j->...", np.asarray(a, dtype=float), lattice.metric_g_star, np.asarray(b, dtype=float)),
        dtype=float,
    )


def dual_norm_squared(lattice: Lattice, xi: npt.ArrayLike) -> FloatArray:
    """Squared dual norm ||xi||^2_{g*}, broadcasting over leading axes."""
    return _quadratic(lattice.metric_g_star, xi)


def dual_norm(lattice: Lattice, xi: "CoVector | npt.ArrayLike") -> Any:
    """Dual norm ||xi||_{g*}.

    Args:
        lattice: The lattice providing g*
        xi: A CoVector or an array of covectors (last axis of length d)

    Returns:
        A float for a single covector, an array otherwise
    """
    values = xi.components if isinstance(xi, CoVector) else xi
    result = np.sqrt(dual_norm_squared(lattice, values))
    return float(result) if np.ndim(result) == 0 else result


def bracket(lattice: Lattice, xi: "CoVector | npt.ArrayLike") -> Any:
    """Japanese bracket <xi>_g = (1 + ||xi||^2_{g*})^(1/2)."""
    values = xi.components if isinstance(xi, CoVector) else xi
    result = np.sqrt(1.0 + dual_norm_squared(lattice, values))
    return float(result) if np.ndim(result) == 0 else result


def _canonical_witness(candidates: IntArray) -> IntArray:
    # Prefer first nonzero coordinate positive, then smallest l1 norm, then lexicographically largest
    def first_positive(k: IntArray) -> bool:
        nonzero = k[k != 0]
        return bool(nonzero.size and nonzero[0] > 0)

    positive = [k for k in candidates if first_positive(k)] or list(candidates)
    return max(positive, key=lambda k: (-int(np.abs(k).sum()), tuple(int(x) for x in k)))


def coercivity_constant(lattice: Lattice) -> tuple[float, IntArray]:
    """Compute the coercivity constant min_{k != 0} ||k||^2_{g*} and a witness.

    A first pass over ||k||_inf <= 2 yields a candidate c0; every k with
    ||k||^2_{g*} <= c0 lies in the cube of radius ceil(sqrt(c0 / lambda_min(g*))),
    so the second enumeration is exhaustive.

    Args:
        lattice: The lattice

    Returns:
        Tuple (constant, witness vector)
    """
    return _coercivity(lattice.metric_g_star)


def _coercivity(metric_g_star: FloatArray) -> tuple[float, IntArray]:
    d = metric_g_star.shape[0]
    first = lattice_cube(d, 2)
    first = first[np.any(first != 0, axis=1)]
    c0 = float(_quadratic(metric_g_star, first).min())
    lam_min = float(np.linalg.eigvalsh(metric_g_star)[0])
    radius = max(1, math.ceil(math.sqrt(c0 / lam_min)))
    cube = lattice_cube(d, radius)
    cube = cube[np.any(cube != 0, axis=1)]
    values = _quadratic(metric_g_star, cube)
    best = float(values.min())
    ties = cube[values <= best * (1.0 + _TIE_TOLERANCE)]
    return best, _canonical_witness(ties)


def gram_volume(lattice: Lattice, vectors: npt.ArrayLike) -> float:
    """Volume of the parallelepiped spanned by integer vectors, in the metric g*.

    Computed as the square root of the Gram determinant det(U g* U^T).
    """
    u = np.atleast_2d(np.asarray(vectors, dtype=float))
    gram = u @ lattice.metric_g_star @ u.T
    return math.sqrt(max(float(np.linalg.det(gram)), 0.0))


def min_parallelepiped_volume(lattice: Lattice) -> VolumeConstant:
    """Compute the parallelepiped volume constant.

    The returned bound is c2^(-d) * sqrt(det g) with c2 = max_j ||e_j||. For
    d <= 3 the exact minimum of the g*-volume over independent integer tuples
    in a small ball is also returned.
    """
    return _volume_constant(lattice.basis, lattice.metric_g, lattice.metric_g_star)


def _volume_constant(basis: FloatArray, metric_g: FloatArray, metric_g_star: FloatArray) -> VolumeConstant:
    d = basis.shape[0]
    c2 = float(np.linalg.norm(basis, axis=1).max())
    bound = c2 ** (-d) * math.sqrt(float(np.linalg.det(metric_g)))
    if d > 3:
        return VolumeConstant(bound=bound)

    coercivity, witness = _coercivity(metric_g_star)
    # s = 1: the shortest vector; s = d: any unimodular tuple
    best = math.sqrt(coercivity)
    best_witness = witness.reshape(1, d)
    full = math.sqrt(float(np.linalg.det(metric_g_star)))
    if d > 1 and full < best:
        best, best_witness = full, np.eye(d, dtype=np.int64)

    if d == 3:
        candidates = lattice_cube(d, 2)
        candidates = candidates[np.any(candidates != 0, axis=1)]
        f = candidates.astype(float)
        norms = _quadratic(metric_g_star, f)
        cross = f @ metric_g_star @ f.T
        gram_det = np.outer(norms, norms) - cross**2
        gram_det[gram_det <= 1e-9] = np.inf
        i, j = np.unravel_index(int(np.argmin(gram_det)), gram_det.shape)
        pair_volume = math.sqrt(float(gram_det[i, j]))
        if pair_volume < best:
            best, best_witness = pair_volume, np.vstack([candidates[i], candidates[j]])

    return VolumeConstant(bound=bound, exact=best, witness=best_witness)


def volume_bound(lattice: Lattice, vectors: npt.ArrayLike, alpha: float, n_max: float) -> float:
    """Bound ||w|| for w in span{u_j} with |<w, u_j>| <= alpha and ||u_j|| <= N.

    Args:
        lattice: The lattice providing g*
        vectors: Integer vectors u_1..u_s as rows
        alpha: Bound on the scalar products
        n_max: Bound N on the norms of the u_j

    Returns:
        s * N^(s-1) * alpha / Vol_g(u_1 | ... | u_s)

    Raises:
        DependentVectorsError: If the u_j are linearly dependent
    """
    u = np.atleast_2d(np.asarray(vectors, dtype=float))
    s = u.shape[0]
    if np.linalg.matrix_rank(u) < s:
        msg = f"Vectors {u.astype(int).tolist()} are linearly dependent"
        raise DependentVectorsError(msg)
    vol = gram_volume(lattice, u)
    return s * n_max ** (s - 1) * alpha / vol


def build_lattice(basis: npt.ArrayLike, kappa: Optional[npt.ArrayLike] = None) -> Lattice:
    """Build a lattice from basis rows and a Floquet parameter.

    Args:
        basis: d x d real matrix whose rows are the basis vectors e_A
        kappa: Floquet parameter in [0, 1)^d (defaults to zero)

    Returns:
        Fully populated Lattice

    Raises:
        DegenerateLatticeError: If the rows are linearly dependent
    """
    b = np.atleast_2d(np.asarray(basis, dtype=float))
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        msg = f"Basis must be a square matrix, got shape {b.shape}"
        raise DegenerateLatticeError(msg)
    d = b.shape[0]
    row_norms = np.linalg.norm(b, axis=1)
    if np.any(row_norms == 0) or abs(float(np.linalg.det(b / row_norms[:, None]))) <= 1e-10:
        msg = f"Basis rows are linearly dependent: {b.tolist()}"
        raise DegenerateLatticeError(msg)

    k = np.zeros(d) if kappa is None else np.asarray(kappa, dtype=float).reshape(-1)
    if k.shape != (d,):
        msg = f"kappa must have {d} components, got {k.shape[0]}"
        raise ValueError(msg)
    if np.any(k < 0) or np.any(k >= 1):
        msg = f"kappa must lie in [0, 1)^d, got {k.tolist()}"
        raise ValueError(msg)

    g = b @ b.T
    g = (g + g.T) / 2
    g_star = np.linalg.inv(g)
    g_star = (g_star + g_star.T) / 2
    coercivity, witness = _coercivity(g_star)
    volume = _volume_constant(b, g, g_star)
    logger.debug("Built lattice d=%d coercivity=%.6g volume=%.6g", d, coercivity, volume.value)
    return Lattice(
        dimension=d,
        basis=b,
        metric_g=g,
        metric_g_star=g_star,
        kappa=k,
        coercivity=coercivity,
        coercivity_witness=witness,
        volume=volume,
    )


def lattice_ball(lattice: Lattice, radius: float) -> IntArray:
    """Integer points xi with ||xi + kappa||_{g*} <= radius, in lexicographic order."""
    lam_min = float(np.linalg.eigvalsh(lattice.metric_g_star)[0])
    half_width = math.ceil(radius / math.sqrt(lam_min)) + 1
    cube = lattice_cube(lattice.dimension, half_width)
    keep = dual_norm_squared(lattice, cube + lattice.kappa) <= radius**2 + 1e-9
    return cube[keep]


def load_lattice(mapping: Mapping[str, Any]) -> Lattice:
    """Build a lattice from a JSON mapping ``{"basis": [[...]], "kappa": [...]}``.

    Raises:
        ConfigError: If the mapping is malformed or the basis is degenerate
    """
    if "basis" not in mapping:
        msg = "Lattice specification needs a 'basis'"
        raise ConfigError(msg, [{"field": "lattice.basis", "message": "missing"}])
    try:
        return build_lattice(mapping["basis"], mapping.get("kappa"))
    except (DegenerateLatticeError, ValueError, TypeError) as e:
        msg = f"Invalid lattice specification: {e}"
        raise ConfigError(msg, [{"field": "lattice", "message": str(e)}]) from e
