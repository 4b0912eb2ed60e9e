"""Resonant zones Z^(s)_M and raw block levels.

A point xi lies in Z_{k1..ks} when, with eta = xi + kappa + k1/2, every k_j
satisfies |<eta, k_j>| <= C_{j-1} <eta>^delta_{j-1} ||k_j||^-tau and
||k_j|| <= D_{j-1} <eta>^epsilon. The conditions are nested in j, so each
frequency has a first admissible position and a tuple only needs k_j with
position at most j.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq

from torus_spectra.errors import ConstantsTooSmallError
from torus_spectra.lattice import FloatArray, IntArray, Lattice, bracket, dual_norm, dual_norm_squared, lattice_cube
from torus_spectra.partition.params import PartitionParams
from torus_spectra.submodules import Submodule, saturate

logger = logging.getLogger(__name__)

Witness = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class ZoneMembership:
    """xi in Z^(s)_M, witnessed by an ordered tuple of frequencies."""

    level: int
    module: Submodule
    witness: Witness


@dataclass(frozen=True)
class ZoneRecord:
    """All zone memberships of one point.

    Attributes:
        memberships: Every (s, M) with xi in Z^(s)_M, one witness each
    """

    memberships: tuple[ZoneMembership, ...]

    @property
    def in_trivial_zone(self) -> bool:
        """True when xi is in Z^(0) (no resonance at all)."""
        return not self.memberships

    @property
    def top_level(self) -> int:
        return max((m.level for m in self.memberships), default=0)

    @property
    def top_modules(self) -> list[Submodule]:
        """Modules at the maximal level, i.e. the candidates for the raw block."""
        top = self.top_level
        return [m.module for m in self.memberships if m.level == top] if top else []

    def modules_at(self, level: int) -> list[Submodule]:
        return [m.module for m in self.memberships if m.level == level]

    def has(self, level: int, module: Submodule) -> bool:
        return any(m.level == level and m.module == module for m in self.memberships)


def frequency_ball(lattice: Lattice, radius: float) -> IntArray:
    """Nonzero integer k with ||k||_{g*} <= radius, in lexicographic order."""
    lam_min = float(np.linalg.eigvalsh(lattice.metric_g_star)[0])
    half_width = max(1, math.ceil(radius / math.sqrt(lam_min)))
    cube = lattice_cube(lattice.dimension, half_width)
    keep = np.any(cube != 0, axis=1) & (dual_norm_squared(lattice, cube) <= radius**2 + 1e-9)
    return cube[keep]


def frequency_radius(params: PartitionParams, constant: float, max_bracket: float) -> float:
    """Largest ||k|| allowed by ||k|| <= D <xi + kappa + k/2>^epsilon when <xi + kappa> <= max_bracket.

    Solves x = D (a + x/2)^epsilon, using <eta + k/2> <= <eta> + ||k||/2.
    """

    def gap(x: float) -> float:
        return x - constant * (max_bracket + x / 2.0) ** params.epsilon

    upper = max(1.0, 2.0 * constant * max_bracket**params.epsilon)
    while gap(upper) <= 0:
        upper *= 2.0
    return float(brentq(gap, 0.0, upper))


def position_levels(
    lattice: Lattice, points: npt.ArrayLike, shift: npt.ArrayLike, candidates: IntArray, params: PartitionParams
) -> npt.NDArray[np.int64]:
    """First admissible position index (0-based) of every candidate at every point.

    Index j means the conditions with C_j, delta_j, D_j hold at
    eta = xi + kappa + shift/2; ``d`` means no admissible position.
    """
    d = lattice.dimension
    eta = np.asarray(points, dtype=float).reshape(-1, d) + lattice.kappa + np.asarray(shift, dtype=float) / 2.0
    br = np.sqrt(1.0 + dual_norm_squared(lattice, eta))[:, None]
    knorm = np.sqrt(dual_norm_squared(lattice, candidates.astype(float)))[None, :]
    pairing = np.abs(eta @ lattice.metric_g_star @ candidates.T.astype(float))
    levels = np.full(pairing.shape, d, dtype=np.int64)
    for j in range(d - 1, -1, -1):
        admissible = (pairing <= params.constant_c(j) * br ** params.delta_level(j, d) * knorm ** (-params.tau)) & (
            knorm <= params.constant_d(j) * br**params.epsilon
        )
        levels[admissible] = j
    return levels


def resonant_vectors(lattice: Lattice, xi: npt.ArrayLike, params: PartitionParams) -> list[tuple[IntArray, float]]:
    """Frequencies k != 0 resonant with xi at level 0, with |<xi_k, k>| as witness.

    The candidates come from the ball of radius 2<xi + kappa>^epsilon + 2, which
    contains every k with ||k|| <= <xi + kappa + k/2>^epsilon.
    """
    point = np.asarray(xi, dtype=float)
    radius = 2.0 * bracket(lattice, point + lattice.kappa) ** params.epsilon + 2.0
    found = []
    for k in frequency_ball(lattice, radius):
        eta = point + lattice.kappa + k / 2.0
        br = bracket(lattice, eta)
        knorm = dual_norm(lattice, k)
        pairing = abs(float(eta @ lattice.metric_g_star @ k))
        if knorm <= br**params.epsilon and pairing <= br**params.delta * knorm ** (-params.tau):
            found.append((k, pairing))
    return found


@lru_cache(maxsize=65536)
def _extend(module: Submodule, vector: tuple[int, ...]) -> Submodule:
    return saturate(np.vstack([module.basis, np.asarray(vector, dtype=np.int64)]), module.dimension)


@lru_cache(maxsize=4096)
def _line(vector: tuple[int, ...]) -> Submodule:
    return saturate([vector], len(vector))


class ZoneTable:
    """Zone memberships of a set of points, computed in a vectorised first pass.

    Attributes:
        lattice: The lattice
        points: Points (rows) the table was built for
        params: Parameters in use
        candidates: Frequencies considered for every position
        records: One ZoneRecord per point
    """

    def __init__(self, lattice: Lattice, points: npt.ArrayLike, params: PartitionParams) -> None:
        self.lattice = lattice
        self.params = params
        self.points = np.asarray(points, dtype=np.int64).reshape(-1, lattice.dimension)
        d = lattice.dimension
        if self.points.shape[0] == 0:
            self.candidates = np.zeros((0, d), dtype=np.int64)
            self.records: list[ZoneRecord] = []
            return
        max_bracket = float(np.max(bracket(lattice, self.points + lattice.kappa)))
        self.candidates = frequency_ball(lattice, frequency_radius(params, params.constant_d(d - 1), max_bracket))
        first_radius = frequency_radius(params, 1.0, max_bracket)
        first = np.flatnonzero(np.sqrt(dual_norm_squared(lattice, self.candidates.astype(float))) <= first_radius + 1e-9)

        found: list[dict[tuple[int, Submodule], Witness]] = [{} for _ in range(self.points.shape[0])]
        for column in first:
            k1 = self.candidates[column]
            levels = position_levels(lattice, self.points, k1, self.candidates, params)
            for row in np.flatnonzero(levels[:, column] == 0):
                self._explore(k1, levels[row], found[row])

        self.records = [
            ZoneRecord(
                tuple(
                    ZoneMembership(level, module, witness)
                    for (level, module), witness in sorted(entry.items(), key=lambda item: (item[0][0], item[0][1].key))
                )
            )
            for entry in found
        ]
        logger.info(
            "Zones: %d points, %d candidates, %d outside Z^(0)",
            self.points.shape[0],
            self.candidates.shape[0],
            sum(1 for r in self.records if not r.in_trivial_zone),
        )

    def _explore(
        self, k1: IntArray, levels: npt.NDArray[np.int64], found: dict[tuple[int, Submodule], Witness]
    ) -> None:
        d = self.lattice.dimension
        start = _line(tuple(int(x) for x in k1))
        frontier: dict[Submodule, Witness] = {start: (tuple(int(x) for x in k1),)}
        for depth in range(1, d + 1):
            for module, witness in frontier.items():
                found.setdefault((depth, module), witness)
            if depth == d:
                break
            usable = self.candidates[levels <= depth]
            following: dict[Submodule, Witness] = {}
            for module, witness in frontier.items():
                outside = np.any(module.coordinates(usable)[:, module.rank :] != 0, axis=1)
                for k in usable[outside]:
                    key = tuple(int(x) for x in k)
                    extended = _extend(module, key)
                    following.setdefault(extended, (*witness, key))
            if not following:
                break
            frontier = following


def zone_membership(lattice: Lattice, xi: npt.ArrayLike, params: PartitionParams) -> list[ZoneMembership]:
    """Every (s, M) with xi in Z^(s)_M, each with a witnessing tuple."""
    return list(ZoneTable(lattice, [xi], params).records[0].memberships)


def block_label_raw(lattice: Lattice, xi: npt.ArrayLike, params: PartitionParams) -> tuple[int, Submodule]:
    """Level and module of the raw block B^(s)_M containing xi.

    Raises:
        ConstantsTooSmallError: If several modules share the maximal level
    """
    record = ZoneTable(lattice, [xi], params).records[0]
    return raw_block(record, lattice.dimension, np.asarray(xi))


def raw_block(record: ZoneRecord, dimension: int, xi: Optional[npt.ArrayLike] = None) -> tuple[int, Submodule]:
    """Raw block of a zone record (zero module at level 0)."""
    if record.in_trivial_zone:
        return 0, Submodule.zero(dimension)
    modules = record.top_modules
    if len(modules) > 1:
        where = "" if xi is None else f" at {np.asarray(xi).tolist()}"
        msg = f"Several level-{record.top_level} modules{where}: {[m.basis.tolist() for m in modules]}"
        raise ConstantsTooSmallError(msg)
    return record.top_level, modules[0]


def projection_radius(lattice: Lattice, params: PartitionParams, level: int, ell: float) -> float:
    """Bound t on ||(xi + kappa)_M|| for xi in Z^(s)_M with ||(xi + kappa)_Mperp|| = ell.

    Solves t = K_s (2(1 + ell + t))^b + (2(1 + ell + t))^epsilon / 2, with
    b = delta_{s-1} + (s-1) epsilon and K_s = s D_{s-1}^{s-1} C_{s-1} c^{-tau/2} / c-bar.
    """
    d = lattice.dimension
    s = level
    exponent = params.delta_level(s - 1, d) + (s - 1) * params.epsilon
    constant = (
        s
        * params.constant_d(s - 1) ** (s - 1)
        * params.constant_c(s - 1)
        * lattice.coercivity ** (-params.tau / 2.0)
        / lattice.volume.value
    )

    def gap(t: float) -> float:
        scale = 2.0 * (1.0 + ell + t)
        return t - constant * scale**exponent - scale**params.epsilon / 2.0

    upper = 1.0
    while gap(upper) <= 0:
        upper *= 2.0
    return float(brentq(gap, 0.0, upper))


def projection_ratio(lattice: Lattice, params: PartitionParams, level: int, projected: FloatArray, shifted: FloatArray) -> FloatArray:
    """||(xi + kappa)_M|| / <xi + kappa>^(delta_{s-1} + d epsilon), the quantity bounded by K."""
    exponent = params.delta_level(level - 1, lattice.dimension) + lattice.dimension * params.epsilon
    return np.asarray(
        np.sqrt(dual_norm_squared(lattice, projected)) / np.sqrt(1.0 + dual_norm_squared(lattice, shifted)) ** exponent,
        dtype=float,
    )
