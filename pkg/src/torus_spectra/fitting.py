"""Log-log regressions used for decay and asymptotics evidence."""

from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy.stats import linregress

from torus_spectra.errors import InsufficientDataError

MIN_POINTS = 8
# values at or below this count as exact zeros
ZERO_FLOOR = 1e-300


@dataclass(frozen=True)
class PowerFit:
    """y ≈ prefactor * x^exponent fitted in log-log coordinates.

    Attributes:
        exponent: Fitted slope
        prefactor: exp of the fitted intercept
        r_value: Correlation coefficient
        stderr: Standard error of the slope
        points: Number of points used
    """

    exponent: float
    prefactor: float
    r_value: float
    stderr: float
    points: int

    def band(self, z: float = 1.96) -> tuple[float, float]:
        """Approximate confidence interval of the exponent (95% for the default z)."""
        return self.exponent - z * self.stderr, self.exponent + z * self.stderr

    def to_json(self) -> dict[str, Any]:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "r_value": self.r_value,
            "stderr": self.stderr,
            "points": self.points,
        }


def power_law_fit(x: npt.ArrayLike, y: npt.ArrayLike, min_points: int = MIN_POINTS) -> PowerFit:
    """Fit log|y| = a log x + b over the points with x > 0 and y != 0.

    Raises:
        InsufficientDataError: With ``exact=True`` when every y vanishes, otherwise
            when fewer than ``min_points`` usable points (or a single x value) remain
    """
    xs = np.asarray(x, dtype=float).reshape(-1)
    ys = np.abs(np.asarray(y, dtype=float).reshape(-1))
    if xs.size and np.all(ys <= ZERO_FLOOR):
        msg = f"All {xs.size} values vanish; nothing to fit"
        raise InsufficientDataError(msg, exact=True)
    keep = (xs > 0) & (ys > ZERO_FLOOR) & np.isfinite(xs) & np.isfinite(ys)
    count = int(keep.sum())
    if count < min_points or np.unique(xs[keep]).size < 2:
        msg = f"Only {count} usable points (need {min_points})"
        raise InsufficientDataError(msg)
    result = linregress(np.log(xs[keep]), np.log(ys[keep]))
    return PowerFit(
        exponent=float(result.slope),
        prefactor=float(np.exp(result.intercept)),
        r_value=float(result.rvalue),
        stderr=float(result.stderr),
        points=count,
    )
