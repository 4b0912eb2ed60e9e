"""Resonance parameters (epsilon, delta, tau) and the C_s/D_s schedule."""

from dataclasses import dataclass, field, replace
from typing import Any, Optional

from torus_spectra.errors import ParamsInvalidError, ParamsInvalidForSublatticeError


@dataclass(frozen=True)
class PartitionParams:
    """Parameters of the resonant zones.

    Attributes:
        epsilon: Exponent bounding resonant frequencies, ||k|| <= <xi_k>^epsilon
        delta: Exponent of the small-divisor threshold at level 0
        tau: Diophantine exponent, must exceed d - 1
        c_schedule: Explicit constants C_1, C_2, ... (C_0 = 1); None means 2^s
        d_schedule: Explicit constants D_1, D_2, ... (D_0 = 1); None means 2^s
        auto_escalate: Whether partitioning may double the schedule on conflicts
    """

    epsilon: float = 0.05
    delta: float = 0.5
    tau: float = 1.1
    c_schedule: Optional[tuple[float, ...]] = None
    d_schedule: Optional[tuple[float, ...]] = None
    auto_escalate: bool = True
    escalations: int = field(default=0, compare=False)

    def delta_level(self, s: int, dimension: int) -> float:
        """delta_s with delta_0 = delta and delta_{s+1} = delta_s + (d + tau + 1) epsilon."""
        return self.delta + s * (dimension + self.tau + 1) * self.epsilon

    @staticmethod
    def _constant(schedule: Optional[tuple[float, ...]], s: int, escalations: int) -> float:
        if s == 0:
            return 1.0
        if not schedule:
            return 2.0 ** (s + escalations)
        if s <= len(schedule):
            return float(schedule[s - 1])
        # Explicit schedules continue geometrically past their last entry
        return float(schedule[-1]) * 2.0 ** (s - len(schedule))

    def constant_c(self, s: int) -> float:
        """C_s (C_0 = 1)."""
        return self._constant(self.c_schedule, s, self.escalations)

    def constant_d(self, s: int) -> float:
        """D_s (D_0 = 1)."""
        return self._constant(self.d_schedule, s, self.escalations)

    def violations(self, dimension: int) -> list[dict[str, Any]]:
        """Machine-readable list of violated admissibility constraints."""
        problems: list[dict[str, Any]] = []
        if min(self.epsilon, self.delta, self.tau) <= 0:
            problems.append({"field": "params", "message": "epsilon, delta and tau must be positive"})
        total = self.delta + dimension * (dimension + self.tau + 1) * self.epsilon
        if total >= 1:
            problems.append({
                "field": "params",
                "message": f"delta + d(d+tau+1)epsilon = {total:.6g} must be < 1",
            })
        if self.epsilon * (self.tau + 1) > self.delta:
            problems.append({
                "field": "params.epsilon",
                "message": f"epsilon(tau+1) = {self.epsilon * (self.tau + 1):.6g} exceeds delta = {self.delta}",
            })
        if self.tau <= dimension - 1:
            problems.append({"field": "params.tau", "message": f"tau = {self.tau} must exceed d - 1 = {dimension - 1}"})
        for name, schedule in (("C", self.c_schedule), ("D", self.d_schedule)):
            if schedule is None:
                continue
            values = [1.0, *schedule]
            if any(b <= a for a, b in zip(values, values[1:])):
                problems.append({"field": f"params.{name}", "message": f"{name}_s must increase strictly from 1"})
        return problems

    def validate(self, dimension: int, sublattice: bool = False) -> None:
        """Check the admissibility constraints for lattices of the given dimension.

        Raises:
            ParamsInvalidError: If any constraint fails
            ParamsInvalidForSublatticeError: Same, when checking a reduced sub-lattice
        """
        problems = self.violations(dimension)
        if not problems:
            return
        msg = f"Invalid partition parameters for d={dimension}: " + "; ".join(p["message"] for p in problems)
        if sublattice:
            raise ParamsInvalidForSublatticeError(msg)
        raise ParamsInvalidError(msg)

    def escalated(self) -> "PartitionParams":
        """Double C_s and D_s for every s >= 1."""
        doubled_c = None if self.c_schedule is None else tuple(2 * c for c in self.c_schedule)
        doubled_d = None if self.d_schedule is None else tuple(2 * c for c in self.d_schedule)
        return replace(self, c_schedule=doubled_c, d_schedule=doubled_d, escalations=self.escalations + 1)

    def schedule(self, dimension: int) -> dict[str, Any]:
        """The full schedule actually in use, for reports."""
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "tau": self.tau,
            "delta_s": [self.delta_level(s, dimension) for s in range(dimension + 1)],
            "C": [self.constant_c(s) for s in range(dimension + 1)],
            "D": [self.constant_d(s) for s in range(dimension + 1)],
            "escalations": self.escalations,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "PartitionParams":
        """Build from ``{"epsilon", "delta", "tau", "C", "D"}``.

        ``C`` and ``D`` list C_1, C_2, ... (C_0 = 1 is implicit); ``"auto"`` means
        2^s with escalation allowed.
        """

        def schedule(value: Any) -> Optional[tuple[float, ...]]:
            if value is None or value == "auto":
                return None
            return tuple(float(v) for v in value)

        c_value = data.get("C", "auto")
        d_value = data.get("D", "auto")
        return cls(
            epsilon=float(data.get("epsilon", 0.05)),
            delta=float(data.get("delta", 0.5)),
            tau=float(data.get("tau", 1.1)),
            c_schedule=schedule(c_value),
            d_schedule=schedule(d_value),
            auto_escalate=c_value == "auto" and d_value == "auto",
        )
