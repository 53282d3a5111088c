"""Scalar results with uncertainty.

Closed-form quantities carry ``exact=True`` and zero standard error; Monte
Carlo fallbacks report ``(value, stderr, n)``.  Quantities that diverge (for
example the relative entropy of a measure with an atomic component) are
flagged ``infinite`` rather than raised, so report tables can carry them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float = 0.0
    n: int = 0
    exact: bool = False
    infinite: bool = False

    def __post_init__(self):
        if self.infinite and math.isfinite(self.value):
            object.__setattr__(self, "value", math.inf)

    @property
    def finite(self) -> bool:
        return not self.infinite and math.isfinite(self.value)

    def combined_stderr(self, other: "Estimate") -> float:
        return math.hypot(self.stderr, other.stderr)

    def gap_z(self, other: "Estimate", floor: float = 1e-9) -> float:
        """Gap to ``other`` in units of the combined standard error.

        ``floor`` keeps exact-vs-exact comparisons meaningful: two closed-form
        values that agree to rounding should score z = 0, not 0/0.
        """
        scale = max(self.combined_stderr(other), floor)
        return (self.value - other.value) / scale


def exact(value: float) -> Estimate:
    return Estimate(float(value), 0.0, 0, exact=True)


def infinite() -> Estimate:
    return Estimate(math.inf, 0.0, 0, exact=True, infinite=True)


def from_samples(samples: np.ndarray) -> Estimate:
    """Mean and standard error of a 1-D sample vector."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("cannot estimate from an empty sample")
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return Estimate(float(x.mean()), se, n)
