"""Discretization grids on (0, 1] and their step-size diagnostics.

A grid ``0 < t_0 < ... < t_N <= 1`` doubles as a schedule in the
Ornstein-Uhlenbeck clock ``tau_i = T + log(t_i)/2`` with horizon
``T = -log(t_0)/2``, so ``tau_0 = 0`` always.  Three step-size ratios are
reported, each as the smallest constant kappa that the grid satisfies:

* ``kappa_step``:      h_i <= kappa * (1 - t_{i+1})      (terminal-gap ratio)
* ``kappa_tau``:       tau_{i+1} - tau_i <= kappa * min(1, T - tau_{i+1})
* ``kappa_relative``:  h_i <= 6 * kappa * t_i            (relative step size)

A grid satisfying the tau condition with kappa also satisfies the other two
with the same kappa; ``check_assumptions`` reports whether that implication
holds numerically for the grid at hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times in (0, 1]; ``t[-1] = 1`` is allowed."""

    t: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if t.ndim != 1 or t.size < 1:
            raise ValueError("a grid needs at least one time")
        if t[0] <= 0.0:
            raise ValueError("t_0 must be positive")
        if t[-1] > 1.0:
            raise ValueError("times must not exceed 1")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "t", t)

    # -- basic quantities ----------------------------------------------------

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.t)

    @property
    def h_max(self) -> float:
        return float(self.h.max()) if self.n_steps else 0.0

    @property
    def delta(self) -> float:
        """Terminal gap 1 - t_N."""
        return 1.0 - self.t_end

    @property
    def horizon(self) -> float:
        """OU horizon T = -log(t_0)/2."""
        return -0.5 * math.log(self.t0)

    @property
    def tau(self) -> np.ndarray:
        return self.horizon + 0.5 * np.log(self.t)

    # -- step-size ratios ------------------------------------------------------

    @property
    def kappa_step(self) -> float:
        """Smallest kappa with h_i <= kappa (1 - t_{i+1}); inf when t_N = 1."""
        if self.n_steps == 0:
            return 0.0
        gaps = 1.0 - self.t[1:]
        with np.errstate(divide="ignore"):
            ratios = np.where(gaps > 0.0, self.h / np.where(gaps > 0, gaps, 1.0), np.inf)
        return float(ratios.max())

    @property
    def kappa_tau(self) -> float:
        """Smallest kappa with tau_{i+1} - tau_i <= kappa min(1, T - tau_{i+1})."""
        if self.n_steps == 0:
            return 0.0
        tau = self.tau
        caps = np.minimum(1.0, self.horizon - tau[1:])
        dtau = np.diff(tau)
        with np.errstate(divide="ignore"):
            ratios = np.where(caps > 0.0, dtau / np.where(caps > 0, caps, 1.0), np.inf)
        return float(ratios.max())

    @property
    def kappa_relative(self) -> float:
        """Smallest kappa with h_i <= 6 kappa t_i."""
        if self.n_steps == 0:
            return 0.0
        return float((self.h / (6.0 * self.t[:-1])).max())

    def check_assumptions(self) -> "AssumptionReport":
        # each clock step of size u multiplies t by e^{2u}, so the widest
        # relative width under the clock condition is (e^{2 kappa} - 1)/6;
        # that matches kappa itself only up to kappa ~ 0.952
        ktau = self.kappa_tau
        width_limit = (math.exp(2.0 * ktau) - 1.0) / 6.0 if math.isfinite(ktau) else math.inf
        return AssumptionReport(
            kappa_step=self.kappa_step,
            kappa_tau=ktau,
            kappa_relative=self.kappa_relative,
            t0_at_most_half=self.t0 <= 0.5,
            tau_implies_step=self.kappa_step <= ktau * (1.0 + 1e-12),
            tau_implies_relative=self.kappa_relative <= width_limit * (1.0 + 1e-12),
        )

    def as_dict(self) -> dict:
        report = self.check_assumptions()
        return {
            "t": self.t.tolist(),
            "tau": self.tau.tolist(),
            "h": self.h.tolist(),
            "t0": self.t0,
            "t_end": self.t_end,
            "delta": self.delta,
            "horizon": self.horizon,
            "n_steps": self.n_steps,
            "kappa_step": report.kappa_step,
            "kappa_tau": report.kappa_tau,
            "kappa_relative": report.kappa_relative,
            "t0_at_most_half": report.t0_at_most_half,
            "provenance": dict(self.provenance),
        }


@dataclass(frozen=True)
class AssumptionReport:
    kappa_step: float
    kappa_tau: float
    kappa_relative: float
    t0_at_most_half: bool
    tau_implies_step: bool
    tau_implies_relative: bool

    def as_dict(self) -> dict:
        return {
            "kappa_step": self.kappa_step,
            "kappa_tau": self.kappa_tau,
            "kappa_relative": self.kappa_relative,
            "t0_at_most_half": self.t0_at_most_half,
            "tau_implies_step": self.tau_implies_step,
            "tau_implies_relative": self.tau_implies_relative,
        }


def _check_construction(t0: float, delta: float, n_steps: int):
    if not 0.0 < t0 < 1.0:
        raise ValueError(f"t0 must lie in (0, 1), got {t0}")
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if t0 >= 1.0 - delta:
        raise ValueError(f"degenerate grid: t0={t0} does not precede t_N={1.0 - delta}")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")


def grid_uniform_t(t0: float, delta: float, n_steps: int) -> TimeGrid:
    """Equispaced times from t0 to 1 - delta with n_steps intervals."""
    _check_construction(t0, delta, n_steps)
    t = np.linspace(t0, 1.0 - delta, n_steps + 1)
    t[0], t[-1] = t0, 1.0 - delta
    return TimeGrid(t, provenance={"constructor": "uniform_t", "t0": t0, "delta": delta, "n_steps": n_steps})


def grid_uniform_tau(t0: float, delta: float, n_steps: int) -> TimeGrid:
    """Geometric times: equispaced in the OU clock, i.e. t_i = t0 * ((1-delta)/t0)^(i/N)."""
    _check_construction(t0, delta, n_steps)
    log_t = np.linspace(math.log(t0), math.log(1.0 - delta), n_steps + 1)
    t = np.exp(log_t)
    t[0], t[-1] = t0, 1.0 - delta
    return TimeGrid(t, provenance={"constructor": "uniform_tau", "t0": t0, "delta": delta, "n_steps": n_steps})


def grid_explicit(times) -> TimeGrid:
    return TimeGrid(np.asarray(times, dtype=float), provenance={"constructor": "explicit"})


def tau_of_t(t, t0: float):
    """OU clock of process time: tau = T + log(t)/2 with T = -log(t0)/2."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0) or np.any(t > 1.0):
        raise ValueError("t must lie in (0, 1]")
    out = -0.5 * math.log(t0) + 0.5 * np.log(t)
    return float(out) if out.ndim == 0 else out


def t_of_tau(tau, t0: float):
    """Inverse clock: t = t0 * exp(2 tau)."""
    tau = np.asarray(tau, dtype=float)
    out = t0 * np.exp(2.0 * tau)
    if np.any(out > 1.0 + 1e-12):
        raise ValueError("tau exceeds the horizon for this t0")
    out = np.minimum(out, 1.0)
    return float(out) if out.ndim == 0 else out


def terminal_clock_gap_bounds(delta: float) -> tuple[float, float]:
    """Closed interval that T - tau_N must occupy: [delta/2, delta/(2(1-delta))]."""
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    return delta / 2.0, delta / (2.0 * (1.0 - delta)) if delta > 0 else 0.0


def random_tau_grid(kappa: float, n_steps: int, rng) -> TimeGrid:
    """Random grid satisfying the tau-spacing condition with the given kappa.

    Built backwards from a random t_N < 1: each clock step is a uniform
    fraction of its cap kappa * min(1, T - tau_{i+1}).
    """
    if not 0.0 < kappa:
        raise ValueError("kappa must be positive")
    t = np.empty(n_steps + 1)
    t[-1] = rng.uniform(0.3, 0.99)
    for i in range(n_steps - 1, -1, -1):
        cap = kappa * min(1.0, -0.5 * math.log(t[i + 1]))
        dtau = rng.uniform(0.05, 1.0) * cap
        t[i] = t[i + 1] * math.exp(-2.0 * dtau)
    return TimeGrid(t, provenance={"constructor": "random_tau", "kappa": kappa, "n_steps": n_steps})
