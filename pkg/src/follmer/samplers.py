"""Discretized samplers: Euler-Maruyama, the posterior-mean scheme, and the
generic noise-prediction recursion that subsumes both.

State conventions.  ``run_em`` and ``run_ada`` integrate in the process scale
(X at time t).  ``run_ddpm`` integrates the whitened recursion

    x_{i+1} = (x_i + eta_i * s_i(x_i) + sigma_i * Z_i) / sqrt(alpha_i)

whose state corresponds to X_{t_i} / sqrt(t_i); its outputs are converted
back to the process scale so all runners report comparable samples.

The arithmetic groupings inside the step loops are load-bearing: on grids
whose times are powers of four every scale factor is a power of two, and the
equivalence tests then compare full trajectories across runners bitwise.  Do
not refactor the step expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import TimeGrid
from .measures import TargetMeasure
from .rng import INIT_STREAM, STEP_STREAM, substream


@dataclass(frozen=True)
class DdpmParams:
    """Per-step parameters of the whitened recursion.

    ``alpha`` has one entry per step plus a trailing ``alpha[N] = t_N`` so the
    suffix products telescope to ``alpha_bar[i] = t_i``; ``alpha_bar`` is
    assigned from the grid directly because the telescoping is exact in real
    arithmetic while a floating suffix product would not be.
    """

    alpha: np.ndarray
    eta: np.ndarray
    sigma: np.ndarray
    alpha_bar: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        a, e, s, ab = (np.asarray(v, dtype=float) for v in (self.alpha, self.eta, self.sigma, self.alpha_bar))
        n = ab.size - 1
        if n < 0 or a.shape != (n + 1,) or e.shape != (n,) or s.shape != (n,):
            raise ValueError("parameter lengths disagree: need alpha (N+1,), eta (N,), sigma (N,)")
        if np.any(a <= 0.0) or np.any(a > 1.0):
            raise ValueError("alpha entries must lie in (0, 1]")
        if np.any(e < 0.0) or np.any(s < 0.0):
            raise ValueError("eta and sigma must be nonnegative")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "eta", e)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "alpha_bar", ab)

    @property
    def n_steps(self) -> int:
        return self.eta.size


def _step_ratios(grid: TimeGrid) -> np.ndarray:
    t = grid.t
    alpha = np.empty(t.size)
    alpha[:-1] = t[:-1] / t[1:]
    alpha[-1] = t[-1]
    return alpha


def params_standard(grid: TimeGrid) -> DdpmParams:
    """alpha_i = t_i/t_{i+1}, eta_i = 1 - alpha_i, sigma_i = sqrt(alpha_i(1 - alpha_i))."""
    alpha = _step_ratios(grid)
    a = alpha[:-1]
    return DdpmParams(alpha, 1.0 - a, np.sqrt(a * (1.0 - a)), grid.t.copy(), label="standard")


def params_expint(grid: TimeGrid) -> DdpmParams:
    """Exponential-integrator variant: eta_i = 2(1 - sqrt(alpha_i)), sigma_i = sqrt(1 - alpha_i)."""
    alpha = _step_ratios(grid)
    a = alpha[:-1]
    return DdpmParams(alpha, 2.0 * (1.0 - np.sqrt(a)), np.sqrt(1.0 - a), grid.t.copy(), label="expint")


def params_ada(grid: TimeGrid) -> DdpmParams:
    """Posterior-mean scheme: eta_i = 1 - alpha_i, sigma_i^2 = (1-alpha_i)(alpha_i-abar_i)/(1-abar_i)."""
    alpha = _step_ratios(grid)
    t = grid.t
    a, abar = alpha[:-1], t[:-1]
    var = (1.0 - a) * (a - abar) / (1.0 - abar)
    other = grid.h * t[:-1] * (1.0 - t[1:]) / (t[1:] ** 2 * (1.0 - t[:-1]))
    if not np.allclose(var, other, rtol=1e-12, atol=1e-15):
        raise ArithmeticError("posterior-mean sigma^2 closed forms disagree beyond 1e-12")
    return DdpmParams(alpha, 1.0 - a, np.sqrt(np.maximum(var, 0.0)), t.copy(), label="ada")


@dataclass(frozen=True)
class SamplerRun:
    """Output of one sampler invocation, in the process scale."""

    scheme: str
    times: np.ndarray
    terminal: np.ndarray
    trajectory: np.ndarray | None
    seed: int

    @property
    def n_paths(self) -> int:
        return self.terminal.shape[0]

    @property
    def dimension(self) -> int:
        return self.terminal.shape[1]


def run_em(model, grid: TimeGrid, n_paths: int, seed: int, keep_trajectory: bool = False) -> SamplerRun:
    """Euler-Maruyama: init sqrt(t_0) Z, step X + (X/t_i + model(X, t_i)) h_i + sqrt(h_i) Z_i."""
    t = grid.t
    d = model.dimension
    init_rng = substream(seed, INIT_STREAM)
    step_rng = substream(seed, STEP_STREAM)
    x = np.sqrt(t[0]) * init_rng.standard_normal((n_paths, d))
    traj = np.empty((n_paths, t.size, d)) if keep_trajectory else None
    if traj is not None:
        traj[:, 0, :] = x
    for i in range(grid.n_steps):
        h = t[i + 1] - t[i]
        s = model(x, float(t[i]))
        z = step_rng.standard_normal((n_paths, d))
        x = (1.0 + h / t[i]) * x + h * s + np.sqrt(h) * z
        if traj is not None:
            traj[:, i + 1, :] = x
    return SamplerRun("em", t.copy(), x, traj, seed)


def run_ada(model, grid: TimeGrid, n_paths: int, seed: int, keep_trajectory: bool = False) -> SamplerRun:
    """Posterior-mean scheme: init sqrt(t_0(1-t_0)) Z, linear-SDE-exact noise per step."""
    t = grid.t
    d = model.dimension
    init_rng = substream(seed, INIT_STREAM)
    step_rng = substream(seed, STEP_STREAM)
    x = np.sqrt(t[0] * (1.0 - t[0])) * init_rng.standard_normal((n_paths, d))
    traj = np.empty((n_paths, t.size, d)) if keep_trajectory else None
    if traj is not None:
        traj[:, 0, :] = x
    for i in range(grid.n_steps):
        h = t[i + 1] - t[i]
        s = model(x, float(t[i]))
        z = step_rng.standard_normal((n_paths, d))
        x = (t[i + 1] / t[i]) * x + h * s + np.sqrt(h * (1.0 - t[i + 1]) / (1.0 - t[i])) * z
        if traj is not None:
            traj[:, i + 1, :] = x
    return SamplerRun("ada", t.copy(), x, traj, seed)


def ddpm_step_scores(model, grid: TimeGrid):
    """Per-step score for the whitened recursion: s_i(x) = sqrt(t_i) model(sqrt(t_i) x, t_i)."""

    def step_score(i: int, x: np.ndarray) -> np.ndarray:
        rt = np.sqrt(grid.t[i])
        return rt * model(rt * x, float(grid.t[i]))

    return step_score


def run_ddpm(
    params: DdpmParams,
    step_scores,
    dimension: int,
    n_paths: int,
    seed: int,
    init="standard",
    keep_trajectory: bool = False,
) -> SamplerRun:
    """Generic whitened recursion with pluggable per-step scores.

    ``init`` is "standard" (x_0 = Z), "ada" (x_0 = sqrt(1 - t_0) Z), or a
    numeric scale c (x_0 = c Z).  Outputs are rescaled to the process scale
    by sqrt(t_i) nodewise.
    """
    abar = params.alpha_bar
    n_steps = params.n_steps
    init_rng = substream(seed, INIT_STREAM)
    step_rng = substream(seed, STEP_STREAM)
    z0 = init_rng.standard_normal((n_paths, dimension))
    if isinstance(init, str):
        if init == "standard":
            x = z0
        elif init == "ada":
            x = np.sqrt(1.0 - abar[0]) * z0
        else:
            raise ValueError(f"unknown init {init!r}")
    else:
        x = float(init) * z0
    traj = np.empty((n_paths, n_steps + 1, dimension)) if keep_trajectory else None
    if traj is not None:
        traj[:, 0, :] = np.sqrt(abar[0]) * x
    for i in range(n_steps):
        s = step_scores(i, x)
        z = step_rng.standard_normal((n_paths, dimension))
        x = (x + params.eta[i] * s + params.sigma[i] * z) / np.sqrt(params.alpha[i])
        if traj is not None:
            traj[:, i + 1, :] = np.sqrt(abar[i + 1]) * x
    terminal = np.sqrt(abar[-1]) * x
    label = f"ddpm-{params.label}"
    return SamplerRun(label, abar.copy(), terminal, traj, seed)


# ---------------------------------------------------------------------------
# exact law propagation for affine scores (single-Gaussian targets)


def _affine_score_terms(measure: TargetMeasure, t: float) -> tuple[np.ndarray, np.ndarray]:
    """A(t), b(t) with score(x, t) = A(t) x + b(t), for one-component targets."""
    if measure.n_components != 1:
        raise ValueError("affine propagation needs a one-component target")
    d = measure.dimension
    cmat = t * t * measure.covs[0] + t * (1.0 - t) * np.eye(d)
    cinv = np.linalg.inv(cmat)
    a = -cinv
    b = t * (cinv @ measure.means[0])
    return a, b


def exact_terminal_law(measure: TargetMeasure, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the exact process marginal at time t (one component)."""
    if measure.n_components != 1:
        raise ValueError("exact marginal law in closed form needs a one-component target")
    d = measure.dimension
    mean = t * measure.means[0]
    cov = t * t * measure.covs[0] + t * (1.0 - t) * np.eye(d)
    return mean, cov


def propagate_gaussian_law(
    measure: TargetMeasure,
    grid: TimeGrid,
    scheme: str = "em",
    params: DdpmParams | None = None,
    init="standard",
) -> tuple[np.ndarray, np.ndarray]:
    """Exact terminal mean and covariance of a scheme run with the exact score.

    Valid for one-component targets, where the score is affine and each step
    is an affine-Gaussian map, so the law stays Gaussian and composes in
    closed form.  Returns the law in the process scale at t_N.  With zero
    steps the init law is returned.
    """
    d = measure.dimension
    t = grid.t
    eye = np.eye(d)

    if scheme == "em":
        mean = np.zeros(d)
        cov = t[0] * eye
        for i in range(grid.n_steps):
            h = t[i + 1] - t[i]
            a, b = _affine_score_terms(measure, float(t[i]))
            fmat = (1.0 + h / t[i]) * eye + h * a
            mean = fmat @ mean + h * b
            cov = fmat @ cov @ fmat.T + h * eye
        return mean, cov

    if scheme == "ada":
        mean = np.zeros(d)
        cov = t[0] * (1.0 - t[0]) * eye
        for i in range(grid.n_steps):
            h = t[i + 1] - t[i]
            a, b = _affine_score_terms(measure, float(t[i]))
            fmat = (t[i + 1] / t[i]) * eye + h * a
            mean = fmat @ mean + h * b
            cov = fmat @ cov @ fmat.T + h * (1.0 - t[i + 1]) / (1.0 - t[i]) * eye
        return mean, cov

    if scheme == "ddpm":
        if params is None:
            params = params_standard(grid)
        abar = params.alpha_bar
        if init == "standard":
            scale = 1.0
        elif init == "ada":
            scale = math.sqrt(1.0 - abar[0])
        elif isinstance(init, str):
            raise ValueError(f"unknown init {init!r}")
        else:
            scale = float(init)
        mean = np.zeros(d)
        cov = scale * scale * eye
        for i in range(params.n_steps):
            ti = float(abar[i])
            a, b = _affine_score_terms(measure, ti)
            rt = math.sqrt(ti)
            # whitened score: sqrt(t) (A sqrt(t) y + b) = t A y + sqrt(t) b
            root = math.sqrt(params.alpha[i])
            fmat = (eye + params.eta[i] * ti * a) / root
            gvec = params.eta[i] * rt * b / root
            mean = fmat @ mean + gvec
            cov = fmat @ cov @ fmat.T + (params.sigma[i] / root) ** 2 * eye
        return math.sqrt(abar[-1]) * mean, abar[-1] * cov

    raise ValueError(f"unknown scheme {scheme!r}")
