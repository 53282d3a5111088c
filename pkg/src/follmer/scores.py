"""Score models: the exact mixture score and controlled corruptions of it.

A score model maps a batch of points and a time t in (0, 1) to an estimate
of the gradient of the log marginal density of the process at that time.
``ExactScore`` wraps a closed-form target.  ``PerturbedScore`` corrupts any
base model with an affine distortion plus a frozen smooth random field, so
the integrated score error entering the error bounds can be dialed up from
exactly zero.  ``EmpiricalMixtureScore`` is the score of a finite point set,
the plug-in model obtained from training data.
"""

from __future__ import annotations

import math

import numpy as np

from .estimates import Estimate, exact, from_samples
from .grids import TimeGrid
from .measures import TargetMeasure, sample_mu, score_pt
from .process import simulate_follmer
from .rng import as_generator


class ScoreModel:
    """Callable score approximation; subclasses implement __call__."""

    dimension: int

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def is_exact_for(self, measure: TargetMeasure) -> bool:
        """True only when this model equals the measure's score identically."""
        return False


def _same_measure(a: TargetMeasure, b: TargetMeasure) -> bool:
    return (
        a.dimension == b.dimension
        and a.n_components == b.n_components
        and np.array_equal(a.weights, b.weights)
        and np.array_equal(a.means, b.means)
        and np.array_equal(a.covs, b.covs)
    )


class ExactScore(ScoreModel):
    """Closed-form score of a mixture target's process marginal."""

    def __init__(self, measure: TargetMeasure):
        self.measure = measure
        self.dimension = measure.dimension

    def __call__(self, x, t):
        return score_pt(self.measure, t, x)

    def is_exact_for(self, measure: TargetMeasure) -> bool:
        return _same_measure(self.measure, measure)


class EmpiricalMixtureScore(ScoreModel):
    """Score of the empirical measure on a fixed set of points."""

    def __init__(self, points, weights=None):
        self.measure = TargetMeasure.from_points(points, weights=weights)
        self.dimension = self.measure.dimension

    def __call__(self, x, t):
        return score_pt(self.measure, t, x)

    def is_exact_for(self, measure: TargetMeasure) -> bool:
        return _same_measure(self.measure, measure)


class PerturbedScore(ScoreModel):
    """Base score times ``scale``, plus ``bias``, plus a frozen random field.

    The field is a fixed finite cosine expansion drawn once from ``seed``, so
    the model is deterministic and smooth in x.  With the default parameters
    every branch is skipped and the output is bit-for-bit the base model's.
    """

    def __init__(
        self,
        base: ScoreModel,
        scale: float = 1.0,
        bias=None,
        field_amplitude: float = 0.0,
        n_features: int = 32,
        lengthscale: float = 1.0,
        seed: int = 0,
    ):
        self.base = base
        self.dimension = base.dimension
        self.scale = float(scale)
        if bias is None:
            self.bias = None
        else:
            b = np.broadcast_to(np.asarray(bias, dtype=float), (self.dimension,)).copy()
            self.bias = b if np.any(b != 0.0) else None
        self.field_amplitude = float(field_amplitude)
        if self.field_amplitude != 0.0:
            rng = np.random.default_rng(seed)
            self._freq = rng.standard_normal((n_features, self.dimension)) / lengthscale
            self._phase = rng.uniform(0.0, 2.0 * math.pi, size=n_features)
            self._mix = rng.standard_normal((self.dimension, n_features)) / math.sqrt(n_features)

    def _field(self, x: np.ndarray) -> np.ndarray:
        feats = np.cos(x @ self._freq.T + self._phase)
        return feats @ self._mix.T

    def __call__(self, x, t):
        out = self.base(x, t)
        if self.scale != 1.0:
            out = self.scale * out
        if self.bias is not None:
            out = out + self.bias
        if self.field_amplitude != 0.0:
            xb = np.asarray(x, dtype=float)
            single = xb.ndim == 1
            f = self._field(xb[None, :] if single else xb)
            out = out + self.field_amplitude * (f[0] if single else f)
        return out

    @property
    def is_unperturbed(self) -> bool:
        return self.scale == 1.0 and self.bias is None and self.field_amplitude == 0.0

    def is_exact_for(self, measure: TargetMeasure) -> bool:
        return self.is_unperturbed and self.base.is_exact_for(measure)


def epsilon_score(
    measure: TargetMeasure, model: ScoreModel, grid: TimeGrid, n_paths: int, rng
) -> Estimate:
    """Integrated squared score error sum_i h_i E|model - score|^2 at X_{t_i}.

    The sum runs over left endpoints of the grid steps, with the expectation
    under the exact process law.  Paths are shared across times so the
    standard error reflects path-to-path variation of the whole sum.  A model
    that is exact for the measure short-circuits to an exact zero.
    """
    if model.is_exact_for(measure):
        return exact(0.0)
    if grid.n_steps == 0:
        return exact(0.0)
    rng = as_generator(rng)
    ts = grid.t[:-1]
    ensemble = simulate_follmer(measure, ts, n_paths, rng)
    totals = np.zeros(n_paths)
    for j, t in enumerate(ts):
        x = ensemble.values[:, j, :]
        gap = model(x, float(t)) - score_pt(measure, float(t), x)
        totals += grid.h[j] * np.einsum("nd,nd->n", gap, gap)
    return from_samples(totals)


class GapResult:
    """Squared score error at one time, measured directly and via denoising.

    ``direct`` averages |model - score|^2.  ``indirect`` averages
    |model - W|^2 - |score - W|^2 with the conditional score target
    W = -(X_t - t xi) / (t(1-t)) on the same draws; the two agree in
    expectation because E[W | X_t] is the score.  ``residual`` is the
    per-sample difference indirect - direct, which has mean zero, and ``z``
    is its mean in standard errors.
    """

    def __init__(self, t: float, direct: Estimate, indirect: Estimate, residual: Estimate):
        self.t = t
        self.direct = direct
        self.indirect = indirect
        self.residual = residual
        self.z = residual.value / max(residual.stderr, 1e-12)

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "direct": self.direct.value,
            "direct_stderr": self.direct.stderr,
            "indirect": self.indirect.value,
            "indirect_stderr": self.indirect.stderr,
            "residual_z": self.z,
        }


def score_matching_gap(
    measure: TargetMeasure, model: ScoreModel, t: float, n_samples: int, rng
) -> GapResult:
    """Measure the squared score error at time t both ways on common draws."""
    rng = as_generator(rng)
    xi = sample_mu(measure, n_samples, rng)
    z = rng.standard_normal(xi.shape)
    sd = math.sqrt(t * (1.0 - t))
    x = t * xi + sd * z
    target = -z / sd
    s_true = score_pt(measure, t, x)
    s_model = model(x, t)
    direct = np.einsum("nd,nd->n", s_model - s_true, s_model - s_true)
    with_target = np.einsum("nd,nd->n", s_model - target, s_model - target)
    with_target -= np.einsum("nd,nd->n", s_true - target, s_true - target)
    return GapResult(
        t=t,
        direct=from_samples(direct),
        indirect=from_samples(with_target),
        residual=from_samples(with_target - direct),
    )
