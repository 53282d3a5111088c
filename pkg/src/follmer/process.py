"""Exact simulation of the Follmer process and its drift functionals.

The process is simulated without discretization error as ``X_t = t*xi + B_t``
with ``xi ~ mu`` and ``B`` an independent standard Brownian bridge on [0, 1],
sampled sequentially at the requested times.  Its drift admits two closed
forms that must agree pointwise,

    v(t, x) = x/t + score_pt(t, x) = (posterior_mean(t, x) - x) / (1 - t),

and the module's checks exercise the identities that tie the drift to
divergences from the standard Gaussian:

* ``entropy_via_drift``:  H(mu | N(0,I)) = 1/2 * integral of E|v(t, X_t)|^2;
* ``debruijn_check``:     E|v(t, X_t)|^2 = I(law of sqrt(t) xi + sqrt(1-t) Z | N(0,I)) / t;
* ``expected_drift_squared`` against the conditional-covariance form
  (d - E[tr Cov[X_1|X_t]] / (1-t)) / (1-t) + E|X_1|^2 - d;
* ``martingale_residuals``: E[v_t - v_s | X_s] = 0 against a test battery;
* ``martingale_representation_check``: X_1 - E[X_1] is recovered by summing
  Cov[X_1|X_t]/(1-t) against reconstructed innovation increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimates import Estimate, exact, from_samples, infinite
from .measures import (
    TargetMeasure,
    posterior_cov,
    posterior_cov_trace,
    posterior_mean,
    sample_mu,
    sample_pt,
    score_pt,
)
from .rng import as_generator


class NumericalInconsistencyError(ArithmeticError):
    """Raised when the two closed forms of the drift disagree beyond tolerance."""


# relative tolerance for the two drift forms; they are algebraically equal,
# so disagreement beyond this indicates a broken oracle, not noise
_DRIFT_RTOL = 1e-6


@dataclass(frozen=True)
class FollmerEnsemble:
    """Paths of the process at a common set of times.

    ``values[p, j] = times[j] * terminal[p] + bridge[p, j]`` holds exactly by
    construction; ``bridge`` vanishes at times 0 and 1 when present.
    """

    times: np.ndarray
    values: np.ndarray
    terminal: np.ndarray
    bridge: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[2]


def simulate_follmer(measure: TargetMeasure, times, n_paths: int, rng) -> FollmerEnsemble:
    """Simulate n_paths trajectories at the given times in [0, 1], exactly."""
    rng = as_generator(rng)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a nonempty 1-D array")
    if np.any(times < 0.0) or np.any(times > 1.0):
        raise ValueError("times must lie in [0, 1]")
    if times.size > 1 and not np.all(np.diff(times) > 0.0):
        raise ValueError("times must be strictly increasing")
    if n_paths < 1:
        raise ValueError("n_paths must be positive")

    d = measure.dimension
    xi = sample_mu(measure, n_paths, rng)
    bridge = np.empty((n_paths, times.size, d))
    prev_t = 0.0
    prev = np.zeros((n_paths, d))
    for j, t in enumerate(times):
        if t >= 1.0:
            prev = np.zeros((n_paths, d))
        elif t == prev_t:
            pass
        else:
            # bridge transition: mean shrinks by (1-t)/(1-s), variance (t-s)(1-t)/(1-s)
            shrink = (1.0 - t) / (1.0 - prev_t)
            var = (t - prev_t) * shrink
            prev = shrink * prev + math.sqrt(var) * rng.standard_normal((n_paths, d))
        bridge[:, j, :] = prev
        prev_t = t
    values = times[None, :, None] * xi[:, None, :] + bridge
    return FollmerEnsemble(times=times, values=values, terminal=xi, bridge=bridge)


def drift_value(measure: TargetMeasure, t: float, x) -> np.ndarray:
    """Drift v(t, x) via the score form, cross-checked against the posterior form."""
    score = score_pt(measure, t, x)  # validates t before the division below
    score_form = np.asarray(x) / t + score
    posterior_form = (posterior_mean(measure, t, x) - x) / (1.0 - t)
    scale = np.maximum(1.0, np.abs(score_form))
    gap = np.abs(score_form - posterior_form) / scale
    worst = float(gap.max())
    if worst > _DRIFT_RTOL:
        raise NumericalInconsistencyError(
            f"drift forms disagree: max relative gap {worst:.3e} at t={t}"
        )
    return score_form


def drift_along_path(measure: TargetMeasure, ensemble: FollmerEnsemble) -> np.ndarray:
    """Drift evaluated at every (path, time); times must lie in (0, 1)."""
    times = ensemble.times
    if np.any(times <= 0.0) or np.any(times >= 1.0):
        raise ValueError("drift evaluation needs times strictly inside (0, 1)")
    out = np.empty_like(ensemble.values)
    for j, t in enumerate(times):
        out[:, j, :] = drift_value(measure, float(t), ensemble.values[:, j, :])
    return out


def expected_drift_squared(measure: TargetMeasure, t: float, n_paths: int, rng) -> Estimate:
    """Monte Carlo estimate of E|v(t, X_t)|^2 from exact marginal draws."""
    rng = as_generator(rng)
    x = sample_pt(measure, t, n_paths, rng)
    v = drift_value(measure, t, x)
    return from_samples(np.einsum("nd,nd->n", v, v))


def drift_squared_posterior_form(measure: TargetMeasure, t: float, n_paths: int, rng) -> Estimate:
    """The same second moment through conditional covariances.

    Estimates (d - E[tr Cov[X_1|X_t]]/(1-t)) / (1-t) + E|X_1|^2 - d with the
    expectation over independent exact draws of X_t.
    """
    rng = as_generator(rng)
    d = measure.dimension
    x = sample_pt(measure, t, n_paths, rng)
    gamma_trace = posterior_cov_trace(measure, t, x) / (1.0 - t)
    samples = (d - gamma_trace) / (1.0 - t) + measure.second_moment() - d
    return from_samples(samples)


def slepian_fisher(measure: TargetMeasure, t: float, n_paths: int, rng) -> Estimate:
    """Fisher information of the interpolation sqrt(t)*xi + sqrt(1-t)*Z vs N(0, I).

    Uses fresh draws (independent of any path ensemble) and the score of the
    time-t marginal through the scaling y -> sqrt(t) y.
    """
    rng = as_generator(rng)
    rt = math.sqrt(t)
    y = rt * sample_mu(measure, n_paths, rng) + math.sqrt(1.0 - t) * rng.standard_normal(
        (n_paths, measure.dimension)
    )
    g = y + rt * score_pt(measure, t, rt * y)
    return from_samples(np.einsum("nd,nd->n", g, g))


@dataclass(frozen=True)
class CheckRow:
    label: str
    lhs: Estimate
    rhs: Estimate
    z: float

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "lhs": self.lhs.value,
            "lhs_stderr": self.lhs.stderr,
            "rhs": self.rhs.value,
            "rhs_stderr": self.rhs.stderr,
            "z": self.z,
        }


def debruijn_check(measure: TargetMeasure, ts, n_paths: int, rng) -> list[CheckRow]:
    """Compare E|v_t|^2 with I(interpolation at t | N(0,I)) / t at each t.

    The two sides are estimated from independent draws; each row's z is the
    gap in combined standard errors.
    """
    rng = as_generator(rng)
    rows = []
    for t in np.atleast_1d(np.asarray(ts, dtype=float)):
        lhs = expected_drift_squared(measure, float(t), n_paths, rng)
        fisher = slepian_fisher(measure, float(t), n_paths, rng)
        rhs = Estimate(fisher.value / t, fisher.stderr / t, fisher.n)
        rows.append(CheckRow(label=f"t={t:g}", lhs=lhs, rhs=rhs, z=lhs.gap_z(rhs)))
    return rows


def entropy_quadrature_nodes(t_min: float = 1e-3, ratio: float = 1.35, t_tail: float = 1e-4) -> np.ndarray:
    """Quadrature nodes 0 and t_min, then geometric accumulation toward 1.

    Interior nodes follow t = 1 - (1 - t_min) * ratio^(-i) until the gap to 1
    drops below t_tail.
    """
    if not 0.0 < t_min < 1.0 or ratio <= 1.0 or not 0.0 < t_tail < 1.0 - t_min:
        raise ValueError("invalid quadrature parameters")
    nodes = [0.0, t_min]
    gap = 1.0 - t_min
    while gap > t_tail:
        gap /= ratio
        nodes.append(1.0 - gap)
    return np.asarray(nodes)


def entropy_via_drift(
    measure: TargetMeasure,
    n_paths: int,
    rng,
    nodes: np.ndarray | None = None,
) -> Estimate:
    """Estimate H(mu | N(0,I)) = 1/2 * integral_0^1 E|v_t|^2 dt by trapezoid.

    Targets with an atomic component have infinite relative entropy; the
    integrand then blows up like 1/(1-t) and the estimate is flagged infinite
    without attempting the diverging quadrature.  The standard error combines
    per-node Monte Carlo errors with a refinement estimate of the quadrature
    error (coarse-vs-fine trapezoid) and the unintegrated tail.
    """
    if measure.has_degenerate_component:
        return infinite()
    rng = as_generator(rng)
    if nodes is None:
        nodes = entropy_quadrature_nodes()
    nodes = np.asarray(nodes, dtype=float)

    values = np.empty(nodes.size)
    stderrs = np.zeros(nodes.size)
    mean_vec = measure.mean_vector()
    for j, t in enumerate(nodes):
        if t == 0.0:
            values[j] = float(mean_vec @ mean_vec)  # v at 0+ is the target mean
        else:
            est = expected_drift_squared(measure, float(t), n_paths, rng)
            values[j], stderrs[j] = est.value, est.stderr
    integral = float(np.trapezoid(values, nodes))
    coarse = float(np.trapezoid(values[::2], nodes[::2]))
    tail = values[-1] * (1.0 - nodes[-1])  # integrand is bounded near 1 for smooth targets

    # trapezoid weights for the standard error of the quadrature sum
    w = np.zeros(nodes.size)
    dx = np.diff(nodes)
    w[:-1] += dx / 2.0
    w[1:] += dx / 2.0
    mc_err = float(np.sqrt(np.sum((w * stderrs) ** 2)))
    quad_err = abs(integral - coarse) + tail
    return Estimate(0.5 * (integral + tail), 0.5 * (mc_err + quad_err), int(n_paths))


def partial_entropy_integrals(measure: TargetMeasure, n_paths: int, rng, t_maxes) -> np.ndarray:
    """Half-integrals of E|v_t|^2 up to increasing endpoints (divergence probe)."""
    rng = as_generator(rng)
    out = []
    for t_max in t_maxes:
        nodes = np.concatenate([[0.0], np.linspace(1e-3, t_max, 40)])
        vals = np.empty(nodes.size)
        mean_vec = measure.mean_vector()
        vals[0] = float(mean_vec @ mean_vec)
        for j, t in enumerate(nodes[1:], start=1):
            vals[j] = expected_drift_squared(measure, float(t), n_paths, rng).value
        out.append(0.5 * float(np.trapezoid(vals, nodes)))
    return np.asarray(out)


def tweedie_check(
    measure: TargetMeasure, t: float, n_samples: int, rng, n_bins: int = 10, min_count: int = 30
) -> list[CheckRow]:
    """Binned check that the conditional noise target regresses onto the score.

    With X_t = t xi + sqrt(t(1-t)) Z, the target W = -Z / sqrt(t(1-t))
    satisfies E[W | X_t] = score(t, X_t), so within any bin defined through
    X_t the mean of W - score(t, X_t) is exactly zero.  Bins are equal-count
    quantile slices of the first coordinate of X_t; each row reports the
    worst coordinate's z-score for one bin.
    """
    rng = as_generator(rng)
    xi = sample_mu(measure, n_samples, rng)
    z = rng.standard_normal(xi.shape)
    sd = math.sqrt(t * (1.0 - t))
    x = t * xi + sd * z
    diff = (-z / sd) - score_pt(measure, t, x)
    edges = np.quantile(x[:, 0], np.linspace(0.0, 1.0, n_bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    rows = []
    for j in range(n_bins):
        mask = (x[:, 0] >= edges[j]) & (x[:, 0] < edges[j + 1])
        count = int(mask.sum())
        if count < min_count:
            continue
        sub = diff[mask]
        means = sub.mean(axis=0)
        ses = sub.std(axis=0, ddof=1) / math.sqrt(count)
        zs = means / np.maximum(ses, 1e-12)
        worst = int(np.abs(zs).argmax())
        rows.append(
            CheckRow(
                label=f"bin[{j}],n={count}",
                lhs=Estimate(float(means[worst]), float(ses[worst]), count),
                rhs=exact(0.0),
                z=float(zs[worst]),
            )
        )
    return rows


_CLIP = 2.0


def _test_functions(x_s: np.ndarray, max_coords: int = 4):
    """Bounded-enough test battery evaluated on X_s: coordinates, squares, clipped exponentials."""
    d = x_s.shape[1]
    for j in range(min(d, max_coords)):
        yield f"coord[{j}]", x_s[:, j]
        yield f"coord_sq[{j}]", x_s[:, j] ** 2
        yield f"clipped_exp[{j}]", np.exp(np.clip(x_s[:, j], -_CLIP, _CLIP))


def martingale_residuals(
    measure: TargetMeasure, pairs, n_paths: int, rng, max_coords: int = 4
) -> list[CheckRow]:
    """Check E[(v_t - v_s) * g(X_s)] = 0 for s < t over a test-function battery.

    Necessary conditions only; each row reports the worst coordinate's z-score
    for one (pair, test function) combination, including the plain mean
    (g = 1).
    """
    rng = as_generator(rng)
    rows = []
    for s, t in pairs:
        if not 0.0 < s < t < 1.0:
            raise ValueError(f"need 0 < s < t < 1, got ({s}, {t})")
        ens = simulate_follmer(measure, np.array([s, t]), n_paths, rng)
        v_s = drift_value(measure, s, ens.values[:, 0, :])
        v_t = drift_value(measure, t, ens.values[:, 1, :])
        delta = v_t - v_s
        x_s = ens.values[:, 0, :]
        batteries = [("const", np.ones(n_paths))]
        batteries += list(_test_functions(x_s, max_coords))
        for name, g in batteries:
            prod = delta * g[:, None]
            means = prod.mean(axis=0)
            ses = prod.std(axis=0, ddof=1) / math.sqrt(n_paths)
            zs = means / np.maximum(ses, 1e-12)
            worst = int(np.abs(zs).argmax())
            lhs = Estimate(float(means[worst]), float(ses[worst]), n_paths)
            rows.append(
                CheckRow(
                    label=f"s={s:g},t={t:g},{name}",
                    lhs=lhs,
                    rhs=exact(0.0),
                    z=float(zs[worst]),
                )
            )
    return rows


def representation_gap(
    measure: TargetMeasure, ensemble: FollmerEnsemble, node_indices=None
) -> Estimate:
    """Mean-square gap in the conditional-covariance representation of X_1.

    Reconstructs innovation increments from the paths by removing the drift at
    left endpoints, weights them with Gamma_t = Cov[X_1|X_t]/(1-t), adds the
    exactly known contributions of the unresolved initial and terminal
    segments, and compares against X_1 - E[X_1].
    """
    times = ensemble.times
    if node_indices is not None:
        idx = np.asarray(node_indices, dtype=int)
        times = times[idx]
        values = ensemble.values[:, idx, :]
    else:
        values = ensemble.values
    if np.any(times <= 0.0) or np.any(times >= 1.0):
        raise ValueError("representation nodes must lie strictly inside (0, 1)")

    n, m, d = values.shape
    mean_vec = measure.mean_vector()
    recon = np.zeros((n, d))

    # initial segment [0, t_0]: Gamma_0 = Cov(X_1), innovation ~ X_{t_0} - E[X_1] t_0
    gamma0 = measure.covariance()
    dw = values[:, 0, :] - mean_vec * times[0]
    recon += dw @ gamma0.T

    for j in range(m):
        x_j = values[:, j, :]
        v_j = drift_value(measure, float(times[j]), x_j)
        gamma = posterior_cov(measure, float(times[j]), x_j) / (1.0 - times[j])
        if j + 1 < m:
            dw = values[:, j + 1, :] - x_j - v_j * (times[j + 1] - times[j])
        else:
            # terminal segment: the path ends at X_1 = xi exactly
            dw = ensemble.terminal - x_j - v_j * (1.0 - times[j])
        recon += np.einsum("nde,ne->nd", gamma, dw)

    gap = ensemble.terminal - mean_vec - recon
    return from_samples(np.einsum("nd,nd->n", gap, gap))


def martingale_representation_check(
    measure: TargetMeasure, times, n_paths: int, rng
) -> Estimate:
    """Simulate and measure the representation gap on the given interior grid."""
    rng = as_generator(rng)
    ensemble = simulate_follmer(measure, times, n_paths, rng)
    return representation_gap(measure, ensemble)
