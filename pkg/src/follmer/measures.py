"""Gaussian-mixture target measures and their exact conditional oracles.

A target is a finite mixture of Gaussian components with PSD covariances; the
zero covariance encodes a point mass, so finite point sets (empirical
measures) are the all-atoms special case.  Everything downstream consumes the
closed forms collected here:

* the time-t marginal of the process ``X_t = t*xi + bridge_t`` (``xi ~ mu``,
  an independent standard Brownian bridge): a mixture with component means
  ``t*m_k`` and covariances ``t^2*S_k + t(1-t)*I``, with log-density and score
  evaluated through per-component Cholesky factors and log-sum-exp;
* the posterior law of ``X_1`` given ``X_t = x``: component responsibilities
  tilted by the marginal, Gaussian conditionals within components;
* relative entropy and Fisher information against the standard Gaussian:
  closed form for a single nondegenerate Gaussian, flagged infinite for
  measures with a singular component, seeded Monte Carlo otherwise.

Points ``x`` may be a single vector ``(d,)`` or a batch ``(n, d)``; results
match the input shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .estimates import Estimate, exact, from_samples, infinite
from .rng import as_generator

_LOG_2PI = math.log(2.0 * math.pi)
# Eigenvalues below this (relative to the largest) count as singular.
_SINGULAR_EIG = 1e-12


@dataclass(frozen=True)
class TargetMeasure:
    """Finite Gaussian mixture ``sum_k weights[k] * N(means[k], covs[k])``."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        m = np.atleast_2d(np.asarray(self.means, dtype=float))
        c = np.asarray(self.covs, dtype=float)
        if c.ndim == 2:
            c = c[None, :, :]
        if w.ndim != 1 or m.ndim != 2 or c.ndim != 3:
            raise ValueError("weights, means, covs must have shapes (K,), (K,d), (K,d,d)")
        k, d = m.shape
        if w.shape != (k,) or c.shape != (k, d, d):
            raise ValueError("component counts of weights, means, covs disagree")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        for j in range(k):
            if not np.allclose(c[j], c[j].T, atol=1e-12):
                raise ValueError(f"covariance {j} is not symmetric")
            if c[j].any() and np.linalg.eigvalsh(c[j]).min() < -1e-10:
                raise ValueError(f"covariance {j} is not positive semidefinite")
        w = w / w.sum()
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", c)

    # -- structure ---------------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def _iso_variances(self) -> np.ndarray:
        """Per-component isotropic variance, NaN where the covariance is anisotropic."""
        k, d = self.n_components, self.dimension
        out = np.full(k, np.nan)
        eye = np.eye(d)
        for j in range(k):
            s = self.covs[j, 0, 0] if d else 0.0
            if np.array_equal(self.covs[j], s * eye):
                out[j] = s
        return out

    @property
    def is_finite_point_set(self) -> bool:
        return not self.covs.any()

    @property
    def has_degenerate_component(self) -> bool:
        """True when some component covariance is singular (atoms included)."""
        for j in range(self.n_components):
            c = self.covs[j]
            if not c.any():
                return True
            eigs = np.linalg.eigvalsh(c)
            if eigs.min() <= _SINGULAR_EIG * max(eigs.max(), 1.0):
                return True
        return False

    @property
    def is_smooth(self) -> bool:
        """True when the measure has a density: every component nondegenerate."""
        return not self.has_degenerate_component

    def support_points(self) -> np.ndarray:
        if not self.is_finite_point_set:
            raise ValueError("support_points is defined only for finite point sets")
        return self.means.copy()

    # -- moments -----------------------------------------------------------

    def mean_vector(self) -> np.ndarray:
        return self.weights @ self.means

    def second_moment(self) -> float:
        """E|X|^2 = sum_k w_k (|m_k|^2 + tr S_k)."""
        sq = np.einsum("kd,kd->k", self.means, self.means)
        tr = np.trace(self.covs, axis1=1, axis2=2)
        return float(self.weights @ (sq + tr))

    def covariance(self) -> np.ndarray:
        mbar = self.mean_vector()
        second = np.einsum("k,kij->ij", self.weights, self.covs)
        second += np.einsum("k,ki,kj->ij", self.weights, self.means, self.means)
        return second - np.outer(mbar, mbar)

    def fourth_central_moment(self) -> float:
        """E|X - E[X]|^4, exact via Gaussian fourth moments within components."""
        mbar = self.mean_vector()
        total = 0.0
        for j in range(self.n_components):
            v = self.means[j] - mbar
            s = self.covs[j]
            tr = float(np.trace(s))
            v2 = float(v @ v)
            total += self.weights[j] * (
                v2 * v2 + 2.0 * v2 * tr + 4.0 * float(v @ s @ v) + tr * tr + 2.0 * float(np.trace(s @ s))
            )
        return total

    def moment_radius(self) -> float:
        """Smallest admissible fourth-moment radius, floored at 3."""
        return max(3.0, self.fourth_central_moment() ** 0.25)

    # -- serialization -----------------------------------------------------

    def to_config(self) -> dict:
        comps = []
        for j in range(self.n_components):
            comp = {"weight": float(self.weights[j]), "mean": self.means[j].tolist()}
            if self.covs[j].any():
                comp["covariance"] = self.covs[j].tolist()
            comps.append(comp)
        kind = "FinitePointSet" if self.is_finite_point_set else "GaussianMixture"
        out = {"kind": kind, "dimension": self.dimension, "components": comps}
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_config(cls, spec: dict) -> "TargetMeasure":
        d = int(spec["dimension"])
        comps = spec["components"]
        weights = [c["weight"] for c in comps]
        means = [np.asarray(c["mean"], dtype=float).reshape(d) for c in comps]
        covs = []
        for c in comps:
            cov = c.get("covariance")
            covs.append(np.zeros((d, d)) if cov is None else np.asarray(cov, dtype=float).reshape(d, d))
        return cls(np.asarray(weights), np.asarray(means), np.asarray(covs), name=spec.get("name", ""))

    # -- constructors ------------------------------------------------------

    @classmethod
    def gaussian(cls, mean, cov, name: str = "") -> "TargetMeasure":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        d = mean.shape[0]
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 0:
            cov = float(cov) * np.eye(d)
        return cls(np.array([1.0]), mean[None, :], cov[None, :, :], name=name)

    @classmethod
    def standard_gaussian(cls, dimension: int, name: str = "") -> "TargetMeasure":
        return cls.gaussian(np.zeros(dimension), np.eye(dimension), name=name)

    @classmethod
    def point_mass(cls, point, name: str = "") -> "TargetMeasure":
        point = np.atleast_1d(np.asarray(point, dtype=float))
        d = point.shape[0]
        return cls(np.array([1.0]), point[None, :], np.zeros((1, d, d)), name=name)

    @classmethod
    def from_points(cls, points, weights=None, name: str = "") -> "TargetMeasure":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k, d = points.shape
        w = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=float)
        return cls(w, points, np.zeros((k, d, d)), name=name)

    @classmethod
    def mixture(cls, weights, means, covs, name: str = "") -> "TargetMeasure":
        return cls(np.asarray(weights, float), np.asarray(means, float), np.asarray(covs, float), name=name)


# ---------------------------------------------------------------------------
# time-t marginal internals


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 < t < 1.0:
        raise ValueError(f"t must lie strictly inside (0, 1), got {t}")
    return t


def _as_batch(x, d: int):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != d:
            raise ValueError(f"point has dimension {x.shape[0]}, measure has {d}")
        return x[None, :], True
    if x.ndim == 2 and x.shape[1] == d:
        return x, False
    raise ValueError(f"points must have shape (d,) or (n, d) with d={d}")


class _MarginalTerms:
    """Per-component quantities of the time-t marginal at a batch of points.

    ``sol[:, k, :]`` is ``C_k^{-1} (x - t m_k)`` with ``C_k = t^2 S_k + t(1-t) I``;
    ``log_joint[:, k]`` is ``log w_k + log N(x; t m_k, C_k)``.  Posterior
    conditionals reuse the same factors: gain ``G_k = t S_k C_k^{-1}``, mean
    ``m_k + G_k (x - t m_k)``, covariance ``S_k - t G_k S_k``.
    """

    def __init__(self, measure: TargetMeasure, t: float, x: np.ndarray):
        k, d = measure.n_components, measure.dimension
        n = x.shape[0]
        iso = measure._iso_variances()
        tt = t * t
        bridge_var = t * (1.0 - t)

        self.t = t
        self.sol = np.empty((n, k, d))
        self.log_joint = np.empty((n, k))
        self.cond_cov = np.empty((k, d, d))
        self.cond_cov_trace = np.empty(k)
        self._gain_iso = np.full(k, np.nan)
        self._gain = [None] * k
        diffs = x[:, None, :] - t * measure.means[None, :, :]

        logw = np.log(measure.weights)
        for j in range(k):
            diff = diffs[:, j, :]
            if not math.isnan(iso[j]):
                c = tt * iso[j] + bridge_var
                self.sol[:, j, :] = diff / c
                q = np.einsum("nd,nd->n", diff, diff) / c
                logdet = d * math.log(c)
                gain = t * iso[j] / c
                self._gain_iso[j] = gain
                cc = iso[j] * (1.0 - t * gain)
                self.cond_cov[j] = cc * np.eye(d)
                self.cond_cov_trace[j] = d * cc
            else:
                cmat = tt * measure.covs[j] + bridge_var * np.eye(d)
                low = np.linalg.cholesky(cmat)
                y = np.linalg.solve(low, diff.T)
                q = np.einsum("dn,dn->n", y, y)
                self.sol[:, j, :] = np.linalg.solve(low.T, y).T
                logdet = 2.0 * float(np.log(np.diag(low)).sum())
                cinv_s = np.linalg.solve(cmat, measure.covs[j])
                self._gain[j] = t * cinv_s.T
                self.cond_cov[j] = measure.covs[j] - tt * measure.covs[j] @ cinv_s
                self.cond_cov_trace[j] = float(np.trace(self.cond_cov[j]))
            self.log_joint[:, j] = logw[j] - 0.5 * (d * _LOG_2PI + logdet + q)

        self.diffs = diffs
        self.measure = measure

    def log_density(self) -> np.ndarray:
        return logsumexp(self.log_joint, axis=1)

    def responsibilities(self) -> np.ndarray:
        lj = self.log_joint - self.log_joint.max(axis=1, keepdims=True)
        r = np.exp(lj)
        return r / r.sum(axis=1, keepdims=True)

    def score(self) -> np.ndarray:
        r = self.responsibilities()
        return -np.einsum("nk,nkd->nd", r, self.sol)

    def component_posterior_means(self) -> np.ndarray:
        """(n, K, d) conditional means of X_1 within each component."""
        m = self.measure
        out = np.empty_like(self.sol)
        for j in range(m.n_components):
            if not math.isnan(self._gain_iso[j]):
                out[:, j, :] = m.means[j] + self._gain_iso[j] * self.diffs[:, j, :]
            else:
                out[:, j, :] = m.means[j] + self.diffs[:, j, :] @ self._gain[j].T
        return out

    def posterior_mean(self) -> np.ndarray:
        r = self.responsibilities()
        return np.einsum("nk,nkd->nd", r, self.component_posterior_means())

    def posterior_cov(self) -> np.ndarray:
        r = self.responsibilities()
        cm = self.component_posterior_means()
        mean = np.einsum("nk,nkd->nd", r, cm)
        second = np.einsum("nk,kde->nde", r, self.cond_cov)
        second += np.einsum("nk,nkd,nke->nde", r, cm, cm)
        return second - np.einsum("nd,ne->nde", mean, mean)

    def posterior_cov_trace(self) -> np.ndarray:
        r = self.responsibilities()
        cm = self.component_posterior_means()
        mean = np.einsum("nk,nkd->nd", r, cm)
        second = r @ self.cond_cov_trace
        second += np.einsum("nk,nkd,nkd->n", r, cm, cm)
        return second - np.einsum("nd,nd->n", mean, mean)


def _terms(measure: TargetMeasure, t: float, x) -> tuple[_MarginalTerms, bool]:
    xb, single = _as_batch(x, measure.dimension)
    return _MarginalTerms(measure, t, xb), single


# ---------------------------------------------------------------------------
# public oracles for the time-t marginal


def log_density_pt(measure: TargetMeasure, t: float, x) -> np.ndarray | float:
    """Log-density of X_t at x.  Rejects t outside (0, 1)."""
    t = _check_t(t)
    terms, single = _terms(measure, t, x)
    out = terms.log_density()
    return float(out[0]) if single else out


def score_pt(measure: TargetMeasure, t: float, x) -> np.ndarray:
    """Gradient of ``log_density_pt`` in x."""
    t = _check_t(t)
    terms, single = _terms(measure, t, x)
    out = terms.score()
    return out[0] if single else out


def posterior_mean(measure: TargetMeasure, t: float, x) -> np.ndarray:
    """E[X_1 | X_t = x]; equals x/t + (1-t) * score_pt(x) identically."""
    t = _check_t(t)
    terms, single = _terms(measure, t, x)
    out = terms.posterior_mean()
    return out[0] if single else out


def posterior_cov(measure: TargetMeasure, t: float, x) -> np.ndarray:
    """Cov[X_1 | X_t = x], shape (n, d, d) (or (d, d) for a single point)."""
    t = _check_t(t)
    terms, single = _terms(measure, t, x)
    out = terms.posterior_cov()
    return out[0] if single else out


def posterior_cov_trace(measure: TargetMeasure, t: float, x) -> np.ndarray | float:
    """trace Cov[X_1 | X_t = x]; nonnegative."""
    t = _check_t(t)
    terms, single = _terms(measure, t, x)
    out = terms.posterior_cov_trace()
    return float(out[0]) if single else out


def sample_mu(measure: TargetMeasure, n: int, rng) -> np.ndarray:
    """n i.i.d. draws from the target."""
    rng = as_generator(rng)
    k, d = measure.n_components, measure.dimension
    labels = rng.choice(k, size=n, p=measure.weights) if k > 1 else np.zeros(n, dtype=int)
    out = measure.means[labels].copy()
    iso = measure._iso_variances()
    normals = rng.standard_normal((n, d))
    for j in range(k):
        mask = labels == j
        if not mask.any():
            continue
        if not math.isnan(iso[j]):
            if iso[j] > 0:
                out[mask] += math.sqrt(iso[j]) * normals[mask]
        else:
            out[mask] += normals[mask] @ _psd_sqrt(measure.covs[j]).T
    return out


def sample_pt(measure: TargetMeasure, t: float, n: int, rng) -> np.ndarray:
    """n i.i.d. draws of X_t = t*xi + sqrt(t(1-t)) Z."""
    t = _check_t(t)
    rng = as_generator(rng)
    xi = sample_mu(measure, n, rng)
    return t * xi + math.sqrt(t * (1.0 - t)) * rng.standard_normal(xi.shape)


def sample_posterior(measure: TargetMeasure, t: float, x, n: int, rng) -> np.ndarray:
    """n draws from the law of X_1 given X_t = x (single point x)."""
    t = _check_t(t)
    rng = as_generator(rng)
    xb, single = _as_batch(x, measure.dimension)
    if not single:
        raise ValueError("sample_posterior conditions on a single point x of shape (d,)")
    terms = _MarginalTerms(measure, t, xb)
    resp = terms.responsibilities()[0]
    cond_means = terms.component_posterior_means()[0]
    k, d = measure.n_components, measure.dimension
    labels = rng.choice(k, size=n, p=resp) if k > 1 else np.zeros(n, dtype=int)
    out = cond_means[labels].copy()
    normals = rng.standard_normal((n, d))
    for j in range(k):
        mask = labels == j
        if not mask.any():
            continue
        cc = terms.cond_cov[j]
        if cc.any():
            out[mask] += normals[mask] @ _psd_sqrt(cc).T
    return out


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix, tolerant of tiny negative eigenvalues."""
    eigs, vecs = np.linalg.eigh(mat)
    return (vecs * np.sqrt(np.clip(eigs, 0.0, None))) @ vecs.T


# ---------------------------------------------------------------------------
# density and score of the target itself (t = 1 limit; smooth measures only)


def _terminal_terms(measure: TargetMeasure, x) -> tuple[np.ndarray, np.ndarray]:
    if not measure.is_smooth:
        raise ValueError("the target has a singular component and no density")
    xb, single = _as_batch(x, measure.dimension)
    k, d = measure.n_components, measure.dimension
    logw = np.log(measure.weights)
    log_joint = np.empty((xb.shape[0], k))
    sol = np.empty((xb.shape[0], k, d))
    for j in range(k):
        diff = xb - measure.means[j]
        low = np.linalg.cholesky(measure.covs[j])
        y = np.linalg.solve(low, diff.T)
        q = np.einsum("dn,dn->n", y, y)
        sol[:, j, :] = np.linalg.solve(low.T, y).T
        logdet = 2.0 * float(np.log(np.diag(low)).sum())
        log_joint[:, j] = logw[j] - 0.5 * (d * _LOG_2PI + logdet + q)
    return log_joint, sol


def log_density_mu(measure: TargetMeasure, x) -> np.ndarray | float:
    log_joint, _ = _terminal_terms(measure, x)
    out = logsumexp(log_joint, axis=1)
    return float(out[0]) if np.asarray(x).ndim == 1 else out


def score_mu(measure: TargetMeasure, x) -> np.ndarray:
    log_joint, sol = _terminal_terms(measure, x)
    shifted = log_joint - log_joint.max(axis=1, keepdims=True)
    r = np.exp(shifted)
    r /= r.sum(axis=1, keepdims=True)
    out = -np.einsum("nk,nkd->nd", r, sol)
    return out[0] if np.asarray(x).ndim == 1 else out


# ---------------------------------------------------------------------------
# divergences against the standard Gaussian


def entropy_vs_gaussian(measure: TargetMeasure, n_mc: int = 200_000, rng=None) -> Estimate:
    """Relative entropy H(mu | N(0, I_d)).

    Closed form for one nondegenerate Gaussian component; +infinity when any
    component is singular; Monte Carlo with standard error otherwise.
    """
    if measure.has_degenerate_component:
        return infinite()
    d = measure.dimension
    if measure.n_components == 1:
        cov = measure.covs[0]
        mean = measure.means[0]
        sign, logdet = np.linalg.slogdet(cov)
        value = 0.5 * (float(np.trace(cov)) - d - logdet + float(mean @ mean))
        return exact(value)
    rng = as_generator(rng if rng is not None else 0)
    x = sample_mu(measure, n_mc, rng)
    log_ratio = log_density_mu(measure, x) + 0.5 * np.einsum("nd,nd->n", x, x) + 0.5 * d * _LOG_2PI
    return from_samples(log_ratio)


def fisher_vs_gaussian(measure: TargetMeasure, n_mc: int = 200_000, rng=None) -> Estimate:
    """Relative Fisher information I(mu | N(0, I_d)) = E_mu |x + score_mu(x)|^2."""
    if measure.has_degenerate_component:
        return infinite()
    if measure.n_components == 1:
        cov = measure.covs[0]
        mean = measure.means[0]
        inv = np.linalg.inv(cov)
        value = float(mean @ mean) + float(np.trace(cov + inv - 2.0 * np.eye(measure.dimension)))
        return exact(value)
    rng = as_generator(rng if rng is not None else 0)
    x = sample_mu(measure, n_mc, rng)
    g = x + score_mu(measure, x)
    return from_samples(np.einsum("nd,nd->n", g, g))
