"""Divergence estimators, closed-form error-bound calculators, and the
finite-geometry diagnostics (covering numbers, Gaussian widths) used by the
low-dimensional variants of the bounds.

Conventions.  KL arguments are ordered true-law-first everywhere: the bounds
control KL(exact time-t_N marginal | sampler law), and the nearest-neighbor
estimator is called in the same order.  Bound calculators always evaluate the
right-hand side arithmetic, even when a hypothesis fails; violations are
reported as warnings on the result instead of exceptions so sweep tables can
mark and exclude those rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .rng import as_generator


# ---------------------------------------------------------------------------
# divergences


@dataclass(frozen=True)
class DivergenceEstimate:
    kind: str
    value: float
    stderr: float = 0.0
    n: int = 0
    exact: bool = False
    unreliable: bool = False

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "stderr": self.stderr,
            "n": self.n,
            "exact": self.exact,
            "unreliable": self.unreliable,
        }


def kl_gaussian(mean_a, cov_a, mean_b, cov_b) -> float:
    """KL(N(mean_a, cov_a) | N(mean_b, cov_b)), covariances positive definite."""
    mean_a = np.atleast_1d(np.asarray(mean_a, dtype=float))
    mean_b = np.atleast_1d(np.asarray(mean_b, dtype=float))
    d = mean_a.size
    cov_a = np.asarray(cov_a, dtype=float).reshape(d, d)
    cov_b = np.asarray(cov_b, dtype=float).reshape(d, d)
    la = np.linalg.cholesky(cov_a)
    lb = np.linalg.cholesky(cov_b)
    # tr(cov_b^{-1} cov_a) through triangular solves against the factors
    half = np.linalg.solve(lb, la)
    trace = float(np.sum(half * half))
    diff = np.linalg.solve(lb, mean_b - mean_a)
    quad = float(diff @ diff)
    logdet = 2.0 * float(np.log(np.diag(lb)).sum() - np.log(np.diag(la)).sum())
    return 0.5 * (trace + quad - d + logdet)


def kl_knn(
    samples_p: np.ndarray,
    samples_q: np.ndarray,
    k: int = 5,
    n_boot: int = 200,
    rng=None,
) -> DivergenceEstimate:
    """Nearest-neighbor KL(P | Q) from samples, with a bootstrap stderr.

    Uses the k-th neighbor distance ratio estimator; the standard error
    resamples the per-point contributions, which ignores their weak mutual
    dependence and is meant for diagnostics, not certification.  Duplicate
    points produce zero distances and flag the estimate unreliable.
    """
    p = np.asarray(samples_p, dtype=float)
    q = np.asarray(samples_q, dtype=float)
    if p.ndim != 2 or q.ndim != 2 or p.shape[1] != q.shape[1]:
        raise ValueError("sample matrices must be 2-D with equal dimension")
    n, d = p.shape
    m = q.shape[0]
    if n < k + 1 or m < k:
        raise ValueError("too few samples for the requested neighbor order")
    rho = cKDTree(p).query(p, k=k + 1)[0][:, k]  # k+1: own point is its nearest
    nu = cKDTree(q).query(p, k=k)[0][:, k - 1]
    if np.any(rho == 0.0) or np.any(nu == 0.0):
        return DivergenceEstimate("knn_kl", math.nan, math.nan, n, unreliable=True)
    contrib = d * (np.log(nu) - np.log(rho))
    offset = math.log(m / (n - 1))
    value = float(contrib.mean()) + offset
    rng = as_generator(rng if rng is not None else 0)
    idx = rng.integers(0, n, size=(n_boot, n))
    stderr = float(contrib[idx].mean(axis=1).std(ddof=1))
    return DivergenceEstimate("knn_kl", value, stderr, n)


def energy_distance(samples_x: np.ndarray, samples_y: np.ndarray, max_rows: int = 2000) -> DivergenceEstimate:
    """Squared energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| with a crude stderr.

    Inputs larger than max_rows are thinned deterministically by even strides,
    keeping the estimate reproducible without an RNG.
    """
    x = np.asarray(samples_x, dtype=float)
    y = np.asarray(samples_y, dtype=float)

    def thin(a):
        if a.shape[0] <= max_rows:
            return a
        return a[np.linspace(0, a.shape[0] - 1, max_rows).astype(int)]

    x, y = thin(x), thin(y)
    dxy = cdist(x, y)
    dxx = cdist(x, x)
    dyy = cdist(y, y)
    row_x = 2.0 * dxy.mean(axis=1) - dxx.mean(axis=1)
    row_y = dyy.mean(axis=1)
    value = float(row_x.mean() - row_y.mean())
    stderr = math.sqrt(row_x.var(ddof=1) / row_x.size + row_y.var(ddof=1) / row_y.size)
    return DivergenceEstimate("energy_distance", value, stderr, x.shape[0])


def moment_gap(samples_x: np.ndarray, samples_y: np.ndarray) -> DivergenceEstimate:
    """Largest entrywise gap between the two samples' means and covariances."""
    x = np.asarray(samples_x, dtype=float)
    y = np.asarray(samples_y, dtype=float)
    mean_gap = np.abs(x.mean(axis=0) - y.mean(axis=0)).max()
    cov_gap = np.abs(np.cov(x.T, ddof=1) - np.cov(y.T, ddof=1)).max()
    se = math.sqrt(x.var(axis=0, ddof=1).max() / x.shape[0] + y.var(axis=0, ddof=1).max() / y.shape[0])
    return DivergenceEstimate("moment_gap", float(max(mean_gap, cov_gap)), se, x.shape[0])


# ---------------------------------------------------------------------------
# closed-form error bounds


@dataclass(frozen=True)
class BoundReport:
    name: str
    value: float
    certified: bool
    inputs: dict
    warnings: tuple = field(default_factory=tuple)

    @property
    def hypotheses_ok(self) -> bool:
        return not self.warnings

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "certified": self.certified,
            "inputs": dict(self.inputs),
            "warnings": list(self.warnings),
        }


def _stopping_log(t0: float, delta: float, warnings: list) -> float:
    if delta <= 0.0:
        warnings.append("delta must be positive for the early-stopping log term")
        return math.inf
    return math.log((1.0 - t0) / delta)


def _check_t0(t0: float, warnings: list) -> None:
    if not 0.0 < t0 <= 0.5:
        warnings.append("hypothesis t_0 <= 1/2 violated")


def bound_em(*, kappa: float, dimension: int, t0: float, delta: float, eps_sq: float, second_moment: float) -> BoundReport:
    """Discretization bound for the Euler-Maruyama scheme with early stopping."""
    warnings: list = []
    _check_t0(t0, warnings)
    log_term = _stopping_log(t0, delta, warnings)
    value = eps_sq + kappa * dimension * log_term + 2.0 * kappa * second_moment + (t0 / 2.0) * (dimension + second_moment)
    inputs = {"kappa": kappa, "dimension": dimension, "t0": t0, "delta": delta, "eps_sq": eps_sq, "second_moment": second_moment}
    return BoundReport("em", value, True, inputs, tuple(warnings))


def bound_fisher(*, t0: float, entropy: float, fisher: float, h_bar: float, eps_sq: float) -> BoundReport:
    """No-early-stopping bound t0*H + eps^2 + I*h_bar; needs H and I finite."""
    warnings: list = []
    _check_t0(t0, warnings)
    if not math.isfinite(entropy) or not math.isfinite(fisher):
        warnings.append("entropy or Fisher information infinite; bound vacuous")
        value = math.inf
    else:
        value = t0 * entropy + eps_sq + fisher * h_bar
    inputs = {"t0": t0, "entropy": entropy, "fisher": fisher, "h_bar": h_bar, "eps_sq": eps_sq}
    return BoundReport("fisher", value, True, inputs, tuple(warnings))


def bound_ada(*, kappa: float, dimension: int, t0: float, delta: float, eps_sq: float, second_moment: float) -> BoundReport:
    """Discretization bound for the posterior-mean scheme with early stopping."""
    warnings: list = []
    _check_t0(t0, warnings)
    log_term = _stopping_log(t0, delta, warnings)
    value = t0 * second_moment + kappa * dimension * log_term + 3.0 * kappa * second_moment + eps_sq
    inputs = {"kappa": kappa, "dimension": dimension, "t0": t0, "delta": delta, "eps_sq": eps_sq, "second_moment": second_moment}
    return BoundReport("ada", value, True, inputs, tuple(warnings))


def bound_ada_lowdim(
    *,
    kappa: float,
    t0: float,
    delta: float,
    eps_sq: float,
    second_moment: float,
    k_intrinsic: float,
    eps0: float,
    radius: float,
    variant: bool = False,
) -> BoundReport:
    """Dimension-free bound for the posterior-mean scheme.

    The universal constant is unknown and set to 1, so the report is not
    certified; only the shape (no ambient-dimension dependence, the
    L = k log(1/eps0) + log(R/delta) scaling) is testable.  With
    ``variant=True`` the kappa*second-moment term is replaced by
    kappa*L*log(1/t0), valid when every step satisfies h_i <= 6 kappa t_i.
    """
    warnings: list = []
    _check_t0(t0, warnings)
    if not 0.0 < eps0 <= math.exp(-1.0):
        warnings.append("eps0 must lie in (0, e^{-1}]")
    if k_intrinsic < 1.0:
        warnings.append("intrinsic dimension parameter k must be >= 1")
    if radius < 3.0:
        warnings.append("fourth-moment radius R must be >= 3")
    log_term = _stopping_log(t0, delta, warnings)
    big_l = k_intrinsic * math.log(1.0 / eps0) + (math.log(radius / delta) if delta > 0 else math.inf)
    if variant:
        moment_term = kappa * big_l * math.log(1.0 / t0)
    else:
        moment_term = 4.0 * kappa * second_moment
    value = t0 * second_moment + moment_term + kappa * big_l * log_term + eps_sq
    inputs = {
        "kappa": kappa,
        "t0": t0,
        "delta": delta,
        "eps_sq": eps_sq,
        "second_moment": second_moment,
        "k_intrinsic": k_intrinsic,
        "eps0": eps0,
        "radius": radius,
        "L": big_l,
        "variant": variant,
    }
    return BoundReport("ada_lowdim", value, False, inputs, tuple(warnings))


# ---------------------------------------------------------------------------
# finite-geometry diagnostics


def covering_number(points: np.ndarray, eps: float) -> int:
    """Cardinality of a greedily grown inclusion-maximal eps-net of the points.

    Starts from the first input point and repeatedly inserts the point
    farthest from the current net while that distance is >= eps (open balls
    of radius eps cover strictly closer points only); ties broken by lowest
    index.  Deterministic given input order.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if n == 0:
        return 0
    dist = np.full(n, np.inf)
    count = 0
    current = 0
    while True:
        count += 1
        dist = np.minimum(dist, np.linalg.norm(pts - pts[current], axis=1))
        farthest = int(dist.argmax())  # argmax takes the lowest maximizing index
        if dist[farthest] < eps:
            return count
        current = farthest


def gaussian_width(points: np.ndarray, eps0: float, n_mc: int = 2000, rng=None) -> tuple[float, float]:
    """Monte Carlo E[max over pairs within eps0 of |(x - y) . Z|], Z standard normal.

    Returns (estimate, stderr).  A set with no admissible pair has width 0.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    diffs = pts[:, None, :] - pts[None, :, :]
    norms = np.linalg.norm(diffs, axis=2)
    ii, jj = np.triu_indices(n, k=1)
    keep = norms[ii, jj] <= eps0
    if not np.any(keep):
        return 0.0, 0.0
    dvecs = diffs[ii[keep], jj[keep], :]
    rng = as_generator(rng if rng is not None else 0)
    z = rng.standard_normal((n_mc, pts.shape[1]))
    sup = np.abs(z @ dvecs.T).max(axis=1)
    return float(sup.mean()), float(sup.std(ddof=1) / math.sqrt(n_mc))


@dataclass(frozen=True)
class IntrinsicDimensionReport:
    """Feasibility check of the low-dimension hypotheses for given (k, eps0, delta)."""

    k_intrinsic: float
    eps0: float
    delta: float
    covering: int
    covering_ok: bool
    eps0_ok: bool
    width: float
    width_stderr: float
    width_ok: bool
    width_naive_ok: bool
    param_range_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.covering_ok and self.eps0_ok and self.width_ok and self.param_range_ok

    def as_dict(self) -> dict:
        return {
            "k_intrinsic": self.k_intrinsic,
            "eps0": self.eps0,
            "delta": self.delta,
            "covering": self.covering,
            "covering_ok": self.covering_ok,
            "eps0_ok": self.eps0_ok,
            "width": self.width,
            "width_stderr": self.width_stderr,
            "width_ok": self.width_ok,
            "width_naive_ok": self.width_naive_ok,
            "all_ok": self.all_ok,
        }


def check_intrinsic_dimension(
    points: np.ndarray, k_intrinsic: float, eps0: float, delta: float, n_mc: int = 2000, rng=None
) -> IntrinsicDimensionReport:
    """Evaluate the covering, eps0, and Gaussian-width conditions on a support set."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts.shape[1]
    cover = covering_number(pts, eps0)
    covering_ok = cover <= eps0 ** (-k_intrinsic)
    eps0_ok = eps0 <= math.sqrt(delta) * math.log(1.0 / eps0)
    width, width_se = gaussian_width(pts, eps0, n_mc=n_mc, rng=rng)
    width_ok = width <= math.sqrt(delta) * k_intrinsic * math.log(1.0 / eps0) + 4.0 * width_se
    width_naive_ok = width <= eps0 * math.sqrt(d) + 4.0 * width_se
    param_range_ok = (0.0 < eps0 <= math.exp(-1.0)) and k_intrinsic >= 1.0
    return IntrinsicDimensionReport(
        k_intrinsic, eps0, delta, cover, covering_ok, eps0_ok, width, width_se, width_ok, width_naive_ok, param_range_ok
    )
