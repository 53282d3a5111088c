"""Experiment drivers behind the CLI: the identity-verification suite, the
bound-vs-empirical sweep, and plain sampling runs.

Concurrency contract: jobs (verification checks, sweep rows) may run on a
thread pool, but every job derives its randomness from (seed, job index)
alone and results are assembled in job order, so reports are byte-identical
for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import build_grid, build_score, build_target, expand_sweep, validate_scheme
from .measures import TargetMeasure, entropy_vs_gaussian, fisher_vs_gaussian
from .metrics import (
    bound_ada,
    bound_ada_lowdim,
    bound_em,
    bound_fisher,
    covering_number,
    kl_gaussian,
    kl_knn,
)
from .process import (
    debruijn_check,
    drift_squared_posterior_form,
    entropy_via_drift,
    expected_drift_squared,
    martingale_residuals,
    representation_gap,
    simulate_follmer,
    tweedie_check,
)
from .rng import derive_seed, substream
from .samplers import (
    SamplerRun,
    ddpm_step_scores,
    exact_terminal_law,
    params_ada,
    params_expint,
    params_standard,
    propagate_gaussian_law,
    run_ada,
    run_ddpm,
    run_em,
)
from .scores import ExactScore, PerturbedScore, epsilon_score, score_matching_gap

# substream labels for experiment-level randomness (sampler runs own 0 and 1)
_VERIFY_STREAM = 11
_ROW_STREAM = 12
_SAMPLE_STREAM = 13


def execute_scheme(scheme: str, model, grid, n_paths: int, seed: int, keep_trajectory: bool = False) -> SamplerRun:
    """Dispatch a scheme name to its runner; ddpm variants own their init."""
    scheme = validate_scheme(scheme)
    if scheme == "em":
        return run_em(model, grid, n_paths, seed, keep_trajectory)
    if scheme == "ada":
        return run_ada(model, grid, n_paths, seed, keep_trajectory)
    factory = {"ddpm-standard": params_standard, "ddpm-expint": params_expint, "ddpm-ada": params_ada}[scheme]
    init = "ada" if scheme == "ddpm-ada" else "standard"
    params = factory(grid)
    return run_ddpm(params, ddpm_step_scores(model, grid), model.dimension, n_paths, seed, init, keep_trajectory)


# ---------------------------------------------------------------------------
# verification suite


@dataclass(frozen=True)
class CheckResult:
    """One pass/fail row: passes iff statistic <= threshold."""

    name: str
    statistic: float
    threshold: float
    detail: dict

    @property
    def passed(self) -> bool:
        return self.statistic <= self.threshold

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.as_dict() for c in self.checks]}


def _closed_form_entropy(measure: TargetMeasure):
    if measure.n_components == 1 and measure.is_smooth:
        return entropy_vs_gaussian(measure)
    return None


def _check_entropy(measure: TargetMeasure, n_paths: int, rng) -> list[CheckResult]:
    name = f"entropy/{measure.name or 'target'}"
    est = entropy_via_drift(measure, n_paths, rng)
    if measure.has_degenerate_component:
        stat = 0.0 if est.infinite else math.inf
        detail = {"flagged_infinite": est.infinite}
        return [CheckResult(f"{name}/infinite-flag", stat, 0.5, detail)]
    closed = _closed_form_entropy(measure)
    if closed is not None:
        stat = abs(est.value - closed.value)
        detail = {"estimate": est.value, "stderr": est.stderr, "closed_form": closed.value}
        return [CheckResult(f"{name}/closed-form", stat, 0.02, detail)]
    ref = entropy_vs_gaussian(measure, n_mc=200_000, rng=rng)
    z = est.gap_z(ref)
    detail = {"estimate": est.value, "stderr": est.stderr, "mc_reference": ref.value, "mc_stderr": ref.stderr}
    return [CheckResult(f"{name}/mc-reference", abs(z), 4.0, detail)]


def _check_debruijn(measure: TargetMeasure, n_paths: int, rng) -> list[CheckResult]:
    ts = np.linspace(0.05, 0.95, 10)
    rows = debruijn_check(measure, ts, n_paths, rng)
    worst = max(abs(r.z) for r in rows)
    detail = {"rows": [r.as_dict() for r in rows]}
    return [CheckResult(f"debruijn/{measure.name or 'target'}", worst, 3.0, detail)]


def _check_v2(measure: TargetMeasure, n_paths: int, rng) -> list[CheckResult]:
    out = []
    for t in (0.1, 0.5, 0.9):
        lhs = expected_drift_squared(measure, t, n_paths, rng)
        rhs = drift_squared_posterior_form(measure, t, n_paths, rng)
        z = abs(lhs.gap_z(rhs))
        detail = {"t": t, "direct": lhs.value, "direct_stderr": lhs.stderr, "conditional_form": rhs.value, "conditional_stderr": rhs.stderr}
        out.append(CheckResult(f"drift-second-moment/{measure.name or 'target'}/t={t:g}", z, 3.0, detail))
    return out


def _check_tweedie(measure: TargetMeasure, n_paths: int, rng) -> list[CheckResult]:
    rows = tweedie_check(measure, 0.5, n_paths, rng)
    worst = max(abs(r.z) for r in rows)
    detail = {"rows": [r.as_dict() for r in rows]}
    return [CheckResult(f"tweedie/{measure.name or 'target'}", worst, 4.0, detail)]


def _check_martingale(measure: TargetMeasure, n_paths: int, rng) -> list[CheckResult]:
    rows = martingale_residuals(measure, [(0.1, 0.5), (0.3, 0.7)], n_paths, rng)
    worst = max(abs(r.z) for r in rows)
    detail = {"rows": [r.as_dict() for r in rows]}
    return [CheckResult(f"martingale/{measure.name or 'target'}", worst, 4.0, detail)]


def _check_representation(measure: TargetMeasure, n_paths: int, rng) -> list[CheckResult]:
    n = min(n_paths, 10_000)
    finest = np.arange(1, 128) / 128.0
    ensemble = simulate_follmer(measure, finest, n, rng)
    gaps, ses = [], []
    for stride in (16, 8, 4, 2, 1):
        est = representation_gap(measure, ensemble, node_indices=np.arange(0, finest.size, stride))
        gaps.append(est.value)
        ses.append(est.stderr)
    detail = {"gaps": gaps, "stderrs": ses, "strides": [16, 8, 4, 2, 1]}
    name = f"representation/{measure.name or 'target'}"
    scale = max(measure.second_moment(), 1.0)
    if gaps[0] <= 1e-9 * scale:
        # constant integrand: the sum telescopes and every node set is exact
        return [CheckResult(name, 0.0, 2.0, detail)]
    worst_rise = max(
        (gaps[k + 1] - gaps[k]) / max(math.hypot(ses[k + 1], ses[k]), 1e-12) for k in range(len(gaps) - 1)
    )
    shrank = gaps[-1] <= 0.5 * gaps[0] + 4.0 * math.hypot(ses[0], ses[-1])
    stat = worst_rise if shrank else math.inf
    return [CheckResult(name, stat, 2.0, detail)]


def _score_match_models(target: TargetMeasure, specs) -> list:
    if specs is not None:
        return [build_score(s, target) for s in specs]
    return [
        ExactScore(target),
        PerturbedScore(ExactScore(target), bias=0.5),
        PerturbedScore(ExactScore(target), scale=1.3, field_amplitude=0.5, seed=11),
    ]


def _check_score_match(measure: TargetMeasure, specs, n_paths: int, rng) -> list[CheckResult]:
    out = []
    for j, model in enumerate(_score_match_models(measure, specs)):
        res = score_matching_gap(measure, model, 0.5, n_paths, rng)
        detail = res.as_dict()
        out.append(CheckResult(f"score-match/{measure.name or 'target'}/model{j}", abs(res.z), 4.0, detail))
    return out


def run_verify(config: dict, seed: int = 0, threads: int = 1) -> VerifyReport:
    """Run the identity suite described by config['verify'] and collect rows."""
    block = config.get("verify", {})
    n_paths = int(block.get("n_paths", 100_000))
    target_specs = block.get("targets")
    if target_specs is None:
        from .config import default_verify_config

        target_specs = default_verify_config()["verify"]["targets"]
    targets = [build_target(s) for s in target_specs]
    wanted = block.get("checks")
    score_specs = block.get("score_models")

    smooth = [m for m in targets if m.is_smooth]
    singular = [m for m in targets if not m.is_smooth]
    match_targets = ([smooth[0]] if smooth else []) + ([singular[0]] if singular else [])
    match_targets = match_targets or targets[:2]
    rep_candidates = [m for m in smooth if m.n_components > 1 and m.dimension == 1] or smooth or targets
    rep_target = rep_candidates[0]

    jobs = []
    for m in targets:
        jobs.append(("entropy", _check_entropy, m, n_paths))
        jobs.append(("debruijn", _check_debruijn, m, n_paths))
        jobs.append(("v2", _check_v2, m, n_paths))
        jobs.append(("tweedie", _check_tweedie, m, n_paths))
        jobs.append(("martingale", _check_martingale, m, n_paths))
    jobs.append(("representation", _check_representation, rep_target, n_paths))
    for m in match_targets:
        jobs.append(("score-match", lambda mm, n, rng: _check_score_match(mm, score_specs, n, rng), m, n_paths))

    if wanted is not None:
        jobs = [j for j in jobs if j[0] in set(wanted)]

    def run_job(item):
        index, (label, fn, measure, n) = item
        return fn(measure, n, substream(seed, _VERIFY_STREAM, index))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run_job, enumerate(jobs)))
    checks = tuple(c for group in results for c in group)
    return VerifyReport(checks)


# ---------------------------------------------------------------------------
# bounds sweep


@dataclass(frozen=True)
class BoundsReport:
    rows: tuple
    columns: tuple

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.rows if not r["excluded"])

    def as_dict(self) -> dict:
        return {"passed": self.passed, "rows": [dict(r) for r in self.rows]}


_BOUND_COLUMNS = (
    "index",
    "scheme",
    "target",
    "dimension",
    "n_steps",
    "t0",
    "delta",
    "horizon",
    "kappa_step",
    "kappa_tau",
    "kappa_relative",
    "second_moment",
    "eps_sq",
    "eps_stderr",
    "empirical_kind",
    "empirical",
    "empirical_stderr",
    "bound_em",
    "bound_ada",
    "bound_fisher",
    "bound_lowdim",
    "hypotheses_ok",
    "excluded",
    "passed",
    "warnings",
)


def _empirical_divergence(measure, model, grid, scheme, n_paths, row_seed):
    """KL(exact t_N marginal | sampler law): closed form when affine, else kNN."""
    t_end = grid.t_end
    if measure.n_components == 1 and model.is_exact_for(measure) and (measure.is_smooth or t_end < 1.0):
        if scheme in ("em", "ada"):
            sampled = propagate_gaussian_law(measure, grid, scheme)
        else:
            factory = {"ddpm-standard": params_standard, "ddpm-expint": params_expint, "ddpm-ada": params_ada}[scheme]
            init = "ada" if scheme == "ddpm-ada" else "standard"
            sampled = propagate_gaussian_law(measure, grid, "ddpm", params=factory(grid), init=init)
        true_mean, true_cov = exact_terminal_law(measure, t_end)
        value = kl_gaussian(true_mean, true_cov, *sampled)
        return {"kind": "exact_gaussian", "value": value, "stderr": 0.0, "unreliable": False}
    truth = simulate_follmer(measure, np.array([t_end]), n_paths, substream(row_seed, 4)).values[:, 0, :]
    run = execute_scheme(scheme, model, grid, n_paths, row_seed)
    est = kl_knn(truth, run.terminal, rng=substream(row_seed, 5))
    return {"kind": "knn", "value": est.value, "stderr": est.stderr, "unreliable": est.unreliable}


def _lowdim_params(measure: TargetMeasure, config: dict, delta: float) -> dict | None:
    if not measure.is_finite_point_set:
        return None
    block = config.get("lowdim", {})
    eps0 = float(block.get("eps0", math.exp(-1.0)))
    support = measure.support_points()
    if "k" in block:
        k_intrinsic = float(block["k"])
    else:
        cover = covering_number(support, eps0)
        k_intrinsic = max(1.0, math.log(max(cover, 2)) / math.log(1.0 / eps0))
    return {
        "k_intrinsic": k_intrinsic,
        "eps0": eps0,
        "radius": measure.moment_radius(),
        "variant": bool(block.get("variant", False)),
    }


def _bounds_row(run_config: dict, index: int, seed: int) -> dict:
    measure = build_target(run_config.get("target", {"builtin": "standard_gaussian", "dimension": 1}))
    grid = build_grid(run_config.get("grid", {"constructor": "uniform_tau", "t0": 0.01, "delta": 0.01, "n_steps": 16}))
    model = build_score(run_config.get("score"), measure)
    scheme = validate_scheme(run_config.get("scheme", "em"))
    n_paths = int(run_config.get("n_paths", 4000))
    requested = tuple(run_config.get("bounds", ("em", "ada")))
    row_seed = derive_seed(seed, _ROW_STREAM, index)

    eps = epsilon_score(measure, model, grid, int(run_config.get("eps_paths", 4000)), substream(row_seed, 3))
    emp = _empirical_divergence(measure, model, grid, scheme, n_paths, row_seed)

    second = measure.second_moment()
    kappa = grid.kappa_step
    row = {
        "index": index,
        "scheme": scheme,
        "target": measure.name or "target",
        "dimension": measure.dimension,
        "n_steps": grid.n_steps,
        "t0": grid.t0,
        "delta": grid.delta,
        "horizon": grid.horizon,
        "kappa_step": kappa,
        "kappa_tau": grid.kappa_tau,
        "kappa_relative": grid.kappa_relative,
        "second_moment": second,
        "eps_sq": eps.value,
        "eps_stderr": eps.stderr,
        "empirical_kind": emp["kind"],
        "empirical": emp["value"],
        "empirical_stderr": emp["stderr"],
        "bound_em": "",
        "bound_ada": "",
        "bound_fisher": "",
        "bound_lowdim": "",
    }

    reports = {}
    if "em" in requested:
        reports["em"] = bound_em(kappa=kappa, dimension=measure.dimension, t0=grid.t0, delta=grid.delta, eps_sq=eps.value, second_moment=second)
        row["bound_em"] = reports["em"].value
    if "ada" in requested:
        reports["ada"] = bound_ada(kappa=kappa, dimension=measure.dimension, t0=grid.t0, delta=grid.delta, eps_sq=eps.value, second_moment=second)
        row["bound_ada"] = reports["ada"].value
    if "fisher" in requested:
        if measure.n_components == 1 and measure.is_smooth:
            entropy, fisher = entropy_vs_gaussian(measure).value, fisher_vs_gaussian(measure).value
        elif measure.is_smooth:
            entropy = entropy_vs_gaussian(measure, rng=substream(row_seed, 6)).value
            fisher = fisher_vs_gaussian(measure, rng=substream(row_seed, 7)).value
        else:
            entropy = fisher = math.inf
        fisher_report = bound_fisher(t0=grid.t0, entropy=entropy, fisher=fisher, h_bar=grid.h_max, eps_sq=eps.value)
        extra = ()
        if grid.t_end < 1.0:
            extra += ("terminal time below 1, so the continuous-time comparison does not apply",)
        if extra:
            fisher_report = type(fisher_report)(
                fisher_report.name,
                fisher_report.value,
                fisher_report.certified,
                fisher_report.inputs,
                fisher_report.warnings + extra,
            )
        reports["fisher"] = fisher_report
        row["bound_fisher"] = fisher_report.value
    if "lowdim" in requested:
        params = _lowdim_params(measure, run_config, grid.delta)
        if params is not None:
            reports["lowdim"] = bound_ada_lowdim(kappa=kappa, t0=grid.t0, delta=grid.delta, eps_sq=eps.value, second_moment=second, **params)
            row["bound_lowdim"] = reports["lowdim"].value

    hypotheses_ok = all(not rep.warnings for rep in reports.values())
    excluded = (not hypotheses_ok) or emp["unreliable"] or not math.isfinite(emp["value"])
    slack = 4.0 * (emp["stderr"] if math.isfinite(emp["stderr"]) else 0.0)
    certified = [rep for rep in reports.values() if rep.certified and not rep.warnings]
    passed = all(emp["value"] <= rep.value + slack for rep in certified) if not excluded else True
    row["hypotheses_ok"] = hypotheses_ok
    row["excluded"] = excluded
    row["passed"] = passed
    row["warnings"] = sorted({w for rep in reports.values() for w in rep.warnings})
    if "sweep_point" in run_config:
        row["sweep_point"] = run_config["sweep_point"]
    return row


def run_bounds(config: dict, seed: int = 0, threads: int = 1) -> BoundsReport:
    runs = expand_sweep(config)

    def job(item):
        index, run_config = item
        return _bounds_row(run_config, index, seed)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(job, enumerate(runs)))
    return BoundsReport(tuple(rows), _BOUND_COLUMNS)


# ---------------------------------------------------------------------------
# sampling runs


@dataclass(frozen=True)
class SampleResult:
    scheme: str
    times: np.ndarray
    terminal: np.ndarray
    trajectory: np.ndarray | None

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "times": self.times.tolist(),
            "n_paths": int(self.terminal.shape[0]),
            "dimension": int(self.terminal.shape[1]),
            "kept_trajectory": self.trajectory is not None,
        }


def run_sample(config: dict, seed: int = 0, threads: int = 1) -> SampleResult:
    measure = build_target(config.get("target", {"builtin": "standard_gaussian", "dimension": 1}))
    grid = build_grid(config.get("grid", {"constructor": "uniform_tau", "t0": 0.01, "delta": 0.01, "n_steps": 16}))
    model = build_score(config.get("score"), measure)
    scheme = validate_scheme(config.get("scheme", "em"))
    n_paths = int(config.get("n_paths", 1000))
    keep = bool(config.get("keep_trajectories", False))
    run_seed = derive_seed(seed, _SAMPLE_STREAM)
    run = execute_scheme(scheme, model, grid, n_paths, run_seed, keep)
    return SampleResult(run.scheme, run.times, run.terminal, run.trajectory)
