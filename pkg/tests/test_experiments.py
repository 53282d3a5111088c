"""Driver-level behavior: verify suite, bounds sweeps, sampling runs.

Statistical content of the individual checks is covered in the module tests;
here the focus is orchestration: config intake, job seeding, row assembly,
and independence from the worker count.
"""

import math

import numpy as np
import numpy.testing as npt
import pytest

from follmer.config import ConfigError
from follmer.experiments import (
    CheckResult,
    execute_scheme,
    run_bounds,
    run_sample,
    run_verify,
)
from follmer.grids import grid_uniform_tau
from follmer.measures import TargetMeasure
from follmer.samplers import run_em
from follmer.scores import ExactScore

ATOM = {
    "kind": "FinitePointSet",
    "name": "atom_d1",
    "dimension": 1,
    "components": [{"weight": 1.0, "mean": [0.8]}],
}


class TestExecuteScheme:
    def test_em_dispatch_matches_runner(self):
        measure = TargetMeasure.gaussian([1.0], [[1.0]])
        model = ExactScore(measure)
        grid = grid_uniform_tau(0.01, 0.01, 8)
        via_dispatch = execute_scheme("em", model, grid, 64, seed=7)
        direct = run_em(model, grid, 64, seed=7)
        npt.assert_array_equal(via_dispatch.terminal, direct.terminal)

    def test_ddpm_variants_have_labels(self):
        measure = TargetMeasure.standard_gaussian(2)
        model = ExactScore(measure)
        grid = grid_uniform_tau(0.01, 0.01, 4)
        for scheme in ("ddpm-standard", "ddpm-expint", "ddpm-ada"):
            run = execute_scheme(scheme, model, grid, 8, seed=1)
            assert run.scheme == scheme
            assert run.terminal.shape == (8, 2)

    def test_unknown_scheme(self):
        measure = TargetMeasure.standard_gaussian(1)
        grid = grid_uniform_tau(0.01, 0.01, 4)
        with pytest.raises(ConfigError):
            execute_scheme("heun", ExactScore(measure), grid, 8, seed=0)


class TestCheckResult:
    def test_pass_is_threshold_inclusive(self):
        assert CheckResult("a", 2.0, 2.0, {}).passed
        assert not CheckResult("a", 2.0001, 2.0, {}).passed
        assert not CheckResult("a", math.inf, 2.0, {}).passed

    def test_as_dict(self):
        d = CheckResult("entropy/x", 0.5, 2.0, {"k": 1}).as_dict()
        assert d == {"name": "entropy/x", "statistic": 0.5, "threshold": 2.0, "passed": True, "detail": {"k": 1}}


class TestRunVerify:
    CFG = {
        "verify": {
            "n_paths": 4000,
            "targets": [{"builtin": "shifted_gaussian", "dimension": 1}],
            "checks": ["entropy", "tweedie"],
        }
    }

    def test_check_filter_controls_rows(self):
        report = run_verify(self.CFG, seed=3)
        families = {c.name.split("/")[0] for c in report.checks}
        assert families == {"entropy", "tweedie"}
        assert report.passed

    def test_full_family_set_for_one_target(self):
        cfg = {"verify": {"n_paths": 2000, "targets": [{"builtin": "shifted_gaussian", "dimension": 1}]}}
        report = run_verify(cfg, seed=3)
        families = {c.name.split("/")[0] for c in report.checks}
        assert families == {
            "entropy",
            "debruijn",
            "drift-second-moment",
            "tweedie",
            "martingale",
            "representation",
            "score-match",
        }

    def test_same_seed_reproduces_statistics(self):
        a = run_verify(self.CFG, seed=9)
        b = run_verify(self.CFG, seed=9)
        assert [c.statistic for c in a.checks] == [c.statistic for c in b.checks]

    def test_thread_count_does_not_change_report(self):
        a = run_verify(self.CFG, seed=5, threads=1)
        b = run_verify(self.CFG, seed=5, threads=4)
        assert a.as_dict() == b.as_dict()

    def test_score_model_override(self):
        cfg = {
            "verify": {
                "n_paths": 2000,
                "targets": [{"builtin": "shifted_gaussian", "dimension": 1}],
                "checks": ["score-match"],
                "score_models": [{"kind": "exact"}],
            }
        }
        report = run_verify(cfg, seed=2)
        assert len(report.checks) == 1
        assert report.checks[0].statistic <= 4.0

    def test_report_dict_shape(self):
        report = run_verify(self.CFG, seed=1)
        d = report.as_dict()
        assert set(d) == {"passed", "checks"}
        assert all(set(c) == {"name", "statistic", "threshold", "passed", "detail"} for c in d["checks"])


class TestRunBounds:
    ATOM_CFG = {
        "target": ATOM,
        "grid": {"constructor": "uniform_tau", "t0": 0.01, "delta": 0.01, "n_steps": 8},
        "scheme": "em",
        "n_paths": 2000,
        "bounds": ["em", "ada"],
    }

    def test_single_row_columns(self):
        report = run_bounds(self.ATOM_CFG, seed=4)
        assert len(report.rows) == 1
        row = report.rows[0]
        assert set(report.columns) <= set(row)
        assert row["empirical_kind"] == "exact_gaussian"
        assert row["empirical_stderr"] == 0.0
        assert not row["excluded"]
        assert row["passed"]
        assert row["empirical"] <= row["bound_em"]
        assert row["empirical"] <= row["bound_ada"]
        # bounds not requested stay blank
        assert row["bound_fisher"] == ""
        assert row["bound_lowdim"] == ""

    def test_hypothesis_violation_marks_row_excluded(self):
        cfg = dict(self.ATOM_CFG, grid={"constructor": "uniform_t", "t0": 0.6, "delta": 0.01, "n_steps": 4})
        row = run_bounds(cfg, seed=4).rows[0]
        assert not row["hypotheses_ok"]
        assert row["excluded"]
        assert row["passed"]  # excluded rows do not fail the aggregate
        assert any("t_0" in w for w in row["warnings"])
        assert run_bounds(cfg, seed=4).passed

    def test_sweep_produces_ordered_rows(self):
        cfg = dict(self.ATOM_CFG)
        cfg["sweep"] = {"axes": {"grid.n_steps": [4, 8], "scheme": ["em", "ada"]}}
        report = run_bounds(cfg, seed=4)
        assert [r["index"] for r in report.rows] == [0, 1, 2, 3]
        assert [(r["n_steps"], r["scheme"]) for r in report.rows] == [
            (4, "em"),
            (4, "ada"),
            (8, "em"),
            (8, "ada"),
        ]
        assert all(r["sweep_point"]["scheme"] == r["scheme"] for r in report.rows)

    def test_thread_count_does_not_change_rows(self):
        cfg = dict(self.ATOM_CFG)
        cfg["sweep"] = {"axes": {"scheme": ["em", "ada", "ddpm-standard"]}}
        a = run_bounds(cfg, seed=6, threads=1)
        b = run_bounds(cfg, seed=6, threads=3)
        assert a.as_dict() == b.as_dict()

    def test_knn_path_for_multicomponent_target(self):
        cfg = {
            "target": {"builtin": "two_point", "dimension": 2},
            "grid": {"constructor": "uniform_tau", "t0": 0.01, "delta": 0.05, "n_steps": 16},
            "scheme": "ada",
            "n_paths": 3000,
            "bounds": ["em", "ada"],
        }
        row = run_bounds(cfg, seed=11).rows[0]
        assert row["empirical_kind"] == "knn"
        assert row["empirical_stderr"] > 0.0
        assert math.isfinite(row["empirical"])

    def test_lowdim_only_for_point_sets(self):
        cfg = {
            "target": {"builtin": "two_point", "dimension": 4},
            "grid": {"constructor": "uniform_tau", "t0": 0.01, "delta": 0.05, "n_steps": 8},
            "scheme": "ada",
            "n_paths": 1000,
            "bounds": ["em", "ada", "lowdim"],
        }
        row = run_bounds(cfg, seed=8).rows[0]
        assert isinstance(row["bound_lowdim"], float) and math.isfinite(row["bound_lowdim"])
        smooth = dict(cfg, target={"builtin": "shifted_gaussian", "dimension": 4})
        assert run_bounds(smooth, seed=8).rows[0]["bound_lowdim"] == ""

    def test_fisher_bound_on_smooth_target(self):
        cfg = {
            "target": {"builtin": "shifted_gaussian", "dimension": 1},
            "grid": {"constructor": "uniform_t", "t0": 1.0 / 11.0, "delta": 0.0, "n_steps": 10},
            "scheme": "em",
            "n_paths": 1000,
            "bounds": ["fisher"],
        }
        row = run_bounds(cfg, seed=2).rows[0]
        # closed forms: relative entropy 0.5 and relative fisher information 1,
        # with the widest step h = 1/11 on this equispaced grid
        expected = (1.0 / 11.0) * 0.5 + 1.0 * (1.0 / 11.0) + row["eps_sq"]
        npt.assert_allclose(row["bound_fisher"], expected, rtol=1e-12)
        assert not row["excluded"]

    def test_fisher_bound_flags_early_stop(self):
        cfg = {
            "target": {"builtin": "shifted_gaussian", "dimension": 1},
            "grid": {"constructor": "uniform_t", "t0": 0.05, "delta": 0.1, "n_steps": 10},
            "scheme": "em",
            "n_paths": 1000,
            "bounds": ["fisher"],
        }
        row = run_bounds(cfg, seed=2).rows[0]
        assert row["excluded"]
        assert any("terminal time below 1" in w for w in row["warnings"])


class TestRunSample:
    def test_default_config_runs(self):
        result = run_sample({}, seed=0)
        assert result.scheme == "em"
        assert result.terminal.shape == (1000, 1)
        assert result.trajectory is None

    def test_as_dict(self):
        result = run_sample({"n_paths": 16, "keep_trajectories": True}, seed=0)
        d = result.as_dict()
        assert d["n_paths"] == 16
        assert d["dimension"] == 1
        assert d["kept_trajectory"]
        assert result.trajectory.shape[0] == 16

    def test_same_seed_bitwise(self):
        cfg = {"target": {"builtin": "mixture3", "dimension": 2}, "scheme": "ada", "n_paths": 128}
        a = run_sample(cfg, seed=21)
        b = run_sample(cfg, seed=21)
        npt.assert_array_equal(a.terminal, b.terminal)
        c = run_sample(cfg, seed=22)
        assert not np.array_equal(a.terminal, c.terminal)

    def test_zero_paths(self):
        result = run_sample({"n_paths": 0}, seed=0)
        assert result.terminal.shape == (0, 1)
