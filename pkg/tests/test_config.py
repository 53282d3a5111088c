"""Config loading, builders, and sweep expansion."""

import numpy as np
import numpy.testing as npt
import pytest

from follmer.config import (
    BUILTIN_TARGETS,
    ConfigError,
    build_grid,
    build_score,
    build_target,
    builtin_target,
    default_verify_config,
    expand_sweep,
    load_config,
    validate_scheme,
)
from follmer.scores import EmpiricalMixtureScore, ExactScore, PerturbedScore


class TestLoadConfig:
    def test_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("scheme: em\nn_paths: 10\ntarget: {builtin: two_point, dimension: 3}\n")
        cfg = load_config(path)
        assert cfg["scheme"] == "em"
        assert cfg["target"]["dimension"] == 3

    def test_json_is_valid_yaml(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"scheme": "ada", "n_paths": 5}')
        assert load_config(path)["scheme"] == "ada"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")

    def test_unparseable(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("scheme: [unclosed\n")
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config(path)

    def test_non_mapping_root(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- a\n- b\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(path)

    def test_empty_file_is_empty_config(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path) == {}


class TestBuiltinTargets:
    @pytest.mark.parametrize("name", BUILTIN_TARGETS)
    @pytest.mark.parametrize("d", [1, 4])
    def test_catalog_constructs_and_names(self, name, d):
        target = builtin_target(name, d)
        assert target.dimension == d
        assert target.name == f"{name}_d{d}"

    def test_two_point_geometry(self):
        target = builtin_target("two_point", 5)
        means = np.sort(target.means[:, 0])
        npt.assert_allclose(means, [-1.0, 1.0])
        npt.assert_allclose(target.means[:, 1:], 0.0)
        assert target.is_finite_point_set

    def test_line_points_count(self):
        target = builtin_target("line_points", 2)
        assert target.n_components == 8
        npt.assert_allclose(np.sort(target.means[:, 0]), np.linspace(-1, 1, 8))

    def test_mixture3_weights(self):
        target = builtin_target("mixture3", 2)
        npt.assert_allclose(target.weights, [0.3, 0.4, 0.3])
        assert target.is_smooth

    def test_unknown_name(self):
        with pytest.raises(ConfigError, match="unknown builtin"):
            builtin_target("cauchy", 1)

    def test_bad_dimension(self):
        with pytest.raises(ConfigError, match="positive"):
            builtin_target("two_point", 0)

    def test_build_target_inline_spec(self):
        target = build_target(
            {
                "kind": "FinitePointSet",
                "name": "atom",
                "dimension": 2,
                "components": [{"weight": 1.0, "mean": [0.5, -0.5]}],
            }
        )
        npt.assert_allclose(target.means, [[0.5, -0.5]])

    def test_build_target_rejects_garbage(self):
        with pytest.raises(ConfigError, match="bad target spec"):
            build_target({"kind": "FinitePointSet", "components": "nope"})
        with pytest.raises(ConfigError, match="mapping"):
            build_target("two_point")


class TestBuildGrid:
    def test_uniform_tau_default_constructor(self):
        grid = build_grid({"t0": 0.01, "delta": 0.01, "n_steps": 16})
        assert grid.n_steps == 16
        npt.assert_allclose(grid.t[0], 0.01)

    def test_uniform_t(self):
        grid = build_grid({"constructor": "uniform_t", "t0": 0.1, "delta": 0.0, "n_steps": 9})
        npt.assert_allclose(np.diff(grid.t), 0.1)

    def test_explicit(self):
        grid = build_grid({"constructor": "explicit", "t": [0.25, 0.5, 1.0]})
        npt.assert_allclose(grid.t, [0.25, 0.5, 1.0])

    def test_unknown_constructor(self):
        with pytest.raises(ConfigError, match="unknown grid constructor"):
            build_grid({"constructor": "chebyshev", "t0": 0.1, "n_steps": 4})

    def test_missing_keys(self):
        with pytest.raises(ConfigError, match="bad grid spec"):
            build_grid({"constructor": "uniform_t", "t0": 0.1})

    def test_non_mapping(self):
        with pytest.raises(ConfigError, match="mapping"):
            build_grid([0.5, 1.0])


class TestBuildScore:
    def setup_method(self):
        self.target = builtin_target("shifted_gaussian", 2)

    def test_none_means_exact(self):
        model = build_score(None, self.target)
        assert isinstance(model, ExactScore)

    def test_perturbed_options(self):
        model = build_score({"kind": "perturbed", "scale": 1.2, "bias": [0.1, 0.0]}, self.target)
        assert isinstance(model, PerturbedScore)
        assert not model.is_unperturbed

    def test_empirical_inline_points(self):
        model = build_score({"kind": "empirical", "points": [[0.0, 0.0], [1.0, 1.0]]}, self.target)
        assert isinstance(model, EmpiricalMixtureScore)

    def test_empirical_csv(self, tmp_path):
        path = tmp_path / "pts.csv"
        np.savetxt(path, np.array([[0.0, 1.0], [2.0, 3.0]]), delimiter=",")
        model = build_score({"kind": "empirical", "data": str(path)}, self.target)
        x = np.array([0.3, 0.3])
        ref = EmpiricalMixtureScore(np.array([[0.0, 1.0], [2.0, 3.0]]))
        npt.assert_allclose(model(x, 0.5), ref(x, 0.5))

    def test_empirical_needs_source(self):
        with pytest.raises(ConfigError, match="points"):
            build_score({"kind": "empirical"}, self.target)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown score kind"):
            build_score({"kind": "neural"}, self.target)


class TestSchemes:
    @pytest.mark.parametrize("name", ["em", "ada", "ddpm-standard", "ddpm-expint", "ddpm-ada"])
    def test_valid(self, name):
        assert validate_scheme(name) == name

    def test_invalid(self):
        with pytest.raises(ConfigError, match="unknown scheme"):
            validate_scheme("heun")


class TestExpandSweep:
    def test_no_sweep_single_run(self):
        runs = expand_sweep({"scheme": "em"})
        assert len(runs) == 1
        assert runs[0]["sweep_index"] == 0

    def test_cross_product_order(self):
        cfg = {
            "scheme": "em",
            "grid": {"t0": 0.01, "n_steps": 8},
            "sweep": {"axes": {"grid.n_steps": [8, 32], "scheme": ["em", "ada"]}},
        }
        runs = expand_sweep(cfg)
        points = [(r["grid"]["n_steps"], r["scheme"]) for r in runs]
        # last-listed axis varies fastest
        assert points == [(8, "em"), (8, "ada"), (32, "em"), (32, "ada")]
        assert [r["sweep_index"] for r in runs] == [0, 1, 2, 3]
        assert runs[3]["sweep_point"] == {"grid.n_steps": 32, "scheme": "ada"}
        assert all("sweep" not in r for r in runs)

    def test_dotted_path_creates_nodes(self):
        runs = expand_sweep({"sweep": {"axes": {"target.dimension": [2, 8]}}})
        assert [r["target"]["dimension"] for r in runs] == [2, 8]

    def test_originals_not_shared(self):
        cfg = {"grid": {"n_steps": 4}, "sweep": {"axes": {"scheme": ["em", "ada"]}}}
        runs = expand_sweep(cfg)
        runs[0]["grid"]["n_steps"] = 99
        assert runs[1]["grid"]["n_steps"] == 4
        assert cfg["grid"]["n_steps"] == 4

    def test_run_cap(self):
        cfg = {"sweep": {"axes": {"seed": list(range(600))}}}
        with pytest.raises(ConfigError, match="cap"):
            expand_sweep(cfg)
        cfg["sweep"]["max_runs"] = 600
        assert len(expand_sweep(cfg)) == 600

    def test_bad_axes(self):
        with pytest.raises(ConfigError, match="nonempty mapping"):
            expand_sweep({"sweep": {"axes": {}}})
        with pytest.raises(ConfigError, match="nonempty list"):
            expand_sweep({"sweep": {"axes": {"scheme": []}}})


class TestDefaultVerifyConfig:
    def test_shape(self):
        cfg = default_verify_config()
        names = [t["builtin"] for t in cfg["verify"]["targets"]]
        assert names == ["shifted_gaussian", "two_point", "mixture3"]
        assert cfg["verify"]["n_paths"] == 100_000
