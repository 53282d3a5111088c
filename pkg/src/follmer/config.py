"""Config parsing and the builders that turn config blocks into objects.

Configs are YAML documents (JSON parses too, being a YAML subset).  The
recognized blocks are ``target``, ``grid``, ``score``, plus command-level
settings (``scheme``, ``n_paths``, ``seed``, ``metrics``, ``bounds``,
``sweep``, ``verify``).  ``sweep.axes`` maps dotted config paths to value
lists and expands to the cross product, capped to keep runs desk-scale.
"""

from __future__ import annotations

import copy
import itertools
from pathlib import Path

import numpy as np
import yaml

from .grids import TimeGrid, grid_explicit, grid_uniform_t, grid_uniform_tau
from .measures import TargetMeasure
from .scores import EmpiricalMixtureScore, ExactScore, PerturbedScore, ScoreModel


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return data


# ---------------------------------------------------------------------------
# built-in target library


def _unit_direction(dimension: int) -> np.ndarray:
    e = np.zeros(dimension)
    e[0] = 1.0
    return e


def builtin_target(name: str, dimension: int) -> TargetMeasure:
    """Targets covering the smooth, singular, and low-dimensional regimes."""
    d = int(dimension)
    if d < 1:
        raise ConfigError("target dimension must be positive")
    e1 = _unit_direction(d)
    if name == "standard_gaussian":
        return TargetMeasure.standard_gaussian(d, name=f"standard_gaussian_d{d}")
    if name == "shifted_gaussian":
        return TargetMeasure.gaussian(e1, np.eye(d), name=f"shifted_gaussian_d{d}")
    if name == "two_point":
        return TargetMeasure.from_points(np.stack([e1, -e1]), name=f"two_point_d{d}")
    if name == "line_points":
        offsets = np.linspace(-1.0, 1.0, 8)
        return TargetMeasure.from_points(offsets[:, None] * e1, name=f"line_points_d{d}")
    if name == "mixture3":
        means = np.stack([-2.0 * e1, np.zeros(d), 2.0 * e1])
        covs = np.stack([0.5 * np.eye(d), np.eye(d), 0.75 * np.eye(d)])
        return TargetMeasure.mixture([0.3, 0.4, 0.3], means, covs, name=f"mixture3_d{d}")
    raise ConfigError(f"unknown builtin target {name!r}")


BUILTIN_TARGETS = ("standard_gaussian", "shifted_gaussian", "two_point", "line_points", "mixture3")


def build_target(spec: dict) -> TargetMeasure:
    if not isinstance(spec, dict):
        raise ConfigError("target spec must be a mapping")
    if "builtin" in spec:
        return builtin_target(spec["builtin"], spec.get("dimension", 1))
    try:
        return TargetMeasure.from_config(spec)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad target spec: {exc}") from exc


def build_grid(spec: dict) -> TimeGrid:
    if not isinstance(spec, dict):
        raise ConfigError("grid spec must be a mapping")
    kind = spec.get("constructor", "uniform_tau")
    try:
        if kind == "uniform_t":
            return grid_uniform_t(float(spec["t0"]), float(spec.get("delta", 0.0)), int(spec["n_steps"]))
        if kind == "uniform_tau":
            return grid_uniform_tau(float(spec["t0"]), float(spec.get("delta", 0.0)), int(spec["n_steps"]))
        if kind == "explicit":
            return grid_explicit(np.asarray(spec["t"], dtype=float))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad grid spec: {exc}") from exc
    raise ConfigError(f"unknown grid constructor {kind!r}")


def build_score(spec: dict | None, target: TargetMeasure) -> ScoreModel:
    spec = {"kind": "exact"} if spec is None else spec
    if not isinstance(spec, dict):
        raise ConfigError("score spec must be a mapping")
    kind = spec.get("kind", "exact")
    if kind == "exact":
        return ExactScore(target)
    if kind == "perturbed":
        return PerturbedScore(
            ExactScore(target),
            scale=float(spec.get("scale", 1.0)),
            bias=spec.get("bias"),
            field_amplitude=float(spec.get("field_amplitude", 0.0)),
            n_features=int(spec.get("n_features", 32)),
            lengthscale=float(spec.get("lengthscale", 1.0)),
            seed=int(spec.get("seed", 0)),
        )
    if kind == "empirical":
        if "points" in spec:
            points = np.asarray(spec["points"], dtype=float)
        elif "data" in spec:
            points = np.loadtxt(spec["data"], delimiter=",", ndmin=2)
        else:
            raise ConfigError("empirical score needs inline 'points' or a 'data' CSV path")
        return EmpiricalMixtureScore(points, weights=spec.get("weights"))
    raise ConfigError(f"unknown score kind {kind!r}")


SCHEMES = ("em", "ada", "ddpm-standard", "ddpm-expint", "ddpm-ada")


def validate_scheme(name: str) -> str:
    if name not in SCHEMES:
        raise ConfigError(f"unknown scheme {name!r}; valid: {', '.join(SCHEMES)}")
    return name


# ---------------------------------------------------------------------------
# sweep expansion


def _set_path(cfg: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = cfg
    for key in parts[:-1]:
        nxt = node.get(key)
        if not isinstance(nxt, dict):
            nxt = {}
            node[key] = nxt
        node = nxt
    node[parts[-1]] = value


def expand_sweep(config: dict) -> list[dict]:
    """Expand sweep.axes into one resolved config per cross-product point.

    Returns configs in axis-major order with a ``sweep_index`` field; without
    a sweep block the original config is the single run.
    """
    sweep = config.get("sweep")
    if not sweep:
        out = copy.deepcopy(config)
        out["sweep_index"] = 0
        return [out]
    axes = sweep.get("axes", {})
    if not isinstance(axes, dict) or not axes:
        raise ConfigError("sweep.axes must be a nonempty mapping of dotted paths to lists")
    max_runs = int(sweep.get("max_runs", 512))
    names = list(axes.keys())
    value_lists = []
    for name in names:
        vals = axes[name]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"sweep axis {name!r} must be a nonempty list")
        value_lists.append(vals)
    total = int(np.prod([len(v) for v in value_lists]))
    if total > max_runs:
        raise ConfigError(f"sweep expands to {total} runs, above the cap {max_runs}")
    runs = []
    for index, combo in enumerate(itertools.product(*value_lists)):
        run = copy.deepcopy(config)
        run.pop("sweep", None)
        for name, value in zip(names, combo):
            _set_path(run, name, value)
        run["sweep_index"] = index
        run["sweep_point"] = dict(zip(names, combo))
        runs.append(run)
    return runs


def default_verify_config() -> dict:
    """The built-in identity-suite configuration.

    Three targets cover the smooth, singular, and multimodal regimes; pass a
    config file listing more targets to widen the sweep.
    """
    return {
        "verify": {
            "n_paths": 100_000,
            "targets": [
                {"builtin": "shifted_gaussian", "dimension": 1},
                {"builtin": "two_point", "dimension": 2},
                {"builtin": "mixture3", "dimension": 2},
            ],
        }
    }
