"""Experiment configuration files.

A configuration is a YAML mapping with exactly six blocks::

    model:      {name: neoclassical_growth, params: {x0: 1.0}}
    kernel:     {nu: 0.5, ell: 10.0, sigma: 1.0}
    grid:       {mode: equispaced, T: 40, N: 41}
    solver:     {lambda: 1.0e-6}
    experiment: {kind: solve}
    output:     {directory: results, emit_plot_data: true}

Missing optional keys take the defaults below. Validation errors name the
offending field path, e.g. ``grid.points[3]``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ConfigurationError
from .kernels import SUPPORTED_NU, KernelSpec, TrainingGrid
from .models import MODEL_FACTORIES, ModelSpec, build_model
from .solver import SolverConfig

BLOCKS = ("model", "kernel", "grid", "solver", "experiment", "output")
EXPERIMENT_KINDS = ("solve", "sweep-initial-conditions", "robustness", "consistency", "shooting-compare")
GRID_MODES = ("equispaced", "explicit", "uniform-iid")

DEFAULTS: dict = {
    "kernel": {"nu": 0.5, "ell": 10.0, "sigma": 1.0},
    "grid": {"mode": "equispaced", "T": 40.0, "N": 41, "points": None, "seed": 0},
    "solver": {
        "lambda": 1e-6,
        "lambda_p": None,
        "penalize_jump_derivatives": False,
        "max_iterations": 500,
        "residual_tolerance": 1e-10,
        "step_tolerance": 1e-12,
        "objective_tolerance": 1e-13,
        "initial_mu0": None,
        "initial_y0": None,
    },
    "experiment": {
        "kind": "solve",
        "horizon": None,
        "x0_list": None,
        "nu_ell_grid": None,
        "N_list": None,
        "sampling": "equispaced",
        "seed": 0,
        "shooting_T": None,
        "threshold": None,
    },
    "output": {"directory": None, "emit_plot_data": False},
}


def _fail(path: str, msg: str):
    raise ConfigurationError(f"{path}: {msg}")


def _number(value, path, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if not np.isfinite(value):
        _fail(path, "must be finite")
    if integer and int(value) != value:
        _fail(path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        _fail(path, f"must be positive, got {value!r}")
    if nonneg and value < 0:
        _fail(path, f"must be non-negative, got {value!r}")
    return int(value) if integer else float(value)


def _number_list(value, path, **kw):
    if not isinstance(value, (list, tuple)) or not value:
        _fail(path, "expected a non-empty list")
    return [_number(v, f"{path}[{i}]", **kw) for i, v in enumerate(value)]


def _merge(block: str, raw) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        _fail(block, f"expected a mapping, got {type(raw).__name__}")
    unknown = set(raw) - set(DEFAULTS[block])
    if unknown:
        _fail(f"{block}.{sorted(unknown)[0]}", "unknown field")
    out = copy.deepcopy(DEFAULTS[block])
    out.update(raw)
    return out


@dataclass
class ExperimentConfig:
    """Validated experiment configuration (plain mappings, one per block)."""

    model: dict
    kernel: dict
    grid: dict
    solver: dict
    experiment: dict
    output: dict

    # -- construction --------------------------------------------------------

    @classmethod
    def from_mapping(cls, data) -> "ExperimentConfig":
        if not isinstance(data, dict):
            _fail("<root>", "configuration must be a mapping of blocks")
        missing = [b for b in BLOCKS if b not in data]
        if missing:
            _fail(missing[0], "missing block")
        # a ``meta`` block (software version) is written into manifests and ignored here
        unknown = set(data) - set(BLOCKS) - {"meta"}
        if unknown:
            _fail(sorted(unknown)[0], "unknown block")
        model = data["model"]
        if not isinstance(model, dict):
            _fail("model", "expected a mapping")
        if set(model) - {"name", "params"}:
            _fail(f"model.{sorted(set(model) - {'name', 'params'})[0]}", "unknown field")
        cfg = cls(
            model={"name": model.get("name"), "params": dict(model.get("params") or {})},
            kernel=_merge("kernel", data["kernel"]),
            grid=_merge("grid", data["grid"]),
            solver=_merge("solver", data["solver"]),
            experiment=_merge("experiment", data["experiment"]),
            output=_merge("output", data["output"]),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"<root>: not valid YAML ({exc})") from exc
        return cls.from_mapping(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_yaml(Path(path).read_text())

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        name = self.model["name"]
        if name not in MODEL_FACTORIES:
            _fail("model.name", f"unknown model {name!r}; choose from {sorted(MODEL_FACTORIES)}")
        for key, val in self.model["params"].items():
            _number(val, f"model.params.{key}")
        try:
            self.build_model()
        except KeyError as exc:
            _fail("model.params", str(exc.args[0]))
        except ValueError as exc:
            _fail("model.params", str(exc))

        k = self.kernel
        nu = _number(k["nu"], "kernel.nu")
        if not any(abs(nu - v) < 1e-12 for v in SUPPORTED_NU):
            _fail("kernel.nu", f"must be one of {SUPPORTED_NU}")
        _number(k["ell"], "kernel.ell", positive=True)
        _number(k["sigma"], "kernel.sigma", positive=True)

        g = self.grid
        if g["mode"] not in GRID_MODES:
            _fail("grid.mode", f"must be one of {GRID_MODES}")
        if g["mode"] == "explicit":
            pts = _number_list(g["points"], "grid.points", nonneg=True)
            for i in range(1, len(pts)):
                if pts[i] <= pts[i - 1]:
                    _fail(f"grid.points[{i}]", "explicit grids must be strictly increasing")
            if len(pts) < 2:
                _fail("grid.points", "need at least two points")
        else:
            _number(g["T"], "grid.T", positive=True)
            if _number(g["N"], "grid.N", integer=True) < 2:
                _fail("grid.N", "need at least two points")
            _number(g["seed"], "grid.seed", integer=True, nonneg=True)

        s = self.solver
        if _number(s["lambda"], "solver.lambda", nonneg=True) == 0:
            _fail("solver.lambda", "must be positive (the unpenalized problem has no unique minimizer)")
        if s["lambda_p"] is not None:
            _number(s["lambda_p"], "solver.lambda_p", nonneg=True)
        if not isinstance(s["penalize_jump_derivatives"], bool):
            _fail("solver.penalize_jump_derivatives", "expected true or false")
        _number(s["max_iterations"], "solver.max_iterations", integer=True, positive=True)
        for key in ("residual_tolerance", "step_tolerance", "objective_tolerance"):
            _number(s[key], f"solver.{key}", positive=True)
        for key in ("initial_mu0", "initial_y0"):
            if s[key] is not None:
                if isinstance(s[key], list):
                    _number_list(s[key], f"solver.{key}")
                else:
                    _number(s[key], f"solver.{key}")

        e = self.experiment
        kind = e["kind"]
        if kind not in EXPERIMENT_KINDS:
            _fail("experiment.kind", f"must be one of {EXPERIMENT_KINDS}")
        if e["horizon"] is not None:
            _number(e["horizon"], "experiment.horizon", positive=True)
        if kind == "sweep-initial-conditions":
            _number_list(e["x0_list"], "experiment.x0_list", positive=True)
            if self.build_model().state_dim != 1:
                _fail("model.name", "initial-condition sweeps need a single state variable")
        if kind == "robustness":
            grid = e["nu_ell_grid"]
            if not isinstance(grid, list) or not grid:
                _fail("experiment.nu_ell_grid", "expected a non-empty list of [nu, ell] pairs")
            for i, pair in enumerate(grid):
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    _fail(f"experiment.nu_ell_grid[{i}]", "expected a [nu, ell] pair")
                nu_i = _number(pair[0], f"experiment.nu_ell_grid[{i}][0]")
                if not any(abs(nu_i - v) < 1e-12 for v in SUPPORTED_NU):
                    _fail(f"experiment.nu_ell_grid[{i}][0]", f"must be one of {SUPPORTED_NU}")
                _number(pair[1], f"experiment.nu_ell_grid[{i}][1]", positive=True)
        if kind == "consistency":
            ns = _number_list(e["N_list"], "experiment.N_list", integer=True, positive=True)
            for i in range(1, len(ns)):
                if ns[i] < ns[i - 1]:
                    _fail(f"experiment.N_list[{i}]", "must be non-decreasing")
            if e["sampling"] not in ("equispaced", "uniform-iid"):
                _fail("experiment.sampling", "must be equispaced or uniform-iid")
        _number(e["seed"], "experiment.seed", integer=True, nonneg=True)
        if e["shooting_T"] is not None:
            _number(e["shooting_T"], "experiment.shooting_T", positive=True)
        if e["threshold"] is not None:
            _number(e["threshold"], "experiment.threshold", positive=True)

        o = self.output
        if o["directory"] is not None and not isinstance(o["directory"], str):
            _fail("output.directory", "expected a path string")
        if not isinstance(o["emit_plot_data"], bool):
            _fail("output.emit_plot_data", "expected true or false")

    # -- builders ------------------------------------------------------------

    def build_model(self) -> ModelSpec:
        return build_model(self.model["name"], self.model["params"])

    def build_kernel(self) -> KernelSpec:
        return KernelSpec(float(self.kernel["nu"]), float(self.kernel["ell"]), float(self.kernel["sigma"]))

    def build_grid(self) -> TrainingGrid:
        g = self.grid
        if g["mode"] == "explicit":
            return TrainingGrid(np.asarray(g["points"], dtype=float))
        if g["mode"] == "uniform-iid":
            return TrainingGrid.uniform_iid(float(g["T"]), int(g["N"]), int(g["seed"]))
        return TrainingGrid.equispaced(float(g["T"]), int(g["N"]))

    def build_solver_config(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(
            ridge_lambda=float(s["lambda"]),
            extra_penalty_weight=None if s["lambda_p"] is None else float(s["lambda_p"]),
            penalize_jump_derivatives=bool(s["penalize_jump_derivatives"]),
            max_iterations=int(s["max_iterations"]),
            residual_tolerance=float(s["residual_tolerance"]),
            step_tolerance=float(s["step_tolerance"]),
            objective_tolerance=float(s["objective_tolerance"]),
            initial_mu0=_maybe_array(s["initial_mu0"]),
            initial_y0=_maybe_array(s["initial_y0"]),
            seed=int(self.experiment["seed"]),
        )

    # -- serialization -------------------------------------------------------

    def to_mapping(self) -> dict:
        return {b: copy.deepcopy(getattr(self, b)) for b in BLOCKS}

    def to_yaml(self) -> str:
        return yaml.safe_dump(_plain(self.to_mapping()), sort_keys=True, default_flow_style=False)

    def with_overrides(self, seed: Optional[int] = None, directory: Optional[str] = None) -> "ExperimentConfig":
        data = self.to_mapping()
        if seed is not None:
            data["experiment"]["seed"] = int(seed)
            data["grid"]["seed"] = int(seed)
        if directory is not None:
            data["output"]["directory"] = str(directory)
        return ExperimentConfig.from_mapping(data)


def _maybe_array(v):
    return None if v is None else np.atleast_1d(np.asarray(v, dtype=float))


def _plain(obj: Any):
    """Convert numpy scalars and tuples to YAML-friendly builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
