from pathlib import Path

import pytest
import yaml

from ridgeless_dae.config import DEFAULTS, ExperimentConfig
from ridgeless_dae.errors import ConfigurationError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _base():
    return {
        "model": {"name": "neoclassical_growth", "params": {"x0": 1.0}},
        "kernel": {"nu": 0.5, "ell": 10.0},
        "grid": {"mode": "equispaced", "T": 40.0, "N": 41},
        "solver": {"lambda": 1e-6},
        "experiment": {"kind": "solve"},
        "output": {},
    }


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    cfg = ExperimentConfig.load(path)
    cfg.build_model(), cfg.build_grid(), cfg.build_kernel(), cfg.build_solver_config()


def test_defaults_fill_missing_fields():
    cfg = ExperimentConfig.from_mapping(_base())
    assert cfg.kernel["sigma"] == DEFAULTS["kernel"]["sigma"]
    assert cfg.output["directory"] is None and cfg.output["emit_plot_data"] is False
    assert cfg.build_solver_config().ridge_lambda == 1e-6


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda d: d.pop("kernel"), "kernel"),
        (lambda d: d.update(extra={}), "extra"),
        (lambda d: d["kernel"].update(nu=1.0), "kernel.nu"),
        (lambda d: d["kernel"].update(ell=-2.0), "kernel.ell"),
        (lambda d: d["kernel"].update(width=1.0), "kernel.width"),
        (lambda d: d["model"].update(name="nope"), "model.name"),
        (lambda d: d["model"]["params"].update(beta=1.0), "model.params"),
        (lambda d: d["grid"].update(mode="explicit", points=[0.0, 1.0, 1.0]), "grid.points[2]"),
        (lambda d: d["grid"].update(N=1), "grid.N"),
        (lambda d: d["solver"].update({"lambda": 0.0}), "solver.lambda"),
        (lambda d: d["solver"].update(penalize_jump_derivatives="yes"), "solver.penalize_jump_derivatives"),
        (lambda d: d["experiment"].update(kind="fit"), "experiment.kind"),
        (lambda d: d["experiment"].update(kind="consistency", N_list=[21, 11]), "experiment.N_list[1]"),
        (lambda d: d["experiment"].update(kind="robustness", nu_ell_grid=[[0.5]]), "experiment.nu_ell_grid[0]"),
        (lambda d: d["output"].update(emit_plot_data="no"), "output.emit_plot_data"),
    ],
)
def test_validation_names_the_field(mutate, path):
    data = _base()
    mutate(data)
    with pytest.raises(ConfigurationError) as info:
        ExperimentConfig.from_mapping(data)
    assert str(info.value).startswith(path + ":")


def test_sweep_of_initial_conditions_needs_scalar_state():
    data = _base()
    data["model"] = {"name": "human_capital"}
    data["experiment"] = {"kind": "sweep-initial-conditions", "x0_list": [1.0]}
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_mapping(data)


def test_invalid_yaml_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_yaml("model: [unclosed")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_yaml("- just a list")


def test_yaml_round_trip_and_meta_block():
    cfg = ExperimentConfig.from_mapping(_base())
    data = yaml.safe_load(cfg.to_yaml())
    data["meta"] = {"version": "0"}
    assert ExperimentConfig.from_mapping(data) == cfg


def test_overrides_apply_seed_to_grid_and_experiment():
    cfg = ExperimentConfig.from_mapping(_base()).with_overrides(seed=9, directory="out")
    assert cfg.grid["seed"] == 9 and cfg.experiment["seed"] == 9 and cfg.output["directory"] == "out"


def test_explicit_and_uniform_grids():
    data = _base()
    data["grid"] = {"mode": "explicit", "points": [0, 1, 3]}
    assert list(ExperimentConfig.from_mapping(data).build_grid().points) == [0.0, 1.0, 3.0]
    data["grid"] = {"mode": "uniform-iid", "T": 10.0, "N": 5, "seed": 2}
    g = ExperimentConfig.from_mapping(data).build_grid()
    assert len(g) == 5 and g.points[0] == 0.0
