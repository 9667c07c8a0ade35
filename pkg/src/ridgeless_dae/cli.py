"""Command-line experiment runner.

``ridgeless-dae run config.yaml`` fits the configured model and writes CSV
output, a manifest that reproduces the run, and optionally plot data.

Exit codes: 0 success, 2 configuration error, 3 solver failure
(non-convergence, bound violation, failed benchmark), 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import traceback
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .config import ExperimentConfig
from .diagnostics import (
    consistency_sweep,
    format_value,
    initial_condition_sweep,
    robustness_sweep,
    skiba_threshold,
)
from .errors import ConfigurationError, RidgelessError
from .models import ModelSpec, Trajectory, skiba_kink
from .reference import (
    asset_pricing_dividend,
    asset_pricing_fundamental,
    bvp_benchmark,
    reference_trajectory,
    shooting_solve,
    steady_states,
)
from .solver import KernelSolution, solve

log = logging.getLogger("ridgeless_dae")

OUTPUT_ENV = "RIDGELESS_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
N_EVAL = 401
EXTRAPOLATION_FACTOR = 1.5


# --- output helpers ----------------------------------------------------------


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def level_names(model: ModelSpec) -> list:
    return list(model.state_names) + list(model.costate_names) + list(model.jump_names)


def _trajectory_columns(model: ModelSpec, traj: Trajectory) -> dict:
    cols = {}
    groups = (
        (model.state_names, traj.x_path, traj.xdot_path),
        (model.costate_names, traj.mu_path, traj.mudot_path),
        (model.jump_names, traj.y_path, traj.ydot_path),
    )
    for names, levels, derivs in groups:
        for i, n in enumerate(names):
            cols[n] = levels[:, i]
            if derivs is not None:
                cols[f"d_{n}"] = derivs[:, i]
    return cols


def write_solution_csv(path: Path, model: ModelSpec, traj: Trajectory) -> None:
    """Wide table: ``t`` then every level and its derivative ``d_<name>``."""
    cols = _trajectory_columns(model, traj)
    names = level_names(model)
    header = ["t"] + names + [f"d_{n}" for n in names if f"d_{n}" in cols]
    data = [traj.times] + [cols[h] for h in header[1:]]
    _write_csv(path, header, zip(*data))


def write_errors_csv(path: Path, model: ModelSpec, traj: Trajectory, reference: dict) -> None:
    """Long table ``t, variable, value, reference, rel_error``."""
    cols = _trajectory_columns(model, traj)
    rows = []
    for name in level_names(model):
        if name not in reference:
            continue
        ref = reference[name]
        val = cols[name]
        with np.errstate(all="ignore"):
            rel = np.abs((val - ref) / ref)
        rows.extend(zip(traj.times, [name] * traj.times.size, val, ref, rel))
    _write_csv(path, ["t", "variable", "value", "reference", "rel_error"], rows)


def _reference_columns(model: ModelSpec, ref: Trajectory) -> dict:
    cols = _trajectory_columns(model, ref)
    return {n: cols[n] for n in level_names(model)}


# --- oracles -----------------------------------------------------------------


def oracle(config: ExperimentConfig, model: ModelSpec, sol: Optional[KernelSolution], times) -> Optional[dict]:
    """Benchmark paths keyed by variable name, or None when none exists.

    Asset pricing uses the closed-form dividend and fundamental price;
    single-state growth-type models use a shooting benchmark (towards the
    steady state nearest the kernel solution's terminal state when there
    are several). Models with a singular jump Jacobian have no benchmark.
    """
    name = config.model["name"]
    if name == "asset_pricing":
        return {
            model.state_names[0]: asset_pricing_dividend(model, times),
            model.costate_names[0]: asset_pricing_fundamental(model, times),
        }
    if model.state_dim != 1:
        return None
    target = None
    states = steady_states(model)
    if len(states) > 1 and sol is not None:
        x_end = sol.trajectory([sol.grid.horizon]).x_path[0, 0]
        target = min(states, key=lambda s: abs(s.x_ss[0] - x_end))
    T_shoot = config.experiment["shooting_T"]
    ref = reference_trajectory(model, times, T_shoot=T_shoot, target=target)
    if ref.terminated_early:
        raise RidgelessError("benchmark integration stopped before the end of the evaluation window")
    return _reference_columns(model, ref)


def _eval_times(config: ExperimentConfig, horizon: float):
    end = config.experiment["horizon"] or EXTRAPOLATION_FACTOR * horizon
    return np.linspace(0.0, float(end), N_EVAL)


# --- experiments -------------------------------------------------------------


def _run_solve(config, out: Path, with_oracle: bool = True) -> dict:
    model = config.build_model()
    grid = config.build_grid()
    sol = solve(model, grid, config.build_kernel(), config.build_solver_config())
    times = _eval_times(config, grid.horizon)
    traj = sol.trajectory(times)
    write_solution_csv(out / "solution.csv", model, traj)
    written = ["solution.csv"]
    ref = oracle(config, model, sol, times) if with_oracle else None
    if ref is not None:
        write_errors_csv(out / "errors.csv", model, traj, ref)
        written.append("errors.csv")
    return {"files": written, "solution": sol, "training_horizon": grid.horizon}


def _run_shooting_compare(config, out: Path) -> dict:
    res = _run_solve(config, out)
    model = config.build_model()
    times = _eval_times(config, res["training_horizon"])
    if model.state_dim != 1:
        raise ConfigurationError("experiment.kind: shooting-compare needs a single state variable")
    states = steady_states(model)
    x_end = res["solution"].trajectory([res["training_horizon"]]).x_path[0, 0]
    target = min(states, key=lambda s: abs(s.x_ss[0] - x_end))
    T = float(config.experiment["shooting_T"] or max(40.0, times[-1]))
    shot = shooting_solve(model, T=T, target=target, n_eval=2, horizon=T)
    path = bvp_benchmark(model, T, target, initial_guess=shot.trajectory if len(shot.trajectory) > 2 else None)
    x_b, mu_b, y_b = path(times)
    ref = oracle(config, model, res["solution"], times)
    rows = []
    groups = ((model.state_names, x_b), (model.costate_names, mu_b), (model.jump_names, y_b))
    for names, bvp in groups:
        for i, n in enumerate(names):
            with np.errstate(all="ignore"):
                diff = np.abs(bvp[:, i] / ref[n] - 1.0)
            rows.extend(zip(times, [n] * times.size, ref[n], bvp[:, i], diff))
    _write_csv(out / "benchmarks.csv", ["t", "variable", "shooting", "collocation", "rel_difference"], rows)
    summary = [
        ("kernel", res["solution"].mu0_hat[0]),
        ("shooting", shot.mu0[0]),
        ("collocation", mu_b[0, 0]),
    ]
    _write_csv(out / "initial_costate.csv", ["method", "mu0"], summary)
    res["files"] += ["benchmarks.csv", "initial_costate.csv"]
    return res


def _run_sweep(config, out: Path) -> dict:
    kind = config.experiment["kind"]
    model = config.build_model()
    kernel = config.build_kernel()
    solver_cfg = config.build_solver_config()
    grid = config.build_grid()
    e = config.experiment
    if kind == "robustness":
        report = robustness_sweep(
            model,
            [tuple(p) for p in e["nu_ell_grid"]],
            solver_cfg,
            grid=grid,
            eval_times=_eval_times(config, grid.horizon),
            scale=kernel.scale,
        )
    elif kind == "consistency":
        horizon = float(config.grid["T"]) if config.grid["mode"] != "explicit" else grid.horizon
        report = consistency_sweep(
            model, kernel, solver_cfg, e["N_list"], sampling=e["sampling"], seed=int(e["seed"]), horizon=horizon
        )
    else:
        threshold = e["threshold"]
        if threshold is None and config.model["name"] == "skiba_growth":
            p = model.params
            log.info("computing the basin threshold by shooting (slow)")
            threshold = skiba_threshold(model, bracket=(0.5 * skiba_kink(p["a"], p["b1"], p["b2"]), 4.0))
        report = initial_condition_sweep(model, e["x0_list"], kernel, solver_cfg, grid, threshold=threshold)
    # runtimes go to a separate file so report.csv is reproducible byte for byte
    report.to_csv(out / "report.csv", include_runtime=False)
    _write_csv(out / "timings.csv", ["cell", "runtime"], [(c.cell, c.runtime) for c in report.cells])
    return {"files": ["report.csv", "timings.csv"], "report": report, "training_horizon": grid.horizon}


RUNNERS = {
    "solve": _run_solve,
    "shooting-compare": _run_shooting_compare,
    "robustness": _run_sweep,
    "consistency": _run_sweep,
    "sweep-initial-conditions": _run_sweep,
}


def write_manifest(path: Path, config: ExperimentConfig) -> None:
    """Resolved config plus software version; loadable as a config itself."""
    data = config.to_mapping()
    # location-independent, so re-running the manifest elsewhere gives identical files
    data["output"]["directory"] = None
    data["meta"] = {"software": "ridgeless_dae", "version": __version__}
    path.write_text(yaml.safe_dump(data, sort_keys=True, default_flow_style=False))


def resolve_output_dir(config: ExperimentConfig, override: Optional[str]) -> Path:
    return Path(override or config.output["directory"] or os.environ.get(OUTPUT_ENV) or "results")


def run_experiment(config: ExperimentConfig, output_dir: Optional[str] = None) -> dict:
    """Run one experiment and write its files; returns a summary dict."""
    out = resolve_output_dir(config, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = RUNNERS[config.experiment["kind"]](config, out)
    write_manifest(out / "manifest.yaml", config)
    result["files"].append("manifest.yaml")
    if config.output["emit_plot_data"] and "solution.csv" in result["files"]:
        result["files"] += [p.name for p in emit_plot_data(out / "solution.csv")]
    result["output_dir"] = out
    return result


# --- plot data ---------------------------------------------------------------


def _read_columns(path: Path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    cols = {h: [] for h in header}
    for row in body:
        for h, v in zip(header, row):
            cols[h].append(v)
    return cols


def emit_plot_data(solution_csv, output_dir=None, training_horizon: Optional[float] = None, model_name=None) -> list:
    """Write gnuplot-ready two-column ``.dat`` files from a solution table.

    One file per state and jump level, plus ``<name>_error.dat`` for every
    variable with a benchmark in a sibling ``errors.csv``. For asset
    pricing the files are the fitted price and the fundamental price.
    Each file starts with a comment giving the end of the training window.
    Training horizon and model name default to the sibling manifest.

    Raises
    ------
    ValueError
        Missing columns, an empty trajectory, or no training horizon. No
        files are written in that case.
    """
    solution_csv = Path(solution_csv)
    out = Path(output_dir) if output_dir else solution_csv.parent
    manifest_path = solution_csv.parent / "manifest.yaml"
    manifest = yaml.safe_load(manifest_path.read_text()) if manifest_path.exists() else None
    if manifest is not None:
        cfg = ExperimentConfig.from_mapping(manifest)
        model = cfg.build_model()
        model_name = model_name or cfg.model["name"]
        if training_horizon is None:
            training_horizon = cfg.build_grid().horizon
    else:
        if model_name is None:
            raise ValueError("no manifest next to the solution table; pass model_name")
        from .models import build_model

        model = build_model(model_name)
    if training_horizon is None:
        raise ValueError("training horizon unknown; pass training_horizon")

    cols = _read_columns(solution_csv)
    if "t" not in cols:
        raise ValueError("solution table has no 't' column")
    if not cols["t"]:
        raise ValueError("solution table has no rows")
    t = np.array(cols["t"], dtype=float)

    errors_path = solution_csv.parent / "errors.csv"
    err = {}
    if errors_path.exists():
        ecols = _read_columns(errors_path)
        for name in set(ecols.get("variable", [])):
            sel = [i for i, v in enumerate(ecols["variable"]) if v == name]
            err[name] = (
                np.array([ecols["t"][i] for i in sel], dtype=float),
                np.array([ecols["rel_error"][i] for i in sel], dtype=float),
                np.array([ecols["reference"][i] for i in sel], dtype=float),
            )

    series = {}
    if model_name == "asset_pricing":
        price = model.costate_names[0]
        if price not in cols:
            raise ValueError(f"solution table lacks column {price!r}")
        series[price] = (t, np.array(cols[price], dtype=float))
        if price in err:
            series[f"{price}_fundamental"] = (err[price][0], err[price][2])
    else:
        plotted = list(model.state_names) + list(model.jump_names)
        missing = [n for n in plotted if n not in cols]
        if missing:
            raise ValueError(f"solution table lacks columns {missing}")
        for n in plotted:
            series[n] = (t, np.array(cols[n], dtype=float))
        for n in plotted:
            if n in err:
                series[f"{n}_error"] = err[n][:2]

    texts = {}
    for name, (ts, vals) in series.items():
        lines = [f"# training horizon: {format_value(float(training_horizon))}", f"# t {name}"]
        lines += [f"{format_value(a)} {format_value(b)}" for a, b in zip(ts, vals)]
        texts[out / f"{name}.dat"] = "\n".join(lines) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    for path, text in texts.items():
        path.write_text(text)
    return list(texts)


# --- entry point -------------------------------------------------------------


def _error_record(out: Optional[Path], kind: str, exc: BaseException, code: int) -> None:
    record = {"status": "error", "exit_code": code, "error": kind, "message": str(exc)}
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ridgeless-dae", description="Kernel solutions of optimal-control DAEs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a YAML config")
    run.add_argument("config", help="path to the experiment config (or a manifest.yaml)")
    run.add_argument("--output-dir", help=f"output directory (default: config, then ${OUTPUT_ENV}, then ./results)")
    run.add_argument("--seed", type=int, help="override experiment.seed and grid.seed")
    run.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    plot = sub.add_parser("plot-data", help="write gnuplot data files from a solution.csv")
    plot.add_argument("solution_csv")
    plot.add_argument("--output-dir")
    return parser


def _load(path: str) -> ExperimentConfig:
    return ExperimentConfig.from_yaml(Path(path).read_text())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO, format="%(message)s")
    if args.command == "plot-data":
        try:
            files = emit_plot_data(args.solution_csv, args.output_dir)
        except (ValueError, ConfigurationError) as exc:
            _error_record(None, "ValueError", exc, EXIT_CONFIG)
            return EXIT_CONFIG
        except OSError as exc:
            _error_record(None, type(exc).__name__, exc, EXIT_IO)
            return EXIT_IO
        for f in files:
            log.info("wrote %s", f)
        return EXIT_OK

    out = Path(args.output_dir) if args.output_dir else None
    try:
        config = _load(args.config).with_overrides(seed=args.seed)
        out = resolve_output_dir(config, args.output_dir)
    except ConfigurationError as exc:
        _error_record(out, "ConfigurationError", exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except yaml.YAMLError as exc:
        _error_record(out, "ConfigurationError", exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except OSError as exc:
        _error_record(out, type(exc).__name__, exc, EXIT_IO)
        return EXIT_IO
    try:
        result = run_experiment(config, str(out))
    except ConfigurationError as exc:
        _error_record(out, "ConfigurationError", exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except RidgelessError as exc:
        _error_record(out, type(exc).__name__, exc, EXIT_SOLVER)
        return EXIT_SOLVER
    except OSError as exc:
        _error_record(out, type(exc).__name__, exc, EXIT_IO)
        return EXIT_IO
    except Exception as exc:  # pragma: no cover - unexpected failures still get a record
        log.debug(traceback.format_exc())
        _error_record(out, type(exc).__name__, exc, 1)
        return 1
    for f in result["files"]:
        log.info("wrote %s", out / f)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
