"""Command-line front end: ``hro run|simulate|frontier``.

Every run emits plain-text tables (CSV plus one JSON run record) into
the output directory, one set per seed plus a cross-seed aggregate.
Outputs are a pure function of (config, seed): files are written
atomically, identical runs produce identical bytes, and each file's
first line names the configuration hash and seed it came from.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import HitRateOptError, ValidationError
from .experiments import run_frontier, run_simulation
from .io import atomic_write_text, samples_to_dataset, read_task_csv, format_float
from .metrics import HitInterval, MetricReport
from .pipeline import fit_window_model, optimize_window_model
from .rolling import WindowPlan, aggregate, run as rolling_run
from .simulate import ShiftConfig, SimConfig, generate, generate_shift_stream, preset
from dataclasses import replace

__all__ = ["main"]


def _pct(value: float) -> str:
    return f"{100.0 * value:.2f}"


def _raw(value: float) -> str:
    return f"{value:.6g}"


def _metric_cells(rep: MetricReport) -> list[str]:
    return [
        _pct(rep.hr), _raw(rep.mae), _raw(rep.rmse), _raw(rep.r2),
        _pct(rep.mape_a), _raw(rep.mae_hr), _raw(rep.rmse_hr),
    ]


def _table(header_comment: str, columns: list[str], rows: list[list[str]]) -> str:
    lines = [f"# {header_comment}", ",".join(columns)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def _sim_config(cfg: ExperimentConfig, seed: int) -> SimConfig:
    assert cfg.preset is not None
    return replace(preset(cfg.preset), seed=seed)


def _emit_simulation(cfg: ExperimentConfig, seed: int, out_dir: Path) -> dict:
    outcome = run_simulation(_sim_config(cfg, seed), cfg.pipeline, interval=cfg.interval)
    tag = f"{cfg.tag()} seed={seed}"
    rows = [[name] + _metric_cells(rep) for name, rep in outcome.rows().items()]
    atomic_write_text(out_dir / f"metrics_seed{seed}.csv",
                      _table(tag, ["model"] + list(MetricReport.COLUMNS), rows))

    trial_rows = []
    for i, trial in enumerate(outcome.hro.trace, start=1):
        trial_rows.append([str(i), _raw(trial.theta), str(int(trial.feasible)),
                           _raw(trial.achieved_rate)]
                          + [_raw(a) for a in trial.alpha])
    n_scen = outcome.baseline_model.scenario_set.n_scenarios
    alpha_cols = [f"alpha_{m}" for m in range(1, n_scen + 1)]
    atomic_write_text(out_dir / f"trace_seed{seed}.csv",
                      _table(tag, ["trial", "theta", "feasible", "achieved_rate"]
                             + alpha_cols, trial_rows))

    record = {
        "kind": "simulate",
        "preset": cfg.preset,
        "seed": seed,
        "config_hash": cfg.config_hash,
        "interval": [cfg.interval.lower, cfg.interval.upper],
        "optimal_rate": outcome.hro.optimal_rate,
        "any_feasible": outcome.hro.any_feasible,
        "scenarios": _scenario_record(outcome.optimized_model.scenario_set),
        "selection_logs": [dataclasses.asdict(log) for log in outcome.logs],
        "metrics": {name: rep.row() for name, rep in outcome.rows().items()},
    }
    atomic_write_text(out_dir / f"run_seed{seed}.json", _json_text(record))
    return {"HMM_test_HR": outcome.base_test.hr, "HRO_test_HR": outcome.hro_test.hr}


def _scenario_record(scenario_set) -> dict:
    return {
        "weights": [m.weight for m in scenario_set.models],
        "sigmas": [m.residual_sigma for m in scenario_set.models],
        "betas": [list(map(float, m.beta)) for m in scenario_set.models],
        "interval_edges": list(scenario_set.intervals.edges),
    }


def _json_text(record: dict) -> str:
    return json.dumps(record, sort_keys=True, indent=2, default=float) + "\n"


def _emit_frontier(cfg: ExperimentConfig, seed: int, out_dir: Path) -> dict:
    points, model = run_frontier(_sim_config(cfg, seed), cfg.rate_grid, cfg.pipeline,
                                 grid_resolution=min(cfg.pipeline.grid_resolution, 0.01),
                                 rate_band=cfg.rate_band, interval=cfg.interval)
    tag = f"{cfg.tag()} seed={seed}"
    n_scen = model.scenario_set.n_scenarios
    rows = []
    for p in points:
        rows.append([_raw(p.target_rate)] + [_raw(a) for a in p.alpha]
                    + [_raw(p.achieved_rate), _raw(p.achieved_mae), str(int(p.feasible))])
    columns = (["target_rate"] + [f"alpha_{m}" for m in range(1, n_scen + 1)]
               + ["achieved_rate", "achieved_mae", "feasible"])
    atomic_write_text(out_dir / f"frontier_seed{seed}.csv", _table(tag, columns, rows))
    return {f"target_{_raw(p.target_rate)}": p.achieved_rate for p in points}


def _load_stream(cfg: ExperimentConfig, seed: int):
    if cfg.data_path is not None:
        return samples_to_dataset(read_task_csv(cfg.data_path))
    if cfg.preset == "shift":
        return generate_shift_stream(ShiftConfig(n_tasks=cfg.total, seed=seed))
    return generate(_sim_config(cfg, seed))


def _emit_rolling(cfg: ExperimentConfig, seed: int, out_dir: Path) -> dict:
    stream = _load_stream(cfg, seed)
    plan = WindowPlan(total=min(cfg.total, len(stream)), train_window=cfg.train_window,
                      test_step=cfg.test_step)
    results = rolling_run(stream, plan, cfg.interval, cfg.pipeline, seed=seed)
    tag = f"{cfg.tag()} seed={seed}"

    window_rows = []
    for res in results:
        for name, rep in sorted(res.reports.items()):
            window_rows.append([str(res.index), name] + _metric_cells(rep))
    atomic_write_text(out_dir / f"windows_seed{seed}.csv",
                      _table(tag, ["window", "model"] + list(MetricReport.COLUMNS),
                             window_rows))

    log_source = "fhmm_mten" if "fhmm_mten" in results[0].selection_logs else "hro"
    n_scen = max(log.scenario for log in results[0].selection_logs[log_source])
    columns = ["T"]
    for m in range(1, n_scen + 1):
        columns += [f"SCE{m}_VAR_NUM", f"SCE{m}_MIX"]
    selection_rows = []
    for res in results:
        row = [str(res.index)]
        for log in res.selection_logs[log_source]:
            row += [str(log.selected), _raw(log.mix)]
        selection_rows.append(row)
    atomic_write_text(out_dir / f"selection_seed{seed}.csv",
                      _table(tag, columns, selection_rows))

    pooled = aggregate(results, cfg.interval)
    summary_rows = [[name] + _metric_cells(rep) for name, rep in sorted(pooled.items())]
    atomic_write_text(out_dir / f"summary_seed{seed}.csv",
                      _table(tag, ["model"] + list(MetricReport.COLUMNS), summary_rows))
    return {f"{name}_HR": rep.hr for name, rep in sorted(pooled.items())}


def _emit_fit(cfg: ExperimentConfig, seed: int, out_dir: Path) -> dict:
    stream = _load_stream(cfg, seed)
    model = fit_window_model(stream.x, stream.y, cfg.interval, cfg.pipeline, seed=seed)
    optimized, result = optimize_window_model(model, cfg.pipeline)
    tag = f"{cfg.tag()} seed={seed}"
    rows = [["fitted"] + _metric_cells(model.train_report()),
            ["optimized"] + _metric_cells(optimized.train_report())]
    atomic_write_text(out_dir / f"fit_seed{seed}.csv",
                      _table(tag, ["model"] + list(MetricReport.COLUMNS), rows))
    record = {
        "kind": "fit",
        "seed": seed,
        "config_hash": cfg.config_hash,
        "optimal_rate": result.optimal_rate,
        "scenarios": _scenario_record(optimized.scenario_set),
        "selection_logs": [dataclasses.asdict(log) for log in model.logs],
    }
    atomic_write_text(out_dir / f"run_seed{seed}.json", _json_text(record))
    return {"optimal_rate": result.optimal_rate}


_RUNNERS = {
    "simulate": _emit_simulation,
    "frontier": _emit_frontier,
    "rolling": _emit_rolling,
    "fit": _emit_fit,
}


def run_config(cfg: ExperimentConfig) -> Path:
    """Execute every seed of a config and write the aggregate table."""
    out_dir = cfg.out_dir
    runner = _RUNNERS[cfg.kind]
    per_seed: dict[int, dict] = {}
    for seed in cfg.seeds:
        per_seed[seed] = runner(cfg, seed, out_dir)

    keys = sorted({k for summary in per_seed.values() for k in summary})
    rows = [[str(seed)] + [_raw(per_seed[seed].get(k, float("nan"))) for k in keys]
            for seed in cfg.seeds]
    if per_seed:
        means = [float(np.mean([per_seed[s][k] for s in cfg.seeds if k in per_seed[s]]))
                 for k in keys]
        rows.append(["mean"] + [_raw(v) for v in means])
    atomic_write_text(out_dir / "aggregate.csv",
                      _table(cfg.tag(), ["seed"] + keys, rows))
    return out_dir


def _synthetic_config(preset_name: str, seed: int, out_dir: str) -> ExperimentConfig:
    sim = preset(preset_name)
    text = f"simulate {preset_name}"
    from .pipeline import PipelineConfig, SurrogateConfig

    return ExperimentConfig(
        kind="simulate",
        preset=preset_name,
        data_path=None,
        seeds=(seed,),
        interval=HitInterval.symmetric(sim.hit_half_width),
        rate_grid=(0.70, 0.725, 0.75, 0.775, 0.80),
        rate_band=0.015,
        pipeline=PipelineConfig(surrogate=SurrogateConfig.plain_quadratic()),
        train_window=500,
        test_step=50,
        total=1000,
        out_dir=Path(out_dir),
        config_hash=hashlib.sha256(text.encode()).hexdigest()[:12],
        source_path=Path("<cli>"),
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hro",
        description="Hit-rate optimization experiments: simulate, optimize, roll.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a config file")
    run_p.add_argument("config", help="path to the experiment config")
    run_p.add_argument("--seed", type=int, default=None, help="override the seed list")
    run_p.add_argument("--out", default=None, help="override the output directory")

    sim_p = sub.add_parser("simulate", help="run a named benchmark preset")
    sim_p.add_argument("preset", choices=("baseline", "controlled_1", "controlled_2"))
    sim_p.add_argument("--seed", type=int, default=0)
    sim_p.add_argument("--out", default="results")

    fr_p = sub.add_parser("frontier", help="execute a frontier-kind config")
    fr_p.add_argument("config")
    fr_p.add_argument("--seed", type=int, default=None)
    fr_p.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = _synthetic_config(args.preset, args.seed, args.out)
        else:
            cfg = load_config(args.config)
            if args.command == "frontier" and cfg.kind != "frontier":
                raise ValidationError(
                    f"{args.config}: 'hro frontier' needs kind=frontier, got {cfg.kind}"
                )
            if args.seed is not None:
                cfg = dataclasses.replace(cfg, seeds=(args.seed,))
            if args.out is not None:
                cfg = dataclasses.replace(cfg, out_dir=Path(args.out))
        out_dir = run_config(cfg)
    except HitRateOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote results to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
