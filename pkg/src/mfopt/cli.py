"""Command-line interface: campaign sets, reports, and surface exports.

Subcommands:

* ``run``    - execute a set of repetition campaigns from a JSON config,
  writing per-repetition histories, model snapshots, a metrics table,
  aggregate statistics, and box-plot figures.
* ``report`` - (re)aggregate one or more run directories into statistics
  tables and comparison box plots.
* ``grid``   - run a single campaign and export its final surrogate on a
  regular grid (with rendered figures for one and two dimensions).
* ``list``   - show the available problems and their supported sizes.

All numeric output is printed with 17 significant digits so that reruns
of the same configuration are byte-identical.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import benchmarks, metrics, plots, pso
from .active_learning import (
    AcquisitionConfig,
    CampaignConfig,
    CampaignRecord,
    IterationRow,
    run_campaign,
)
from .srbf import SrbfConfig

logger = logging.getLogger(__name__)

_FMT = "%.17g"

METRIC_COLUMNS = ("E_x", "E_f", "E_t", "E_p", "cc")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


@dataclass
class RunConfig:
    problem: str = "P1"
    dim: int = 1
    n_levels: int = 3
    budget: float | None = None          # default 40 + 5 * dim
    repetitions: int = 50
    base_seed: int = 0
    beta: list | None = None
    noise_sigmas: list | None = None
    p4_noiseless_hf: bool = False
    out: str = "runs/out"
    jobs: int = 1
    stagnation_patience: int = 5
    final_from_last_proposal: bool = False
    srbf: dict = field(default_factory=dict)
    acquisition: dict = field(default_factory=dict)
    pso: dict = field(default_factory=dict)

    def resolved_budget(self) -> float:
        return float(self.budget) if self.budget is not None else float(40 + 5 * self.dim)


_SCHEMA: dict[str, type | tuple] = {
    "problem": str,
    "dim": int,
    "n_levels": int,
    "budget": (int, float, type(None)),
    "repetitions": int,
    "base_seed": int,
    "beta": (list, type(None)),
    "noise_sigmas": (list, type(None)),
    "p4_noiseless_hf": bool,
    "out": str,
    "jobs": int,
    "stagnation_patience": int,
    "final_from_last_proposal": bool,
    "srbf": dict,
    "acquisition": dict,
    "pso": dict,
}

_SRBF_KEYS = {"ensemble_size", "loocv_ensemble_size", "kmin", "seed", "duplicate_tol",
              "svd_cutoff", "kmeans_max_iter", "kmeans_tol"}
_ACQ_KEYS = {"d0", "eps_pen", "lcb_weights"}
_PSO_KEYS = {"n_particles", "n_iterations", "chi", "c_cognitive", "c_social",
             "stall_patience"}


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = RunConfig()
    for key, value in raw.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key '{key}'")
        expected = _SCHEMA[key]
        if not isinstance(value, expected) or (isinstance(value, bool) and expected is int):
            raise ConfigError(f"config key '{key}': expected {expected}, got {type(value).__name__}")
        setattr(cfg, key, value)
    for key, allowed, name in (
        (cfg.srbf, _SRBF_KEYS, "srbf"),
        (cfg.acquisition, _ACQ_KEYS, "acquisition"),
        (cfg.pso, _PSO_KEYS, "pso"),
    ):
        for sub in key:
            if sub not in allowed:
                raise ConfigError(f"unknown config key '{name}.{sub}'")
    if cfg.repetitions < 1:
        raise ConfigError("config key 'repetitions': must be >= 1")
    if cfg.resolved_budget() <= 0:
        raise ConfigError("config key 'budget': must be positive")
    if cfg.jobs < 1:
        raise ConfigError("config key 'jobs': must be >= 1")
    try:
        build_stack(cfg, seed=0)
    except ValueError as exc:
        raise ConfigError(f"config keys 'problem'/'dim'/'n_levels': {exc}") from exc
    return cfg


def effective_config(cfg: RunConfig) -> dict:
    """Config with every default resolved, suitable for exact reruns."""
    stack = build_stack(cfg, seed=cfg.base_seed)
    acq = AcquisitionConfig(**cfg.acquisition)
    pso_cfg = build_pso_config(cfg)
    srbf_cfg = SrbfConfig(**cfg.srbf)
    return {
        "problem": cfg.problem,
        "dim": cfg.dim,
        "n_levels": cfg.n_levels,
        "budget": cfg.resolved_budget(),
        "repetitions": cfg.repetitions,
        "base_seed": cfg.base_seed,
        "beta": list(stack.beta),
        "noise_sigmas": list(stack.sigmas),
        "p4_noiseless_hf": cfg.p4_noiseless_hf,
        "out": cfg.out,
        "jobs": cfg.jobs,
        "stagnation_patience": cfg.stagnation_patience,
        "final_from_last_proposal": cfg.final_from_last_proposal,
        "srbf": {
            "ensemble_size": srbf_cfg.ensemble_size,
            "loocv_ensemble_size": srbf_cfg.loocv_ensemble_size,
            "kmin": srbf_cfg.kmin,
            "seed": srbf_cfg.seed,
            "duplicate_tol": srbf_cfg.duplicate_tol,
            "svd_cutoff": srbf_cfg.svd_cutoff,
            "kmeans_max_iter": srbf_cfg.kmeans_max_iter,
            "kmeans_tol": srbf_cfg.kmeans_tol,
        },
        "acquisition": {
            "d0": acq.d0,
            "eps_pen": acq.eps_pen,
            "lcb_weights": list(acq.lcb_weights),
        },
        "pso": {
            "n_particles": pso_cfg.swarm_size,
            "n_iterations": pso_cfg.n_iterations,
            "chi": pso_cfg.chi,
            "c_cognitive": pso_cfg.c_cognitive,
            "c_social": pso_cfg.c_social,
            "stall_patience": pso_cfg.stall_patience,
        },
    }


def build_stack(cfg: RunConfig, seed: int) -> benchmarks.FidelityStack:
    return benchmarks.make_stack(
        problem=cfg.problem,
        dim=cfg.dim,
        n_levels=cfg.n_levels,
        seed=seed,
        beta=cfg.beta,
        sigmas=cfg.noise_sigmas,
        p4_noiseless_hf=cfg.p4_noiseless_hf,
    )


def build_pso_config(cfg: RunConfig) -> pso.PsoConfig:
    return pso.PsoConfig(box=pso.unit_box(cfg.dim), **cfg.pso)


# ---------------------------------------------------------------------------
# artifact writers


class HistoryWriter:
    """Streams campaign history rows to a delimited file as they occur."""

    def __init__(self, path, dim: int, n_levels: int):
        self.path = Path(path)
        self.dim = dim
        self.n_levels = n_levels
        header = (
            ["iteration", "level"]
            + [f"x{i + 1}" for i in range(dim)]
            + [f"s{l}" for l in range(1, n_levels + 1)]
            + ["cc_after"]
            + [f"kstar{l}" for l in range(1, n_levels + 1)]
        )
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(header)
        self._fh.flush()

    def write_row(self, row: IterationRow):
        cells = [str(row.index), str(row.level)]
        cells += [_FMT % c for c in row.x]
        for l in range(1, self.n_levels + 1):
            cells.append(_FMT % row.observed[l] if l in row.observed else "")
        cells.append(_FMT % row.cc_after)
        for l in range(1, self.n_levels + 1):
            cells.append(str(row.kstars[l - 1]) if row.kstars is not None else "")
        self._writer.writerow(cells)
        self._fh.flush()

    def close(self):
        self._fh.close()


def emit_history(record: CampaignRecord, path) -> None:
    """Write a complete (or partial) campaign history in one go."""
    writer = HistoryWriter(path, record.dim, record.n_levels)
    try:
        for row in record.rows:
            writer.write_row(row)
    finally:
        writer.close()


def model_state(record: CampaignRecord) -> dict:
    """JSON-serializable snapshot of the fitted hierarchy."""
    model = record.model
    state = {
        "problem": record.problem,
        "seed": record.seed,
        "n_levels": record.n_levels,
        "beta": list(record.beta),
        "kstars": list(model.kstars),
        "training": [
            {"points": t.points.tolist(), "values": t.values.tolist()}
            for t in model.training
        ],
        "lowest_model": _ensemble_state(model.lowest_model),
        "error_models": [_ensemble_state(m) for m in model.error_models],
        "final_x_star": [float(v) for v in record.final_x_star],
        "final_surrogate_min": record.final_surrogate_min,
        "termination_reason": record.termination_reason,
    }
    return state


def _ensemble_state(model) -> dict:
    return {
        "kstar": model.kstar,
        "centers": model.centers.tolist(),
        "tau_samples": model.tau_samples.tolist(),
        "weights": model.weights.tolist(),
        "training_fingerprint": model.training_fingerprint,
    }


def emit_surface_grid(model, resolution: int, path) -> tuple[Path, list[Path]]:
    """Export the surrogate mean and uncertainty on a regular grid,
    plus rendered figures.  Only one- and two-dimensional domains can
    be gridded."""
    dim = model.dim
    path = Path(path)
    figures: list[Path] = []
    if dim == 1:
        x = np.linspace(0.0, 1.0, resolution)
        means, uncs = model.predict_mf_batch(x[:, None])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "mean", "uncertainty"])
            for xi, m, u in zip(x, means, uncs):
                w.writerow([_FMT % xi, _FMT % m, _FMT % u])
        fig = path.with_suffix(".png")
        plots.render_grid_1d(x, means, uncs, fig)
        figures.append(fig)
    elif dim == 2:
        axis = np.linspace(0.0, 1.0, resolution)
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
        means, uncs = model.predict_mf_batch(pts)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "mean", "uncertainty"])
            for p, m, u in zip(pts, means, uncs):
                w.writerow([_FMT % p[0], _FMT % p[1], _FMT % m, _FMT % u])
        for label, surf in (("mean", means), ("uncertainty", uncs)):
            fig = path.with_name(f"{path.stem}_{label}.png")
            plots.render_grid_2d(g1, g2, surf.reshape(g1.shape), label, fig)
            figures.append(fig)
    else:
        raise ValueError(f"surface export supports 1 or 2 dimensions, got {dim}")
    return path, figures


# ---------------------------------------------------------------------------
# repetition orchestration


def run_one_repetition(cfg: RunConfig, rep: int, out_dir) -> dict:
    """Run a single campaign; writes its history and model snapshot,
    returns its metrics row."""
    out_dir = Path(out_dir)
    seed = cfg.base_seed + rep
    stack = build_stack(cfg, seed=seed)
    initial = benchmarks.initial_design(cfg.dim)
    writer = HistoryWriter(out_dir / f"history_rep{rep:04d}.csv", cfg.dim, cfg.n_levels)
    try:
        record = run_campaign(
            stack,
            initial,
            budget=cfg.resolved_budget(),
            srbf_config=SrbfConfig(**cfg.srbf),
            acq_config=AcquisitionConfig(**cfg.acquisition),
            pso_config=build_pso_config(cfg),
            campaign_config=CampaignConfig(
                stagnation_patience=cfg.stagnation_patience,
                final_from_last_proposal=cfg.final_from_last_proposal,
            ),
            on_row=writer.write_row,
        )
    finally:
        writer.close()

    (out_dir / f"model_rep{rep:04d}.json").write_text(
        json.dumps(model_state(record), indent=1)
    )

    ref = metrics.reference_for_stack(stack, initial)
    e_x, e_f, e_t = metrics.reference_errors(record.final_x_star, ref, stack)
    e_p = metrics.prediction_error(record.final_surrogate_min, record.final_x_star, ref, stack)
    row = {
        "rep": rep,
        "seed": seed,
        "E_x": e_x,
        "E_f": e_f,
        "E_t": e_t,
        "E_p": e_p,
        "cc": record.cc,
        "termination": record.termination_reason,
        "surrogate_min": record.final_surrogate_min,
    }
    for l, count in enumerate(record.counts, start=1):
        row[f"J{l}"] = count
    for d, v in enumerate(record.final_x_star, start=1):
        row[f"xstar{d}"] = float(v)
    return row


def _metrics_fieldnames(cfg: RunConfig) -> list[str]:
    return (
        ["rep", "seed", "E_x", "E_f", "E_t", "E_p", "cc"]
        + [f"J{l}" for l in range(1, cfg.n_levels + 1)]
        + [f"xstar{d}" for d in range(1, cfg.dim + 1)]
        + ["surrogate_min", "termination"]
    )


def write_metrics_table(rows: list[dict], fieldnames: list[str], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fieldnames)
        for row in sorted(rows, key=lambda r: r["rep"]):
            cells = []
            for name in fieldnames:
                v = row[name]
                cells.append(_FMT % v if isinstance(v, float) else str(v))
            w.writerow(cells)


def read_metrics_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                if key in ("rep", "seed") or key.startswith("J"):
                    row[key] = int(val)
                elif key == "termination":
                    row[key] = val
                else:
                    row[key] = float(val)
            rows.append(row)
    return rows


def write_boxstats(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "q1", "q2", "q3", "whisker_lo", "whisker_hi",
                    "iqr", "n_outliers", "outliers"])
        for name in METRIC_COLUMNS:
            stats = metrics.aggregate_stats([row[name] for row in rows])
            w.writerow(
                [name]
                + [_FMT % v for v in (stats.q1, stats.q2, stats.q3,
                                      stats.whisker_lo, stats.whisker_hi, stats.iqr)]
                + [str(len(stats.outliers)),
                   ";".join(_FMT % o for o in stats.outliers)]
            )


def write_summary(cfg: RunConfig, rows: list[dict], path) -> None:
    med = lambda name: float(np.median([row[name] for row in rows]))
    header = ["problem", "dim", "n_levels", "budget", "repetitions",
              "median_E_x", "median_E_f", "median_E_t", "median_cc"]
    values = [cfg.problem, str(cfg.dim), str(cfg.n_levels),
              _FMT % cfg.resolved_budget(), str(cfg.repetitions),
              _FMT % med("E_x"), _FMT % med("E_f"), _FMT % med("E_t"), _FMT % med("cc")]
    for l in range(1, cfg.n_levels + 1):
        header.append(f"median_J{l}")
        values.append(_FMT % med(f"J{l}"))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerow(values)


def render_report_figures(groups: dict[str, list[dict]], out_dir: Path) -> list[Path]:
    """Box-plot figures comparing labelled metric tables."""
    written = []
    for name in METRIC_COLUMNS:
        data = [(label, np.array([row[name] for row in rows]))
                for label, rows in groups.items()]
        path = out_dir / f"box_{name}.png"
        plots.render_box_plot(data, name, path)
        written.append(path)
    return written


def cmd_run(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config_effective.json").write_text(
        json.dumps(effective_config(cfg), indent=1, sort_keys=True)
    )

    reps = list(range(cfg.repetitions))
    rows: list[dict] = []
    failures: list[tuple[int, Exception]] = []
    if cfg.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {pool.submit(run_one_repetition, cfg, rep, out_dir): rep for rep in reps}
            for fut in concurrent.futures.as_completed(futures):
                rep = futures[fut]
                try:
                    rows.append(fut.result())
                    logger.info("repetition %d finished", rep)
                except Exception as exc:
                    failures.append((rep, exc))
                    logger.error("repetition %d failed: %s", rep, exc)
    else:
        for rep in reps:
            try:
                rows.append(run_one_repetition(cfg, rep, out_dir))
                logger.info("repetition %d finished", rep)
            except Exception as exc:
                failures.append((rep, exc))
                logger.error("repetition %d failed: %s", rep, exc)

    if rows:
        write_metrics_table(rows, _metrics_fieldnames(cfg), out_dir / "metrics.csv")
        write_boxstats(rows, out_dir / "boxstats.csv")
        write_summary(cfg, rows, out_dir / "summary.csv")
        render_report_figures({f"N={cfg.n_levels}": rows}, out_dir)
    if failures:
        for rep, exc in failures:
            print(f"repetition {rep} failed: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_report(run_dirs: list[str], out: str | None) -> int:
    groups: dict[str, list[dict]] = {}
    for d in run_dirs:
        d = Path(d)
        table = d / "metrics.csv"
        if not table.exists():
            print(f"no metrics table in {d}", file=sys.stderr)
            return 1
        rows = read_metrics_table(table)
        write_boxstats(rows, d / "boxstats.csv")
        try:
            eff = json.loads((d / "config_effective.json").read_text())
            label = f"{eff['problem']} N={eff['n_levels']}"
        except (OSError, KeyError, json.JSONDecodeError):
            label = d.name
        groups[label] = rows

    out_dir = Path(out) if out else Path(run_dirs[0])
    out_dir.mkdir(parents=True, exist_ok=True)
    figures = render_report_figures(groups, out_dir)
    with open(out_dir / "report_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"median_{m}" for m in METRIC_COLUMNS])
        for label, rows in groups.items():
            w.writerow([label] + [_FMT % float(np.median([r[m] for r in rows]))
                                  for m in METRIC_COLUMNS])
    for fig in figures:
        logger.info("wrote %s", fig)
    return 0


def cmd_grid(cfg: RunConfig, resolution: int, seed: int | None) -> int:
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stack = build_stack(cfg, seed=cfg.base_seed if seed is None else seed)
    record = run_campaign(
        stack,
        benchmarks.initial_design(cfg.dim),
        budget=cfg.resolved_budget(),
        srbf_config=SrbfConfig(**cfg.srbf),
        acq_config=AcquisitionConfig(**cfg.acquisition),
        pso_config=build_pso_config(cfg),
        campaign_config=CampaignConfig(
            stagnation_patience=cfg.stagnation_patience,
            final_from_last_proposal=cfg.final_from_last_proposal,
        ),
    )
    try:
        grid_path, figures = emit_surface_grid(record.model, resolution, out_dir / "grid.csv")
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    emit_history(record, out_dir / "grid_history.csv")
    logger.info("wrote %s and %d figures", grid_path, len(figures))
    return 0


def cmd_list() -> int:
    print(f"{'problem':<8} {'dimensions':<12} {'max levels':<10}")
    for name, info in benchmarks.PROBLEMS.items():
        dims = ",".join(str(d) for d in info.supported_dims)
        print(f"{name:<8} {dims:<12} {info.max_levels:<10}")
    return 0


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.out is not None:
        cfg.out = args.out
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mfopt",
        description="multi-fidelity active-learning surrogate optimization",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a campaign set from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--jobs", type=int, default=None)

    p_rep = sub.add_parser("report", help="aggregate existing run directories")
    p_rep.add_argument("run_dirs", nargs="+")
    p_rep.add_argument("--out", default=None)

    p_grid = sub.add_parser("grid", help="export a fitted surrogate on a grid")
    p_grid.add_argument("--config", required=True)
    p_grid.add_argument("--out", default=None)
    p_grid.add_argument("--seed", type=int, default=None)
    p_grid.add_argument("--resolution", type=int, default=101)

    sub.add_parser("list", help="list available problems")

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "run":
            return cmd_run(_apply_overrides(load_config(args.config), args))
        if args.command == "report":
            return cmd_report(args.run_dirs, args.out)
        if args.command == "grid":
            cfg = load_config(args.config)
            if args.out is not None:
                cfg.out = args.out
            return cmd_grid(cfg, args.resolution, args.seed)
        if args.command == "list":
            return cmd_list()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
