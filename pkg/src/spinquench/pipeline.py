"""Command implementations: simulate, synth, scale, plot.

Each takes a validated RunConfig plus an output directory and returns a
small summary dict (the CLI prints it; tests introspect it). All writes
are atomic and deterministic, so re-running a config is free: simulate
skips every (p, seed) whose file already carries the config digest.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as sqio
from . import plots
from .config import RunConfig
from .errors import CapacityError, ConfigError
from .evolution import MAX_DENSE_SPINS
from .mqc import ClusterTrajectory, trajectory
from .operators import MAX_SPINS
from .scaling import (fit_growth_exponent, full_scaling_analysis, rescale,
                      synth_trajectories)

WORKERS_ENV = "SPINQUENCH_WORKERS"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


def _ensure_outdir(out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


def _capacity_check(config: RunConfig, n_spins: int):
    """Reject oversized requests before any evolution starts."""
    kind = config.get("estimator.kind", "exact")
    if kind == "exact":
        cap = min(MAX_DENSE_SPINS, config.get("numerics.max_dense_spins", MAX_DENSE_SPINS))
        if n_spins > cap:
            raise CapacityError(
                f"exact estimator capped at {cap} spins, geometry has {n_spins}; "
                "use estimator.kind = typicality or a smaller geometry")
    elif n_spins > MAX_SPINS:
        raise CapacityError(f"typicality estimator capped at {MAX_SPINS} spins, "
                            f"geometry has {n_spins}")


def _run_one(config: RunConfig, network, p: float, seed: int) -> ClusterTrajectory:
    traj = trajectory(network, config.build_protocol(p), config.estimator_config(seed))
    traj.metadata["base_seed"] = traj.metadata["seed"]
    traj.metadata["seed"] = int(seed)
    traj.metadata["label"] = config.label
    return traj


def _simulate_task(config_text: str, p: float, seed: int) -> str:
    # process-pool entry point: rebuild everything from the serialized config
    config = RunConfig.parse(config_text)
    traj = _run_one(config, config.build_network(), p, seed)
    return sqio.format_trajectory(traj, config.digest())


def cmd_simulate(config: RunConfig, out_dir) -> dict:
    """One trajectory file per (p, seed); resumes by config digest."""
    out = _ensure_outdir(out_dir)
    network = config.build_network()
    _capacity_check(config, network.n_spins)
    digest = config.digest()
    # dry-run validation of every task before computing anything
    for p in config.p_sweep:
        config.build_protocol(p)
    for seed in config.seeds:
        config.estimator_config(seed)

    tasks, skipped = [], []
    for p in config.p_sweep:
        for seed in config.seeds:
            path = out / sqio.trajectory_filename(p, seed)
            if path.exists():
                try:
                    existing = sqio.read_trajectory_file(path)
                except ConfigError:
                    existing = None
                if existing is not None and existing.metadata.get("config_digest") == digest:
                    skipped.append(str(path))
                    continue
            tasks.append((p, seed, path))

    written = []
    n_workers = worker_count()
    if n_workers > 1 and len(tasks) > 1:
        text = config.serialize()
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            bodies = pool.map(_simulate_task, [text] * len(tasks),
                              [t[0] for t in tasks], [t[1] for t in tasks])
            for (p, seed, path), body in zip(tasks, bodies):
                sqio.atomic_write_text(path, body)
                written.append(str(path))
    else:
        for p, seed, path in tasks:
            traj = _run_one(config, network, p, seed)
            sqio.write_trajectory_file(path, traj, digest)
            written.append(str(path))
    return {"written": written, "skipped": skipped, "config_digest": digest}


def cmd_synth(config: RunConfig, out_dir) -> dict:
    """Synthetic trajectories from the planted scaling form, same file format."""
    out = _ensure_outdir(out_dir)
    params = config.synth_params()
    try:
        trajs = synth_trajectories(**params)
    except ValueError as exc:
        raise ConfigError(f"invalid synth parameters: {exc}") from None
    digest = config.digest()
    written = []
    for traj in trajs:
        traj.metadata["label"] = config.label
        path = out / sqio.trajectory_filename(traj.p, params["seed"])
        sqio.write_trajectory_file(path, traj, digest)
        written.append(str(path))
    return {"written": written, "skipped": [], "config_digest": digest}


def _combine_seeds(group: list) -> ClusterTrajectory:
    """Geometric mean of K across seeds sharing one p.

    K is a variance (strictly positive, log-normal-ish scatter), so the
    mean in log space is the right average and keeps power laws straight.
    """
    first = group[0]
    if len(group) == 1:
        return first
    for other in group[1:]:
        if not np.array_equal(other.times, first.times):
            raise ConfigError(
                f"trajectories for p={first.p} have mismatched time grids "
                "and cannot be seed-averaged")
    logk = np.mean([np.log(tr.K) for tr in group], axis=0)
    meta = dict(first.metadata)
    meta["n_seeds"] = len(group)
    meta.pop("seed", None)
    return ClusterTrajectory(p=first.p, times=first.times.copy(),
                             K=np.maximum(np.exp(logk), 1.0), metadata=meta)


def load_input_trajectories(config: RunConfig, key: str = "scale.input_dir") -> list:
    (input_dir,) = config.require(key)
    trajs = sqio.load_trajectory_dir(input_dir)
    groups = {}
    for tr in trajs:
        groups.setdefault(tr.p, []).append(tr)
    return [_combine_seeds(groups[p]) for p in sorted(groups)]


def cmd_scale(config: RunConfig, out_dir, beta_grid=None, anchor_p=None,
              t_min=None) -> dict:
    """Full scaling analysis of a trajectory directory; writes report.json
    and pooled.csv. CLI flags override the matching config keys."""
    out = _ensure_outdir(out_dir)
    combined = load_input_trajectories(config)
    if len(combined) < 3:
        raise ConfigError(f"collapse needs >= 3 curves at distinct p, "
                          f"found {len(combined)} (p={[tr.p for tr in combined]})")
    if beta_grid is None:
        beta_grid = config.get("scale.beta_grid")
    if anchor_p is None:
        anchor_p = config.get("scale.anchor_p", max(tr.p for tr in combined))
    if t_min is None:
        t_min = config.get("scale.t_min")

    result = full_scaling_analysis(
        combined, anchor_p=anchor_p, beta_grid=beta_grid, t_min=t_min,
        growth_t_min=config.get("scale.growth_t_min"),
        n_bootstrap=config.get("scale.n_bootstrap", 100),
        bootstrap_seed=config.get("scale.bootstrap_seed", 0))
    growth = fit_growth_exponent(combined[0], t_min=config.get("scale.growth_t_min"))

    report = {
        "alpha": result.alpha,
        "alpha_K": growth.alpha_K,
        "growth": {"r2": growth.r2, "t_min": growth.t_min, "n_points": growth.n_points},
        "beta": result.beta,
        "beta_scan": [{"beta": b, "residual": r}
                      for b, r in sorted(result.beta_residuals.items())],
        "xi": [{"p": p, "xi": x} for p, x in sorted(result.xi.items())],
        "fit": {"A": result.fit_A, "B": result.fit_B, "nu": result.nu,
                "p_c": result.p_c, "s": result.s, "branch_gauge": result.branch_gauge,
                "std_err": result.std_err},
        "residuals": {"collapse": result.collapse_residual,
                      "beta_scan": result.beta_residuals[result.beta]},
        "wegner_dimension_check": result.wegner_dimension_check,
        "anchor_p": float(anchor_p),
        "bootstrap": result.bootstrap,
        "n_curves": len(combined),
        "config_digest": config.digest(),
    }
    report_path = out / "report.json"
    sqio.write_report_json(report_path, _jsonable(report))
    sqio.write_pooled_csv(out / "pooled.csv", result.pooled)
    return {"report": str(report_path), "pooled": str(out / "pooled.csv"),
            "result": result}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def cmd_plot(config: RunConfig, out_dir) -> dict:
    """SVG figures from trajectory files and, when given, a scale report."""
    out = _ensure_outdir(out_dir)
    combined = load_input_trajectories(config, key="plot.input_dir")
    figures = {}

    figures["trajectories"] = plots.plot_trajectories(combined)

    spectral = next((tr for tr in combined if tr.spectra), None)
    if spectral is not None:
        figures["spectrum_heatmap"] = plots.plot_spectrum_heatmap(spectral)

    report_path = config.get("plot.report")
    if report_path:
        report = sqio.read_report_json(report_path)
        growth = fit_growth_exponent(combined[0],
                                     t_min=report["growth"]["t_min"])
        curves = rescale(combined, growth, report["beta"],
                         t_min=report["growth"]["t_min"])
        figures["rescaled"] = plots.plot_rescaled(curves)
        pooled_path = Path(report_path).with_name("pooled.csv")
        if pooled_path.exists():
            figures["collapsed"] = plots.plot_collapsed(sqio.read_pooled_csv(pooled_path))
        figures["xi_fit"] = plots.plot_xi_fit(report)

    paths = []
    for name, svg in figures.items():
        path = out / f"{name}.svg"
        sqio.atomic_write_text(path, svg)
        paths.append(str(path))
    return {"written": paths}
