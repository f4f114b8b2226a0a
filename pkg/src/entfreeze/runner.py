"""Experiment orchestration: job expansion, bounded worker pool, artifacts on disk.

Layout of a run directory::

    config.yaml              resolved configuration
    manifest.json            config hash, package version, job table, failures
    trajectories/<job>.csv   t, pair_i, pair_j, ln_value (17 significant digits)
    trajectories/<job>.json  same series plus correlations and metadata
    quenched/<group>.csv     disorder-averaged series (disorder runs only)
    analysis/...             freeze reports, tau table, fits, verdicts
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    FreezeReport,
    dump_json,
    fit_freeze_parabola,
    fit_quadratic,
    freeze_report,
    hierarchy_check,
    lr_freezing_bound,
    quenched_average,
    scale_invariance_report,
    write_tau_table,
)
from .config import ExperimentConfig, load_config, parse_config
from .errors import EntfreezeError, FitError, NumericalIntegrityError
from .evolution import Trajectory, evolve_trajectory
from .spin_models import sample_disorder

log = logging.getLogger(__name__)

JOBS_ENV = "ENTFREEZE_JOBS"


@dataclass(frozen=True)
class Job:
    index: int
    L: int
    door_count: int | None
    realization: int | None

    @property
    def group(self) -> str:
        g = f"L{self.L}"
        if self.door_count is not None:
            g += f"_nd{self.door_count}"
        return g

    @property
    def name(self) -> str:
        return self.group + ("" if self.realization is None else f"_r{self.realization:04d}")


def expand_jobs(cfg: ExperimentConfig) -> list[Job]:
    counts = cfg.noise.door_counts or [None]
    reals = range(cfg.disorder.realizations) if cfg.disorder else [None]
    jobs = []
    for L in cfg.chain.sizes:
        for n in counts:
            for r in reals:
                jobs.append(Job(len(jobs), L, n, r))
    return jobs


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def run_job(cfg: ExperimentConfig, job: Job, stop_when_unfrozen: bool = False) -> Trajectory:
    spec = cfg.chain.spec(job.L)
    extra = {"job": job.name, "group": job.group, "base_seed": cfg.base_seed}
    if cfg.disorder is not None:
        dis = cfg.disorder.spec(cfg.base_seed)
        spec = sample_disorder(spec, dis, job.realization)
        extra.update(realization=job.realization, base_seed=dis.base_seed)
    noise = cfg.noise.spec(job.door_count)
    return evolve_trajectory(
        spec, noise, cfg.beta_S_J, cfg.dt, cfg.t_end, cfg.stride, cfg.pairs_for(job.L),
        correlations=cfg.correlations, positivity_every=cfg.positivity_every,
        seed=job.realization, extra_metadata=extra,
        stop_when_unfrozen=cfg.analysis.delta if stop_when_unfrozen else None,
    )


def _worker(payload):
    cfg_dict, job, stop = payload
    cfg = parse_config(cfg_dict)
    try:
        return job.index, run_job(cfg, job, stop), None
    except NumericalIntegrityError as exc:
        return job.index, None, {"kind": "numerical-integrity", "message": str(exc), "time": exc.time}
    except Exception as exc:  # reported in the manifest, never swallowed silently
        return job.index, None, {"kind": type(exc).__name__, "message": str(exc), "trace": traceback.format_exc()}


@dataclass
class RunResult:
    output_dir: Path
    manifest: dict
    trajectories: dict[str, Trajectory]
    analysis: dict

    @property
    def failed(self) -> list[dict]:
        return self.manifest["failed_jobs"]


def run_experiment(
    cfg: ExperimentConfig, *, output_dir: str | Path | None = None, max_jobs: int | None = None,
    stop_when_unfrozen: bool = False,
) -> RunResult:
    """Run every (L, door count, realization) job and write artifacts.

    Jobs are independent; results are folded in job-index order so the output
    does not depend on scheduling.
    """
    out = Path(output_dir or cfg.output_dir)
    (out / "trajectories").mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.to_yaml())
    jobs = expand_jobs(cfg)
    workers = max_jobs or cfg.max_jobs or default_jobs()
    payloads = [(cfg.model_dump(mode="json"), j, stop_when_unfrozen) for j in jobs]
    results: dict[int, tuple] = {}
    if workers == 1 or len(jobs) == 1:
        for p in payloads:
            idx, traj, err = _worker(p)
            results[idx] = (traj, err)
            log.info("job %s done%s", jobs[idx].name, "" if err is None else f" (failed: {err['kind']})")
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            for idx, traj, err in pool.map(_worker, payloads):
                results[idx] = (traj, err)

    trajectories: dict[str, Trajectory] = {}
    job_table, failed = [], []
    for job in jobs:
        traj, err = results[job.index]
        entry = {"index": job.index, "name": job.name, "L": job.L, "door_count": job.door_count,
                 "realization": job.realization}
        if err is None:
            traj.to_csv(out / "trajectories" / f"{job.name}.csv")
            traj.to_json(out / "trajectories" / f"{job.name}.json")
            trajectories[job.name] = traj
            entry.update(status="ok", file=f"trajectories/{job.name}.csv", integrity=traj.metadata["integrity"])
        else:
            entry.update(status="failed", error=err)
            failed.append(entry)
        job_table.append(entry)

    analysis = analyze_trajectories(cfg, jobs, trajectories, out)
    manifest = {
        "software": {"package": "entfreeze", "version": __version__},
        "config_hash": cfg.config_hash(),
        "config": cfg.model_dump(mode="json"),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "jobs": job_table,
        "failed_jobs": failed,
        "complete": not failed,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable))
    return RunResult(out, manifest, trajectories, analysis)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, float) and not np.isfinite(o):
        return str(o)
    raise TypeError(type(o).__name__)


def group_trajectories(jobs: list[Job], trajectories: dict[str, Trajectory]) -> dict[str, list[Trajectory]]:
    groups: dict[str, list[Trajectory]] = {}
    for job in jobs:
        if job.name in trajectories:
            groups.setdefault(job.group, []).append(trajectories[job.name])
    return groups


def analyze_trajectories(
    cfg: ExperimentConfig, jobs: list[Job], trajectories: dict[str, Trajectory], out: Path
) -> dict:
    """Freeze reports per group, plus fits and verdicts where the sweep allows them."""
    adir = out / "analysis"
    adir.mkdir(parents=True, exist_ok=True)
    a = cfg.analysis
    groups = group_trajectories(jobs, trajectories)
    group_meta = {j.group: j for j in jobs}
    reports: dict[str, FreezeReport] = {}
    for g, trajs in groups.items():
        if cfg.disorder is not None:
            traj = quenched_average(trajs)
            (out / "quenched").mkdir(exist_ok=True)
            traj.to_csv(out / "quenched" / f"{g}.csv")
            traj.to_json(out / "quenched" / f"{g}.json")
        else:
            traj = trajs[0]
        job = group_meta[g]
        doors = [d for d, _ in cfg.noise.spec(job.door_count).doors]
        reports[g] = freeze_report(traj, a.delta, a.t_l, L=job.L, doors=doors, label=g)

    summary: dict = {"reports": {g: r.to_dict() for g, r in reports.items()}}
    write_tau_table(list(reports.values()), adir / "tau_table.csv")

    hierarchy = {}
    for g, r in reports.items():
        try:
            ok, viol = hierarchy_check(r)
            hierarchy[g] = {"monotone": ok, "first_violation": viol}
        except EntfreezeError as exc:
            hierarchy[g] = {"error": str(exc)}
    summary["hierarchy"] = hierarchy

    fits = {}
    for g, r in reports.items():
        pts = [(i, t) for i, t in r.nn_taus().items()]
        try:
            fit = fit_freeze_parabola(pts, a.i_min)
        except FitError:
            continue
        entry = fit.to_dict()
        if a.lr_velocity is not None:
            entry["lr_bound"] = {i: lr_freezing_bound(i, a.lr_velocity) for i, _ in pts}
        fits[g] = entry
    summary["fits"] = fits

    if cfg.noise.door_counts is None and len(cfg.chain.sizes) >= 2:
        by_L = {group_meta[g].L: r for g, r in reports.items()}
        if len(by_L) >= 2:
            verdicts = scale_invariance_report(by_L, a.tolerance)
            summary["scale_invariance"] = {f"{i},{j}": v for (i, j), v in verdicts.items()}

    if cfg.noise.door_counts is not None:
        sweep = {}
        for L in cfg.chain.sizes:
            rows = sorted(
                (group_meta[g].door_count, r) for g, r in reports.items() if group_meta[g].L == L
            )
            per_pair = {}
            for p in sorted(rows[0][1].pairs) if rows else []:
                series = [(n, r.pairs[p].tau_F) for n, r in rows]
                item = {"tau_F": {str(n): t for n, t in series}}
                usable = [(n, t) for n, t in series if t is not None]
                try:
                    coef, se, _ = fit_quadratic([n for n, _ in usable], [t for _, t in usable])
                    item["quadratic"] = {"coef": coef.tolist(), "se": se.tolist()}
                except FitError:
                    pass
                per_pair[f"{p[0]},{p[1]}"] = item
            sweep[f"L{L}"] = per_pair
        summary["door_sweep"] = sweep

    dump_json({g: r.to_dict() for g, r in reports.items()}, adir / "freeze_reports.json")
    dump_json(fits, adir / "freeze_fits.json")
    dump_json({k: v for k, v in summary.items() if k not in ("reports", "fits")}, adir / "summary.json")
    return summary


def analyze_run_dir(run_dir: str | Path) -> dict:
    """Re-run the analysis on trajectories stored in ``run_dir``."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    cfg = parse_config(manifest["config"])
    jobs = expand_jobs(cfg)
    trajectories = {}
    for job in jobs:
        path = run_dir / "trajectories" / f"{job.name}.json"
        if path.exists():
            trajectories[job.name] = Trajectory.from_json(path)
        else:
            csv_path = path.with_suffix(".csv")
            if csv_path.exists():
                trajectories[job.name] = Trajectory.from_csv(csv_path)
    return analyze_trajectories(cfg, jobs, trajectories, run_dir)


def run_config_file(path: str | Path, **kw) -> RunResult:
    return run_experiment(load_config(path), **kw)
