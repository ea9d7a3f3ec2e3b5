"""Multi-seed orchestration for one scenario and the artifacts it writes.

Files written to the output directory::

    trace_seed<S>.csv         t,queue,Q,age,server,cleared     (one row per step and queue)
    trace_seed<S>_<engine>.csv                                  (coupled model: standard and dual)
    regret_seed<S>.csv        window,start,length,queue,regret,clears,best_fixed,best_server
    potential_seed<S>.csv     window,t,phi,z,tau_0,...
    stability_<series>.csv    t,mean,m1,se1,m2,se2,m4,se4
    summary.json

Seeds can run in worker processes; results are merged in seed order, so the
summary does not depend on ``jobs``.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..central import build_central_scheduler
from ..errors import InsufficientData
from ..metrics import (
    CheckpointSeries,
    PotentialSeries,
    classify_stability,
    fixed_windows,
    linear_slope,
    log_checkpoints,
    square_windows,
)
from ..model import feasibility_status, max_slack, prefix_surplus
from ..sim.runner import run_coupled, simulate
from ..sim.streams import ROLE_COORDINATOR, role_rng
from ..strategies import (
    CentralPolicy,
    Exp3P,
    FixedServer,
    IndependentPolicy,
    UniformRandom,
    make_nash_coordinator,
    nash_audit,
)
from .config import ScenarioConfig, window_length

REGRET_HEADER = ["window", "start", "length", "queue", "regret", "clears", "best_fixed", "best_server"]
DEFAULT_POTENTIAL_WINDOW = 1024
# stream index for picking which steps get the equilibrium audit
NASH_SAMPLE_INDEX = 1


def make_policy(cfg: ScenarioConfig, seed: int, window: Optional[int]):
    p = cfg.policy
    spec = cfg.spec
    if p.kind == "central":
        return CentralPolicy(build_central_scheduler(spec), spec, role_rng(seed, ROLE_COORDINATOR))
    if p.kind == "nash_coordinator":
        return make_nash_coordinator(spec, p.n_root, seed)
    if p.strategy == "fixed":
        servers = list(p.servers)
        return IndependentPolicy([FixedServer(j) for j in servers])
    if p.strategy == "top_server":
        return IndependentPolicy([FixedServer(0) for _ in range(spec.n)])
    if p.strategy == "uniform":
        return IndependentPolicy.build(spec.n, seed, lambda i, rng: UniformRandom(spec.m, rng))
    return IndependentPolicy.build(
        spec.n, seed,
        lambda i, rng: Exp3P(spec.m, window, p.delta, rng, freeze=p.freeze, gamma=p.gamma, alpha=p.alpha),
    )


def checkpoint_times(cfg: ScenarioConfig) -> np.ndarray:
    if cfg.checkpoints == "log":
        return log_checkpoints(cfg.horizon)
    return np.array(sorted(set(cfg.checkpoints)), dtype=np.int64)


def _audit_windows(cfg: ScenarioConfig, window: Optional[int]):
    a = cfg.audit
    if a.windows == "squares":
        return square_windows()
    if a.windows == "fixed":
        return fixed_windows(a.length or window)
    return None


@dataclass
class SeedResult:
    seed: int
    checkpoints: dict[str, np.ndarray]
    queue_checkpoints: np.ndarray  # (checkpoints, n)
    regret: list[tuple]
    nash_audited: int = 0
    nash_violations: int = 0
    coupled_equal: Optional[bool] = None
    files: list[str] = field(default_factory=list)


def _write_regret(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REGRET_HEADER)
        w.writerows(rows)


def run_seed(cfg: ScenarioConfig, seed: int, window: Optional[int]) -> SeedResult:
    """Run one seed, write its files and return what the summary needs."""
    out = Path(cfg.out_dir)
    times = checkpoint_times(cfg)
    policy = make_policy(cfg, seed, window)
    files: list[str] = []
    pot_window = cfg.audit.potential_window or window or DEFAULT_POTENTIAL_WINDOW
    nash_audited = nash_bad = 0
    coupled_equal = None
    if cfg.model == "coupled":
        std, dual = run_coupled(cfg.spec, policy, cfg.horizon, seed)
        coupled_equal = bool(np.array_equal(std.age, dual.age))
        trace = std
        if cfg.write_traces:
            for tr in (std, dual):
                name = f"trace_seed{seed}_{tr.model}.csv"
                tr.write_csv(out / name)
                files.append(name)
    else:
        sampled: set[int] = set()
        hook = None
        if cfg.audit.nash_steps:
            pick = role_rng(seed, ROLE_COORDINATOR, NASH_SAMPLE_INDEX)
            sampled = set(pick.choice(cfg.horizon, size=cfg.audit.nash_steps, replace=False).tolist())

            def hook(outcome, active):
                nonlocal nash_audited, nash_bad
                if outcome.t in sampled:
                    nash_audited += 1
                    if nash_audit(cfg.spec, outcome.choices):
                        nash_bad += 1

        trace = simulate(cfg.spec, policy, cfg.horizon, seed, cfg.model,
                         windows=_audit_windows(cfg, window), on_step=hook)
        if cfg.write_traces:
            name = f"trace_seed{seed}.csv"
            trace.write_csv(out / name)
            files.append(name)
    rows = [tuple(asdict(r).values()) for r in trace.regret_rows]
    if cfg.audit.windows != "none":
        name = f"regret_seed{seed}.csv"
        _write_regret(out / name, rows)
        files.append(name)
    name = f"potential_seed{seed}.csv"
    PotentialSeries.from_ages(cfg.spec.lam, trace.age, pot_window).write_csv(out / name)
    files.append(name)
    return SeedResult(
        seed=seed,
        checkpoints={s: trace.checkpoint_values(s, times) for s in cfg.series},
        queue_checkpoints=trace.q[times],
        regret=rows,
        nash_audited=nash_audited,
        nash_violations=nash_bad,
        coupled_equal=coupled_equal,
        files=files,
    )


def _run_seed_star(args):
    return run_seed(*args)


def run_seeds(cfg: ScenarioConfig, window: Optional[int], jobs: int = 1) -> list[SeedResult]:
    tasks = [(cfg, s, window) for s in cfg.seeds]
    if jobs <= 1 or len(tasks) == 1:
        results = [run_seed(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_seed_star, tasks))
    return sorted(results, key=lambda r: r.seed)


def _stability(name: str, times: np.ndarray, values: np.ndarray):
    data = CheckpointSeries(name, times, values)
    try:
        return classify_stability(data), None
    except InsufficientData as exc:
        report = classify_stability(data, min_seeds=1, min_horizon=1)
        return report, str(exc)


def regret_summary(results: list[SeedResult], n: int, tail: int) -> dict:
    if not results or not results[0].regret:
        return {}
    regrets = np.array([r[4] for res in results for r in res.regret], dtype=float)
    per_seed_windows = []
    for res in results:
        by_window: dict[int, list[int]] = {}
        for r in res.regret:
            by_window.setdefault(r[0], []).append(r[4])
        per_seed_windows.append([max(v) == 0 for _, v in sorted(by_window.items())])
    tail_flags = [f for flags in per_seed_windows for f in flags[-tail:]]
    q = np.quantile(regrets, [0.5, 0.9, 0.99])
    return {
        "windows_per_seed": int(min(len(f) for f in per_seed_windows)),
        "regret_q50": float(q[0]),
        "regret_q90": float(q[1]),
        "regret_q99": float(q[2]),
        "regret_max": float(regrets.max()),
        "tail_windows": tail,
        "tail_zero_regret_fraction": float(np.mean(tail_flags)) if tail_flags else None,
    }


def summarize(cfg: ScenarioConfig, results: list[SeedResult], window: Optional[int]) -> dict:
    times = checkpoint_times(cfg)
    spec = cfg.spec
    slack = max_slack(spec)
    stability = {}
    for s in cfg.series:
        values = np.stack([r.checkpoints[s] for r in results])
        report, note = _stability(s, times, values)
        report.write_csv(Path(cfg.out_dir) / f"stability_{s.replace(':', '_')}.csv")
        entry = report.to_dict()
        if note:
            entry["note"] = note
        stability[s] = entry
    queue_means = np.stack([r.queue_checkpoints for r in results]).mean(axis=0)
    summary = {
        "name": cfg.name,
        "model": cfg.model,
        "horizon": cfg.horizon,
        "seeds": [r.seed for r in results],
        "lambda": list(spec.lam),
        "mu": list(spec.mu),
        "feasibility": feasibility_status(spec),
        "slack": slack.eta,
        "prefix_surplus": prefix_surplus(spec),
        "policy": {k: v for k, v in asdict(cfg.policy).items() if v is not None},
        "window": window,
        "stability": stability,
        "queue_slopes": [linear_slope(times, queue_means[:, i]) for i in range(spec.n)],
        "regret": regret_summary(results, spec.n, cfg.audit.tail),
    }
    if cfg.audit.nash_steps:
        summary["nash"] = {
            "steps_audited": sum(r.nash_audited for r in results),
            "steps_with_violations": sum(r.nash_violations for r in results),
        }
    if cfg.model == "coupled":
        summary["coupled_ages_equal"] = all(r.coupled_equal for r in results)
    return summary


def run_scenario(cfg: ScenarioConfig, jobs: int = 1) -> dict:
    """Run every seed of a scenario, write all artifacts, return the summary dict."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    window = window_length(cfg) if cfg.policy.window is not None else None
    results = run_seeds(cfg, window, jobs)
    summary = summarize(cfg, results, window)
    with open(Path(cfg.out_dir) / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
