"""Seeded training runs, mode comparisons and greedy evaluation.

Seeding: the master seed feeds ``numpy.random.SeedSequence(seed)``, whose
four spawned children are, in order, the ``env``, ``policy``, ``pso`` and
``buffer`` streams.  The policy and buffer streams spawn one child per agent
(network init + action noise, and replay sampling respectively); the team's
exploration draws use a generator seeded from the policy stream itself.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import config as config_io
from .config import ConfigError, RunConfig
from .env import EnvConfig, reset, step
from .exploration import PlanCache, epsilon_at, select_actions
from .plot import moving_average, write_chart
from .sac import SacAgent, Transition, greedy_action, load_agent, save_agent, update

log = logging.getLogger(__name__)

CSV_HEADER = [
    "episode",
    "agent_id",
    "return",
    "team_return",
    "coverage_fraction",
    "steps",
    "epsilon",
    "pso_calls",
    "wall_time_ms",
]
STREAMS = ("env", "policy", "pso", "buffer")
SMOOTHING_WINDOW = 10


@dataclass
class EpisodeRecord:
    episode: int
    returns: list
    team_return: float
    coverage_fraction: float
    steps: int
    epsilon: float
    pso_calls: int
    wall_time_ms: float
    tags: dict


def split_seed(seed: int) -> dict:
    """Named, independent seed sequences derived from one master seed."""
    return dict(zip(STREAMS, np.random.SeedSequence(seed).spawn(len(STREAMS))))


def make_agents(cfg: RunConfig, streams: dict) -> list:
    n = cfg.env.num_agents
    policy_seeds = streams["policy"].spawn(n)
    buffer_seeds = streams["buffer"].spawn(n)
    return [
        SacAgent(cfg.env.obs_dim, cfg.sac, rng=np.random.default_rng(policy_seeds[i]),
                 buffer_rng=np.random.default_rng(buffer_seeds[i]))
        for i in range(n)
    ]


def _fmt(x) -> str:
    return repr(float(x))


def _csv_rows(rec: EpisodeRecord):
    for agent_id, ret in enumerate(rec.returns):
        yield [
            rec.episode,
            agent_id,
            _fmt(ret),
            _fmt(rec.team_return),
            _fmt(rec.coverage_fraction),
            rec.steps,
            _fmt(rec.epsilon),
            rec.pso_calls,
            f"{rec.wall_time_ms:.3f}",
        ]


def run_training(cfg: RunConfig, write=True, progress=None):
    """Full training loop.  Returns ``(records, agents)``.

    With ``write`` the metrics CSV is appended after every logged episode and
    the config plus one checkpoint per agent are written to
    ``cfg.output_dir`` at the end.
    """
    streams = split_seed(cfg.seed)
    env_rng = np.random.default_rng(streams["env"])
    explore_rng = np.random.default_rng(streams["policy"])
    pso_rng = np.random.default_rng(streams["pso"])
    agents = make_agents(cfg, streams)
    env_cfg = cfg.env

    out = Path(cfg.output_dir)
    writer = fh = None
    if write:
        out.mkdir(parents=True, exist_ok=True)
        config_io.save(cfg, out / "config.txt")
        fh = open(out / "metrics.csv", "w", newline="", encoding="utf-8")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)

    records = []
    total_steps = 0
    try:
        for episode in range(cfg.episodes):
            t0 = time.perf_counter()
            state, obs = reset(env_cfg, env_rng)
            cache = PlanCache()
            returns = np.zeros(env_cfg.num_agents)
            tags = {"policy": 0, "random": 0, "pso": 0}
            eps0 = epsilon_at(total_steps, cfg.explore)
            done = False
            while not done:
                joint, tag = select_actions(state, agents, cache, cfg.explore, cfg.pso, env_cfg,
                                            explore_rng, step=total_steps, pso_rng=pso_rng)
                tags[tag] += 1
                state, res = step(state, joint, env_cfg)
                for i, agent in enumerate(agents):
                    agent.buffer.push(Transition(obs[i], np.asarray(joint[i]), float(res.rewards[i]),
                                                 res.observations[i], res.terminated))
                returns += res.rewards
                obs = res.observations
                done = res.done
                total_steps += 1
                if total_steps >= cfg.sac.warmup_steps:
                    for agent in agents:
                        if len(agent.buffer) >= cfg.sac.batch_size:
                            for _ in range(cfg.sac.updates_per_env_step):
                                update(agent)
            rec = EpisodeRecord(
                episode=episode,
                returns=[float(r) for r in returns],
                team_return=float(returns.sum()),
                coverage_fraction=state.covered_count / env_cfg.n_cells,
                steps=state.step_count,
                epsilon=eps0,
                pso_calls=cache.pso_calls,
                wall_time_ms=(time.perf_counter() - t0) * 1e3,
                tags=tags,
            )
            records.append(rec)
            if writer is not None and (episode % cfg.log_every == 0 or episode == cfg.episodes - 1):
                writer.writerows(_csv_rows(rec))
                fh.flush()
            if progress is not None:
                progress(rec)
    finally:
        if fh is not None:
            fh.close()

    if write:
        save_checkpoint(agents, out / "checkpoint")
    return records, agents


def train(cfg: RunConfig, write=True, progress=None) -> list:
    """Train one team of agents; returns the per-episode records."""
    return run_training(cfg, write=write, progress=progress)[0]


def save_checkpoint(agents, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, agent in enumerate(agents):
        save_agent(agent, directory / f"agent_{i}.ckpt")
    return directory


def load_checkpoint(directory, num_agents) -> list:
    directory = Path(directory)
    return [load_agent(directory / f"agent_{i}.ckpt") for i in range(num_agents)]


def evaluate(agents, env_cfg: EnvConfig, episodes: int, seed=0) -> dict:
    """Roll out the deterministic policy ``(tanh(mean) + 1) / 2``, no exploration."""
    rng = np.random.default_rng(seed)
    team_returns, coverage = [], []
    for _ in range(episodes):
        state, obs = reset(env_cfg, rng)
        total, done = 0.0, False
        while not done:
            joint = tuple(greedy_action(agent, o) for agent, o in zip(agents, obs))
            state, res = step(state, joint, env_cfg)
            total += float(res.rewards.sum())
            obs, done = res.observations, res.done
        team_returns.append(total)
        coverage.append(state.covered_count / env_cfg.n_cells)
    return {
        "episodes": episodes,
        "mean_team_return": float(np.mean(team_returns)),
        "mean_coverage": float(np.mean(coverage)),
    }


def evaluate_checkpoint(run_dir, episodes: int, seed=0) -> dict:
    """Evaluate the agents saved by :func:`train` in ``run_dir``.

    ``run_dir`` may be the run directory or its ``checkpoint`` subdirectory.
    """
    run_dir = Path(run_dir)
    if run_dir.name == "checkpoint" and not (run_dir / "config.txt").exists():
        run_dir = run_dir.parent
    cfg = config_io.load(run_dir / "config.txt")
    agents = load_checkpoint(run_dir / "checkpoint", cfg.env.num_agents)
    return evaluate(agents, cfg.env, episodes, seed)


# -- comparison -------------------------------------------------------------


def curve_auc(team_returns, window=SMOOTHING_WINDOW) -> float:
    """Trapezoidal area under the smoothed learning curve (x = episode index)."""
    smoothed = moving_average(team_returns, window)
    if len(smoothed) < 2:
        return float(smoothed[0]) if len(smoothed) else 0.0
    return float(np.sum((smoothed[1:] + smoothed[:-1]) * 0.5))


def edge_means(team_returns, fraction=0.1):
    """Mean team return over the first and last ``fraction`` of episodes."""
    values = np.asarray(team_returns, dtype=np.float64)
    k = max(1, int(round(fraction * len(values))))
    return float(values[:k].mean()), float(values[-k:].mean())


def check_comparable(cfg_a: RunConfig, cfg_b: RunConfig):
    """Raise unless the two configs differ at most in ``explore.mode``."""
    b_as_a = replace(cfg_b, explore=replace(cfg_b.explore, mode=cfg_a.explore.mode),
                     output_dir=cfg_a.output_dir, seed=cfg_a.seed)
    if b_as_a != cfg_a:
        raise ConfigError("compared configs may differ only in explore.mode")


@dataclass
class ComparisonReport:
    modes: tuple
    seeds: list
    rows: list  # one dict per seed
    curves: dict  # mode -> list of per-seed team-return lists

    def wins(self) -> int:
        return sum(1 for row in self.rows if row["auc_diff"] > 0)


REPORT_HEADER = [
    "seed",
    "mode_a",
    "mode_b",
    "auc_a",
    "auc_b",
    "auc_diff",
    "first10_a",
    "last10_a",
    "first10_b",
    "last10_b",
]


def compare(cfg_a: RunConfig, cfg_b: RunConfig, seeds, out_dir=None, progress=None) -> ComparisonReport:
    """Train both configs on every seed and compare smoothed-curve AUCs.

    Writes ``report.csv``, ``curves.csv`` and ``comparison.svg`` to
    ``out_dir`` when given; each run's own artifacts go to
    ``out_dir/<mode>/seed_<n>``.
    """
    check_comparable(cfg_a, cfg_b)
    seeds = [int(s) for s in seeds]
    modes = (cfg_a.explore.mode, cfg_b.explore.mode)
    labels = modes if modes[0] != modes[1] else (f"{modes[0]}_a", f"{modes[1]}_b")
    out = Path(out_dir) if out_dir is not None else None
    curves = {labels[0]: [], labels[1]: []}
    rows = []
    for seed in seeds:
        stats = []
        for label, cfg in zip(labels, (cfg_a, cfg_b)):
            run_dir = out / label / f"seed_{seed}" if out is not None else Path(cfg.output_dir)
            run_cfg = replace(cfg, seed=seed, output_dir=str(run_dir))
            records = train(run_cfg, write=out is not None, progress=progress)
            team = [r.team_return for r in records]
            curves[label].append(team)
            stats.append((curve_auc(team), *edge_means(team)))
        rows.append({
            "seed": seed,
            "mode_a": labels[0],
            "mode_b": labels[1],
            "auc_a": stats[0][0],
            "auc_b": stats[1][0],
            "auc_diff": stats[0][0] - stats[1][0],
            "first10_a": stats[0][1],
            "last10_a": stats[0][2],
            "first10_b": stats[1][1],
            "last10_b": stats[1][2],
        })
        log.info("seed %d: auc %s=%.1f %s=%.1f", seed, labels[0], stats[0][0], labels[1], stats[1][0])
    report = ComparisonReport(labels, seeds, rows, curves)
    if out is not None:
        write_report(report, out)
    return report


def write_report(report: ComparisonReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for row in report.rows:
            writer.writerow([row[k] if isinstance(row[k], (int, str)) else _fmt(row[k]) for k in REPORT_HEADER])
    # mean raw team return across seeds, per mode and episode
    with open(out / "curves.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["episode", "mode", "team_return"])
        for label, runs in report.curves.items():
            mean = np.mean(np.asarray(runs, dtype=np.float64), axis=0)
            for episode, value in enumerate(mean):
                writer.writerow([episode, label, _fmt(value)])
    write_chart({label: np.mean(np.asarray(runs), axis=0) for label, runs in report.curves.items()},
                out / "comparison.svg", window=SMOOTHING_WINDOW)
