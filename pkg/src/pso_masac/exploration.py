"""Epsilon-greedy action selection with a swappable exploratory branch.

``epsilon_pso`` replaces the uniform-random exploratory action with the next
step of a PSO-optimized joint plan.  Plans are cached and consumed before the
swarm is run again, which keeps the cost of exploration bounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ._validation import as_generator, check_interval, check_positive
from .env import Action, CoverageState, EnvConfig, observe
from .pso import PsoConfig, propose_plan
from .sac import sample_action

MODES = ("policy_only", "epsilon_random", "epsilon_pso")


@dataclass(frozen=True)
class ExplorationConfig:
    mode: str = "epsilon_pso"
    epsilon_start: float = 0.3
    epsilon_end: float = 0.05
    decay_steps: int = 10_000
    replan_interval: int | None = None  # None: consume the whole plan
    plan_follow_env: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        check_interval(self.epsilon_start, "epsilon_start", 0.0, 1.0)
        check_interval(self.epsilon_end, "epsilon_end", 0.0, self.epsilon_start)
        check_positive(self.decay_steps, "decay_steps", integer=True)
        if self.replan_interval is not None:
            check_positive(self.replan_interval, "replan_interval", integer=True)


@dataclass
class PlanCache:
    plan: list = field(default_factory=list)
    cursor: int = 0
    origin_step: int = 0
    pso_calls: int = 0

    def clear(self):
        """Drop the cached plan; call at every episode reset."""
        self.plan = []
        self.cursor = 0
        self.origin_step = 0

    def usable(self, state: CoverageState, limit: int) -> bool:
        return bool(self.plan) and self.cursor < limit and state.step_count >= self.origin_step


def epsilon_at(step: int, cfg: ExplorationConfig) -> float:
    """Linear decay from ``epsilon_start`` to ``epsilon_end`` over ``decay_steps``."""
    if step >= cfg.decay_steps:
        return cfg.epsilon_end
    frac = step / cfg.decay_steps
    return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)


def select_actions(state: CoverageState, agents, cache: PlanCache, cfg: ExplorationConfig,
                   pso_cfg: PsoConfig, env_cfg: EnvConfig, rng, step: int = 0, pso_rng=None):
    """Pick the team's joint action for one environment step.

    One uniform draw per step decides for the whole team: below the current
    epsilon the exploratory branch is used, otherwise every agent samples its
    own policy.  Returns ``(joint_action, tag)`` with ``tag`` one of
    ``"policy"``, ``"random"`` or ``"pso"``.
    """
    rng = as_generator(rng)
    pso_rng = rng if pso_rng is None else pso_rng
    u = rng.random()
    if cfg.mode == "policy_only" or u >= epsilon_at(step, cfg):
        joint = tuple(
            Action(*sample_action(agent, observe(state, i, env_cfg))[0]) for i, agent in enumerate(agents)
        )
        if cfg.plan_follow_env and cache.plan:
            cache.cursor += 1
        return joint, "policy"

    if cfg.mode == "epsilon_random":
        return tuple(Action(rng.random(), rng.random()) for _ in range(env_cfg.num_agents)), "random"

    limit = pso_cfg.horizon if cfg.replan_interval is None else min(cfg.replan_interval, pso_cfg.horizon)
    if not cache.usable(state, limit):
        cache.plan = propose_plan(state, env_cfg, pso_cfg, pso_rng)
        cache.cursor = 0
        cache.origin_step = state.step_count
        cache.pso_calls += 1
    joint = cache.plan[cache.cursor]
    cache.cursor += 1
    return joint, "pso"
