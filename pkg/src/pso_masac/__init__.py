"""PSO-guided exploration for multi-agent Soft Actor-Critic coverage planning."""

from .config import RunConfig, desk_preset, full_preset
from .env import Action, AgentPose, CoverageState, EnvConfig, StepResult, footprint, observe, reset, step
from .estimator import MultiAgentSAC
from .exploration import ExplorationConfig, PlanCache, epsilon_at, select_actions
from .harness import EpisodeRecord, compare, evaluate, train
from .nn import AdamState, GradBundle, Mlp, adam_step, backward, forward
from .pso import ParticleSwarmOptimizer, PsoConfig, SwarmResult, optimize, plan_fitness, propose_plan
from .sac import ReplayBuffer, SacAgent, SacConfig, Transition

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AdamState",
    "AgentPose",
    "CoverageState",
    "EnvConfig",
    "EpisodeRecord",
    "ExplorationConfig",
    "GradBundle",
    "Mlp",
    "MultiAgentSAC",
    "ParticleSwarmOptimizer",
    "PlanCache",
    "PsoConfig",
    "ReplayBuffer",
    "RunConfig",
    "SacAgent",
    "SacConfig",
    "StepResult",
    "SwarmResult",
    "Transition",
    "adam_step",
    "backward",
    "compare",
    "desk_preset",
    "epsilon_at",
    "evaluate",
    "footprint",
    "forward",
    "observe",
    "optimize",
    "full_preset",
    "plan_fitness",
    "propose_plan",
    "reset",
    "select_actions",
    "step",
    "train",
]
