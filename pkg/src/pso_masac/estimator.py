"""Scikit-learn style wrapper around a full multi-agent training run."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .config import RunConfig
from .env import EnvConfig
from .exploration import ExplorationConfig
from .harness import evaluate, run_training
from .pso import PsoConfig
from .sac import SacConfig, greedy_action


class MultiAgentSAC(BaseEstimator):
    """Independent per-agent SAC learners trained on the coverage task.

    ``fit`` runs the configured number of episodes (nothing is written to
    disk unless ``output_dir`` is set).  ``predict`` maps a stack of
    per-agent observations to deterministic actions and ``score`` returns the
    mean greedy team return.

    >>> est = MultiAgentSAC(env_config=EnvConfig(width=6, height=6, num_agents=2, max_steps=5),
    ...                     sac_config=SacConfig(batch_size=4, warmup_steps=4, hidden=(8,)),
    ...                     explore_config=ExplorationConfig(mode="epsilon_random"),
    ...                     episodes=2).fit()
    >>> est.predict(np.zeros((2, est.env_config.obs_dim))).shape
    (2, 2)
    """

    def __init__(self, env_config=None, sac_config=None, pso_config=None, explore_config=None,
                 episodes=300, random_state=0, output_dir=None, log_every=1):
        self.env_config = env_config
        self.sac_config = sac_config
        self.pso_config = pso_config
        self.explore_config = explore_config
        self.episodes = episodes
        self.random_state = random_state
        self.output_dir = output_dir
        self.log_every = log_every

    def run_config(self) -> RunConfig:
        return RunConfig(
            env=self.env_config or EnvConfig(),
            sac=self.sac_config or SacConfig(),
            pso=self.pso_config or PsoConfig(),
            explore=self.explore_config or ExplorationConfig(),
            episodes=self.episodes,
            seed=int(self.random_state or 0),
            output_dir=self.output_dir or "runs/estimator",
            log_every=self.log_every,
        )

    def fit(self, X=None, y=None):
        cfg = self.run_config()
        records, agents = run_training(cfg, write=self.output_dir is not None)
        self.records_ = records
        self.agents_ = agents
        self.team_returns_ = np.array([r.team_return for r in records])
        self.n_features_in_ = cfg.env.obs_dim
        return self

    def predict(self, X):
        """Greedy actions for observations of shape ``(n_agents, obs_dim)``
        or ``(n_samples, n_agents, obs_dim)``."""
        check_is_fitted(self, "agents_")
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-2:] != (len(self.agents_), self.n_features_in_):
            raise ValueError(f"expected observations of shape (..., {len(self.agents_)}, {self.n_features_in_})")
        return np.stack([greedy_action(agent, X[..., i, :]) for i, agent in enumerate(self.agents_)], axis=-2)

    def score(self, X=None, y=None, episodes=5):
        check_is_fitted(self, "agents_")
        return evaluate(self.agents_, self.run_config().env, episodes, seed=self.random_state)["mean_team_return"]
