"""Per-agent Soft Actor-Critic with a fixed entropy temperature.

Each :class:`SacAgent` owns its actor, twin critics, target critics, Adam
states, replay buffer and random generators; nothing mutable is shared
between agents.

Actions live in ``[0, 1]^2`` (what the environment executes).  The policy
samples ``u ~ N(mu, sigma)`` and executes ``(tanh(u) + 1) / 2``.  Critics see
the action recentred to ``[-1, 1]``, i.e. ``2a - 1 = tanh(u)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from . import serialization
from ._validation import as_generator, check_interval, check_positive
from .nn import (
    AdamState,
    Mlp,
    adam_arrays,
    adam_from,
    adam_meta,
    adam_step,
    backward,
    forward,
    mlp_arrays,
    mlp_from_arrays,
)

ACTION_DIM = 2
LOG_2PI = math.log(2.0 * math.pi)
TANH_EPS = 1e-6


@dataclass(frozen=True)
class SacConfig:
    gamma: float = 0.99
    tau: float = 0.005
    alpha: float = 0.2
    batch_size: int = 256
    buffer_capacity: int = 100_000
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    updates_per_env_step: int = 1
    warmup_steps: int = 1000
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    hidden: tuple = (128, 128)

    def __post_init__(self):
        check_interval(self.gamma, "gamma", 0.0, 1.0, hi_open=True)
        check_interval(self.tau, "tau", 0.0, 1.0, lo_open=True)
        check_interval(self.alpha, "alpha", 0.0, np.inf)
        for name in ("batch_size", "buffer_capacity"):
            check_positive(getattr(self, name), name, integer=True)
        check_positive(self.actor_lr, "actor_lr")
        check_positive(self.critic_lr, "critic_lr")
        if self.updates_per_env_step < 0 or self.warmup_steps < 0:
            raise ValueError("updates_per_env_step and warmup_steps must be >= 0")
        if not self.log_std_min < self.log_std_max:
            raise ValueError("log_std_min must be < log_std_max")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray  # executed action in [0, 1]^2
    reward: float
    next_state: np.ndarray
    done: bool  # true only when the episode ended by full coverage


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class BufferUnderfilled(ValueError):
    pass


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity, obs_dim, action_dim=ACTION_DIM, rng=None):
        check_positive(capacity, "capacity", integer=True)
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.rng = as_generator(rng)
        # observations are in [-1, 1]; float32 halves the footprint
        self.states = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.next_states = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.cursor = 0
        self.occupancy = 0

    def __len__(self):
        return self.occupancy

    def push(self, t: Transition):
        k = self.cursor
        self.states[k] = t.state
        self.actions[k] = t.action
        self.rewards[k] = t.reward
        self.next_states[k] = t.next_state
        self.dones[k] = float(t.done)
        self.cursor = (k + 1) % self.capacity
        self.occupancy = min(self.occupancy + 1, self.capacity)

    def sample_indices(self, n, rng=None):
        if self.occupancy < n:
            raise BufferUnderfilled(f"cannot sample {n} transitions from a buffer holding {self.occupancy}")
        rng = self.rng if rng is None else as_generator(rng)
        return rng.integers(0, self.occupancy, size=n)

    def sample(self, n, rng=None) -> Batch:
        idx = self.sample_indices(n, rng)
        return Batch(
            self.states[idx].astype(np.float64),
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx].astype(np.float64),
            self.dones[idx],
        )

    def transitions(self):
        """Stored transitions, oldest first."""
        start = self.cursor if self.occupancy == self.capacity else 0
        order = [(start + k) % self.capacity for k in range(self.occupancy)]
        return [
            Transition(self.states[k].astype(np.float64), self.actions[k].copy(), float(self.rewards[k]),
                       self.next_states[k].astype(np.float64), bool(self.dones[k]))
            for k in order
        ]


def buffer_push(buffer: ReplayBuffer, t: Transition):
    buffer.push(t)


def buffer_sample(buffer: ReplayBuffer, n, rng=None) -> Batch:
    return buffer.sample(n, rng)


class SacAgent:
    def __init__(self, obs_dim, config: SacConfig = SacConfig(), rng=None, buffer_rng=None):
        self.obs_dim = int(obs_dim)
        self.config = config
        self.rng = as_generator(rng)
        hidden = list(config.hidden)
        self.actor = Mlp([obs_dim, *hidden, 2 * ACTION_DIM], rng=self.rng)
        self.critic1 = Mlp([obs_dim + ACTION_DIM, *hidden, 1], rng=self.rng)
        self.critic2 = Mlp([obs_dim + ACTION_DIM, *hidden, 1], rng=self.rng)
        self.target1 = self.critic1.copy()
        self.target2 = self.critic2.copy()
        self.actor_opt = AdamState.for_net(self.actor, lr=config.actor_lr)
        self.critic1_opt = AdamState.for_net(self.critic1, lr=config.critic_lr)
        self.critic2_opt = AdamState.for_net(self.critic2, lr=config.critic_lr)
        self.buffer = ReplayBuffer(config.buffer_capacity, obs_dim, rng=buffer_rng)
        self.updates = 0

    def networks(self):
        return {
            "actor": self.actor,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "target1": self.target1,
            "target2": self.target2,
        }


class PolicySample(NamedTuple):
    actions: np.ndarray  # executed, in [0, 1]
    squashed: np.ndarray  # tanh(u), in (-1, 1)
    log_prob: np.ndarray
    mean: np.ndarray
    log_std: np.ndarray
    std: np.ndarray
    raw_log_std: np.ndarray
    noise: np.ndarray
    cache: list


def squash_log_prob(noise, log_std, squashed):
    """Log density of the executed action given frozen Gaussian noise.

    Gaussian term in ``u``, tanh change of variables, and ``log 2`` per
    dimension for the affine map ``a = (tanh(u) + 1) / 2``.
    """
    gauss = -0.5 * noise * noise - log_std - 0.5 * LOG_2PI
    correction = np.log(1.0 - squashed * squashed + TANH_EPS)
    return (gauss - correction).sum(axis=-1) + ACTION_DIM * math.log(2.0)


def policy_sample(agent: SacAgent, states, noise) -> PolicySample:
    out, cache = forward(agent.actor, states, return_cache=True)
    out = np.atleast_2d(out)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("actor produced non-finite outputs")
    mean = out[:, :ACTION_DIM]
    raw_log_std = out[:, ACTION_DIM:]
    log_std = np.clip(raw_log_std, agent.config.log_std_min, agent.config.log_std_max)
    std = np.exp(log_std)
    u = mean + std * noise
    squashed = np.tanh(u)
    log_prob = squash_log_prob(noise, log_std, squashed)
    return PolicySample((squashed + 1.0) * 0.5, squashed, log_prob, mean, log_std, std, raw_log_std,
                        noise, cache)


def sample_action(agent: SacAgent, obs, rng=None):
    """Draw one executed action and its log-probability."""
    rng = agent.rng if rng is None else as_generator(rng)
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (agent.obs_dim,):
        raise ValueError(f"observation has shape {obs.shape}, expected ({agent.obs_dim},)")
    noise = rng.standard_normal((1, ACTION_DIM))
    s = policy_sample(agent, obs[None, :], noise)
    return s.actions[0], float(s.log_prob[0])


def greedy_action(agent: SacAgent, obs):
    out = forward(agent.actor, obs)
    return (np.tanh(out[..., :ACTION_DIM]) + 1.0) * 0.5


def _critic_input(states, squashed):
    return np.concatenate([states, squashed], axis=1)


def _q(net, states, squashed):
    return forward(net, _critic_input(states, squashed))[:, 0]


def critic_targets(agent: SacAgent, batch: Batch, noise) -> np.ndarray:
    cfg = agent.config
    nxt = policy_sample(agent, batch.next_states, noise)
    q_next = np.minimum(_q(agent.target1, batch.next_states, nxt.squashed),
                        _q(agent.target2, batch.next_states, nxt.squashed))
    return batch.rewards + cfg.gamma * (1.0 - batch.dones) * (q_next - cfg.alpha * nxt.log_prob)


def critic_update(agent: SacAgent, batch: Batch, rng=None) -> float:
    """One Adam step on both critics toward the soft Bellman target.

    Returns the mean of the two critics' pre-update MSE losses.
    """
    rng = agent.rng if rng is None else as_generator(rng)
    n = batch.rewards.shape[0]
    y = critic_targets(agent, batch, rng.standard_normal((n, ACTION_DIM)))
    x = _critic_input(batch.states, 2.0 * batch.actions - 1.0)
    losses = []
    for net, opt in ((agent.critic1, agent.critic1_opt), (agent.critic2, agent.critic2_opt)):
        q, cache = forward(net, x, return_cache=True)
        err = q[:, 0] - y
        losses.append(float(np.mean(err * err)))
        grads = backward(net, x, (2.0 / n) * err[:, None], cache=cache, wrt_input=False)
        adam_step(net, grads, opt)
    return 0.5 * (losses[0] + losses[1])


def actor_loss_and_grad(agent: SacAgent, states, noise):
    """Reparameterized actor loss ``mean(alpha * log_pi - min Q)`` and its
    gradient with respect to the actor parameters, for frozen ``noise``."""
    cfg = agent.config
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    n = states.shape[0]
    s = policy_sample(agent, states, noise)
    x = _critic_input(states, s.squashed)
    q1, c1 = forward(agent.critic1, x, return_cache=True)
    q2, c2 = forward(agent.critic2, x, return_cache=True)
    q1, q2 = q1[:, 0], q2[:, 0]
    use1 = q1 <= q2
    q_min = np.where(use1, q1, q2)
    loss = float(np.mean(cfg.alpha * s.log_prob - q_min))

    # dL/d(tanh u) through the critic that attains the minimum
    up1 = np.where(use1, -1.0 / n, 0.0)[:, None]
    up2 = np.where(use1, 0.0, -1.0 / n)[:, None]
    d_sq = (backward(agent.critic1, x, up1, cache=c1, params=False).input[:, -ACTION_DIM:]
            + backward(agent.critic2, x, up2, cache=c2, params=False).input[:, -ACTION_DIM:])
    t = s.squashed
    one_m_t2 = 1.0 - t * t
    dlogp_du = 2.0 * t * one_m_t2 / (one_m_t2 + TANH_EPS)
    d_u = (cfg.alpha / n) * dlogp_du + d_sq * one_m_t2
    d_log_std = -cfg.alpha / n + d_u * s.std * noise
    in_range = (s.raw_log_std >= cfg.log_std_min) & (s.raw_log_std <= cfg.log_std_max)
    upstream = np.concatenate([d_u, d_log_std * in_range], axis=1)
    grads = backward(agent.actor, states, upstream, cache=s.cache, wrt_input=False)
    return loss, grads


def actor_update(agent: SacAgent, batch: Batch, rng=None, noise=None) -> float:
    rng = agent.rng if rng is None else as_generator(rng)
    n = batch.states.shape[0]
    if noise is None:
        noise = rng.standard_normal((n, ACTION_DIM))
    loss, grads = actor_loss_and_grad(agent, batch.states, noise)
    adam_step(agent.actor, grads, agent.actor_opt)
    return loss


def target_update(agent: SacAgent, tau=None):
    tau = agent.config.tau if tau is None else tau
    for target, critic in ((agent.target1, agent.critic1), (agent.target2, agent.critic2)):
        for pt, pc in zip(target.parameters(), critic.parameters()):
            pt *= 1.0 - tau
            pt += tau * pc


def update(agent: SacAgent):
    """Sample a batch from the agent's own buffer and run one full SAC update.

    Returns ``(critic_loss, actor_loss)``.
    """
    batch = agent.buffer.sample(agent.config.batch_size)
    closs = critic_update(agent, batch)
    aloss = actor_update(agent, batch)
    target_update(agent)
    agent.updates += 1
    return closs, aloss


# -- checkpoints ------------------------------------------------------------

_NETS = ("actor", "critic1", "critic2", "target1", "target2")
_OPTS = ("actor_opt", "critic1_opt", "critic2_opt")


def agent_to_bytes(agent: SacAgent) -> bytes:
    cfg = asdict(agent.config)
    cfg["hidden"] = list(agent.config.hidden)
    meta = {
        "config": cfg,
        "obs_dim": agent.obs_dim,
        "updates": agent.updates,
        "nets": {name: {"sizes": net.sizes, "activation": net.activation} for name, net in agent.networks().items()},
        "opts": {name: adam_meta(getattr(agent, name)) for name in _OPTS},
    }
    arrays = []
    for name in _NETS:
        arrays.extend(mlp_arrays(getattr(agent, name), prefix=f"{name}/"))
    for name in _OPTS:
        arrays.extend(adam_arrays(getattr(agent, name), prefix=f"{name}/"))
    return serialization.dumps("sac_agent", meta, arrays)


def agent_from_bytes(data: bytes, rng=None) -> SacAgent:
    _, meta, arrays = serialization.loads(data, kind="sac_agent")
    cfg = dict(meta["config"])
    cfg["hidden"] = tuple(cfg["hidden"])
    config = SacConfig(**cfg)
    agent = SacAgent.__new__(SacAgent)
    agent.obs_dim = meta["obs_dim"]
    agent.config = config
    agent.rng = as_generator(rng)
    agent.updates = meta["updates"]
    grouped = {}
    for name, arr in arrays:
        group, _ = name.split("/", 1)
        grouped.setdefault(group, []).append((name, arr))
    for name in _NETS:
        spec = meta["nets"][name]
        setattr(agent, name, mlp_from_arrays(spec["sizes"], spec["activation"], grouped[name]))
    for name in _OPTS:
        setattr(agent, name, adam_from(meta["opts"][name], grouped[name]))
    agent.buffer = ReplayBuffer(config.buffer_capacity, agent.obs_dim)
    return agent


def save_agent(agent: SacAgent, path):
    with open(path, "wb") as fh:
        fh.write(agent_to_bytes(agent))


def load_agent(path, rng=None) -> SacAgent:
    with open(path, "rb") as fh:
        return agent_from_bytes(fh.read(), rng)
