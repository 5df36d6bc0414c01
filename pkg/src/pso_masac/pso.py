"""Global-best particle swarm optimization (maximization).

The generic optimizer works on any ``fitness(vector) -> float``.  The
coverage-specific helpers encode one particle as an open-loop joint plan for
the whole team: ``horizon`` steps, each holding ``[lin, ang]`` for every agent
(step-major, then agent).  A plan's fitness is the team reward collected by
replaying it on a private copy of the environment state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_generator, check_interval, check_positive, check_vector
from .env import CoverageState, EnvConfig, advance, clone_state, is_terminal, joint_action_from_array


@dataclass(frozen=True)
class PsoConfig:
    num_particles: int = 50
    num_iterations: int = 100
    horizon: int = 50
    inertia: float = 0.8
    cognitive: float = 2.0
    social: float = 2.0
    velocity_clamp: float = 0.2  # fraction of each dimension's range
    bounds: tuple | None = None  # ((lo, hi), ...); plans always use [0, 1]

    def __post_init__(self):
        for name in ("num_particles", "num_iterations", "horizon"):
            check_positive(getattr(self, name), name, integer=True)
        check_interval(self.inertia, "inertia", 0.0, 1.0)
        check_interval(self.cognitive, "cognitive", 0.0, np.inf)
        check_interval(self.social, "social", 0.0, np.inf)
        check_positive(self.velocity_clamp, "velocity_clamp")
        if self.bounds is not None:
            _check_bounds(self.bounds)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_fitness: float


@dataclass
class SwarmResult:
    gbest_position: np.ndarray
    gbest_fitness: float
    fitness_history: list = field(default_factory=list)
    n_evaluations: int = 0
    particles: list = field(default_factory=list)  # final swarm, one Particle each


class NonFiniteFitness(ValueError):
    pass


def _check_bounds(bounds):
    arr = np.asarray(bounds, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError(f"bounds must have shape (D, 2), got {arr.shape}")
    if not np.all(arr[:, 0] < arr[:, 1]):
        raise ValueError("every bound needs lo < hi")
    return arr


def _evaluate(fitness, positions, map_fn):
    values = np.fromiter(map_fn(fitness, list(positions)), dtype=np.float64, count=len(positions))
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        k = bad[0]
        raise NonFiniteFitness(f"fitness returned {values[k]} at position {positions[k].tolist()}")
    return values


def optimize(fitness, config: PsoConfig, rng=None, bounds=None, map_fn=map,
             callback=None) -> SwarmResult:
    """Maximize ``fitness`` with canonical global-best PSO.

    Per iteration and particle::

        v <- w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x)
        x <- clip(x + v, lo, hi)

    with fresh uniform ``r1, r2`` vectors and ``v`` clipped to
    ``velocity_clamp * (hi - lo)``.  All random numbers of an iteration are
    drawn before any fitness call, so ``map_fn`` may be a parallel map without
    changing the result.  ``callback(iteration, positions, velocities)`` is
    invoked after each position update.
    """
    rng = as_generator(rng)
    lohi = _check_bounds(bounds if bounds is not None else config.bounds)
    lo, hi = lohi[:, 0], lohi[:, 1]
    n, dim = config.num_particles, lo.shape[0]
    vmax = config.velocity_clamp * (hi - lo)

    x = rng.uniform(lo, hi, size=(n, dim))
    v = rng.uniform(-vmax, vmax, size=(n, dim))
    f = _evaluate(fitness, x, map_fn)
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmax(pbest_f))
    gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
    history = []
    evaluations = n

    for _ in range(config.num_iterations):
        r1 = rng.random((n, dim))
        r2 = rng.random((n, dim))
        v = config.inertia * v + config.cognitive * r1 * (pbest - x) + config.social * r2 * (gbest - x)
        np.clip(v, -vmax, vmax, out=v)
        x = np.clip(x + v, lo, hi)
        if callback is not None:
            callback(len(history), x.copy(), v.copy())
        f = _evaluate(fitness, x, map_fn)
        evaluations += n
        improved = f > pbest_f
        pbest[improved] = x[improved]
        pbest_f[improved] = f[improved]
        g = int(np.argmax(pbest_f))
        if pbest_f[g] > gbest_f:
            gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
        history.append(gbest_f)

    particles = [Particle(x[k].copy(), v[k].copy(), pbest[k].copy(), float(pbest_f[k])) for k in range(n)]
    return SwarmResult(gbest, gbest_f, history, evaluations, particles)


def plan_dimension(env_config: EnvConfig, horizon: int) -> int:
    return 2 * env_config.num_agents * horizon


def decode_plan(plan, env_config: EnvConfig) -> list:
    """Split a flat plan into per-step joint actions."""
    values = np.asarray(plan, dtype=np.float64).tolist()
    width = 2 * env_config.num_agents
    if len(values) % width:
        raise ValueError(f"plan length {len(values)} is not a multiple of {width}")
    return [
        joint_action_from_array(values[k : k + width], env_config.num_agents)
        for k in range(0, len(values), width)
    ]


def plan_fitness(state: CoverageState, plan, env_config: EnvConfig, horizon: int) -> float:
    """Team reward from replaying ``plan`` on a copy of ``state``.

    Steps after the copied episode ends contribute nothing.
    """
    plan = check_vector(plan, plan_dimension(env_config, horizon), name="plan")
    sim = clone_state(state)
    total = 0.0
    for joint in decode_plan(plan, env_config):
        if is_terminal(sim, env_config):
            break
        sim, rewards, _ = advance(sim, joint, env_config)
        total += float(rewards.sum())
    return total


def propose_plan(state: CoverageState, env_config: EnvConfig, pso_config: PsoConfig, rng=None,
                 map_fn=map, return_result=False):
    """Optimize a ``horizon``-step joint plan from ``state``.

    Returns the decoded plan (a list of joint actions), and the raw
    :class:`SwarmResult` as well when ``return_result`` is true.
    """
    if is_terminal(state, env_config):
        raise ValueError("cannot plan from a terminal state")
    horizon = pso_config.horizon
    dim = plan_dimension(env_config, horizon)
    bounds = np.tile([0.0, 1.0], (dim, 1))

    def fitness(plan):
        return plan_fitness(state, plan, env_config, horizon)

    result = optimize(fitness, pso_config, rng, bounds=bounds, map_fn=map_fn)
    plan = decode_plan(result.gbest_position, env_config)
    return (plan, result) if return_result else plan


class ParticleSwarmOptimizer(BaseEstimator):
    """Estimator wrapper around :func:`optimize`.

    ``fit(fitness, bounds)`` runs the swarm and stores ``best_position_``,
    ``best_fitness_`` and ``fitness_history_``.
    """

    def __init__(self, num_particles=50, num_iterations=100, inertia=0.8, cognitive=2.0,
                 social=2.0, velocity_clamp=0.2, random_state=None):
        self.num_particles = num_particles
        self.num_iterations = num_iterations
        self.inertia = inertia
        self.cognitive = cognitive
        self.social = social
        self.velocity_clamp = velocity_clamp
        self.random_state = random_state

    def _config(self):
        return PsoConfig(
            num_particles=self.num_particles,
            num_iterations=self.num_iterations,
            inertia=self.inertia,
            cognitive=self.cognitive,
            social=self.social,
            velocity_clamp=self.velocity_clamp,
        )

    def fit(self, fitness, bounds):
        if not callable(fitness):
            raise TypeError("fitness must be callable")
        result = optimize(fitness, self._config(), self.random_state, bounds=bounds)
        self.result_ = result
        self.best_position_ = result.gbest_position
        self.best_fitness_ = result.gbest_fitness
        self.fitness_history_ = np.asarray(result.fitness_history)
        self.n_features_in_ = result.gbest_position.shape[0]
        return self

    def predict(self, X=None):
        """Return the best position found."""
        check_is_fitted(self, "best_position_")
        return self.best_position_.copy()
