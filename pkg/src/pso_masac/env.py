"""Multi-agent 2D coverage simulator.

Agents move with continuous poses over a discrete ``width x height`` grid of
unit cells.  Each agent carries a forward-looking circular-sector sensor.
Two sensor models are available:

``"rays"`` (default)
    The sector is sampled at the agent position plus unit-spaced points along
    its two edges and its center line; every cell containing a sample is
    covered.  With a radius of 2 and a 60 degree opening this senses at most
    seven cells per step.
``"center"``
    A cell is covered iff its center lies inside the sector.

Cell ``(i, j)`` has its center at ``(i + 0.5, j + 0.5)`` and flat index
``j * width + i`` (row-major, y outer).

Everything here is a pure function of its inputs.  Randomness only enters
through :func:`reset`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import as_generator, check_interval, check_positive

TWO_PI = 2.0 * math.pi
SENSOR_MODELS = ("rays", "center")


class EpisodeFinished(RuntimeError):
    """Raised when stepping a state whose episode already ended."""


@dataclass(frozen=True)
class EnvConfig:
    width: int = 30
    height: int = 30
    num_agents: int = 3
    max_linear_speed: float = 5.0
    max_angular_speed: float = 30.0  # degrees per step
    sensor_radius: float = 2.0
    sensor_half_angle: float = 30.0  # degrees
    collision_radius: float = 1.0
    max_steps: int = 200
    reward_collision: float = -5.0
    reward_oob: float = -5.0
    reward_new_pixel: float = 1.0
    sensor_model: str = "rays"

    def __post_init__(self):
        for name in ("width", "height", "num_agents", "max_steps"):
            check_positive(getattr(self, name), name, integer=True)
        for name in ("max_linear_speed", "max_angular_speed", "sensor_radius", "collision_radius"):
            check_positive(getattr(self, name), name)
        check_interval(self.sensor_half_angle, "sensor_half_angle", 0.0, 180.0, lo_open=True)
        if self.sensor_model not in SENSOR_MODELS:
            raise ValueError(f"sensor_model must be one of {SENSOR_MODELS}, got {self.sensor_model!r}")
        # agents start side by side along +x
        if self.num_agents > self.width:
            raise ValueError("num_agents cannot exceed width (agents start in one row)")

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def obs_dim(self) -> int:
        return 6 + 2 * (self.num_agents - 1) + self.n_cells


class AgentPose(NamedTuple):
    x: float
    y: float
    theta: float


class _ActionPair(NamedTuple):
    lin: float
    ang: float


class Action(_ActionPair):
    """Normalized control pair; both components are clamped to [0, 1]."""

    __slots__ = ()

    def __new__(cls, lin: float, ang: float):
        return super().__new__(cls, min(max(float(lin), 0.0), 1.0), min(max(float(ang), 0.0), 1.0))


JointAction = tuple  # tuple[Action, ...], one entry per agent


@dataclass
class CoverageState:
    poses: tuple
    covered: np.ndarray  # (height, width) bool
    last_actions: tuple
    step_count: int = 0
    covered_count: int = 0

    def __eq__(self, other):
        if not isinstance(other, CoverageState):
            return NotImplemented
        return (
            self.poses == other.poses
            and self.last_actions == other.last_actions
            and self.step_count == other.step_count
            and self.covered_count == other.covered_count
            and np.array_equal(self.covered, other.covered)
        )


@dataclass
class StepResult:
    observations: list
    rewards: np.ndarray
    done: bool
    info: list = field(default_factory=list)
    # full coverage reached; time-limit truncation leaves this False
    terminated: bool = False


def wrap_angle(theta: float) -> float:
    """Wrap an angle into [0, 2*pi)."""
    out = math.fmod(theta, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    if out >= TWO_PI:
        out = 0.0
    return out


def _signed_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


def is_terminal(state: CoverageState, config: EnvConfig) -> bool:
    return state.covered_count >= config.n_cells or state.step_count >= config.max_steps


def kinematics(pose: AgentPose, action: Action, config: EnvConfig) -> AgentPose:
    """Turn first, then translate along the new heading.  No clamping."""
    lin, ang = action
    theta = wrap_angle(pose.theta + (2.0 * ang - 1.0) * math.radians(config.max_angular_speed))
    dist = lin * config.max_linear_speed
    return AgentPose(pose.x + dist * math.cos(theta), pose.y + dist * math.sin(theta), theta)


def footprint(pose: AgentPose, config: EnvConfig) -> frozenset:
    """Flat indices of the cells sensed from ``pose``; cells off the map are dropped."""
    if config.sensor_model == "rays":
        return _ray_footprint(pose, config)
    return _center_footprint(pose, config)


def sensor_samples(pose: AgentPose, config: EnvConfig) -> list:
    """Sample points of the ``"rays"`` model: the apex, then for each of
    ``ceil(radius)`` evenly spaced rings the left edge, center line and right
    edge of the sector."""
    x, y, theta = pose
    half = math.radians(config.sensor_half_angle)
    rings = max(1, math.ceil(config.sensor_radius - 1e-9))
    points = [(x, y)]
    for k in range(1, rings + 1):
        rho = config.sensor_radius * k / rings
        for phi in (-half, 0.0, half):
            points.append((x + rho * math.cos(theta + phi), y + rho * math.sin(theta + phi)))
    return points


def _ray_footprint(pose, config):
    w, h = config.width, config.height
    cells = set()
    for px, py in sensor_samples(pose, config):
        if 0.0 <= px <= w and 0.0 <= py <= h:
            # the far map edge belongs to the last cell
            cells.add(min(int(py), h - 1) * w + min(int(px), w - 1))
    return frozenset(cells)


def _center_footprint(pose, config):
    # inclusive on radius and half-angle; a center at the apex counts
    r = config.sensor_radius
    r2 = r * r
    half = math.radians(config.sensor_half_angle)
    x, y, theta = pose
    i_lo = max(0, math.ceil(x - r - 0.5))
    i_hi = min(config.width - 1, math.floor(x + r - 0.5))
    j_lo = max(0, math.ceil(y - r - 0.5))
    j_hi = min(config.height - 1, math.floor(y + r - 0.5))
    cells = []
    for j in range(j_lo, j_hi + 1):
        dy = j + 0.5 - y
        for i in range(i_lo, i_hi + 1):
            dx = i + 0.5 - x
            d2 = dx * dx + dy * dy
            if d2 > r2:
                continue
            if d2 == 0.0 or abs(_signed_angle(math.atan2(dy, dx) - theta)) <= half:
                cells.append(j * config.width + i)
    return frozenset(cells)


def reset(config: EnvConfig, rng=None):
    """Start an episode with the team lined up along +x, sharing one heading.

    Returns ``(state, observations)``.  Cells sensed from the start poses are
    marked covered without any reward.
    """
    rng = as_generator(rng)
    n = config.num_agents
    while True:
        ix = int(rng.integers(config.width))
        iy = int(rng.integers(config.height))
        if ix + n - 1 <= config.width - 1:
            break
    theta = float(rng.uniform(0.0, TWO_PI))
    poses = tuple(AgentPose(ix + k + 0.5, iy + 0.5, theta) for k in range(n))
    covered = np.zeros((config.height, config.width), dtype=bool)
    flat = covered.reshape(-1)
    for pose in poses:
        for cell in footprint(pose, config):
            flat[cell] = True
    state = CoverageState(
        poses=poses,
        covered=covered,
        last_actions=tuple(Action(0.0, 0.0) for _ in range(n)),
        step_count=0,
        covered_count=int(flat.sum()),
    )
    return state, [observe(state, i, config) for i in range(n)]


def _as_joint_action(actions, n) -> tuple:
    if len(actions) != n:
        raise ValueError(f"expected {n} actions, got {len(actions)}")
    return tuple(a if type(a) is Action else Action(*a) for a in actions)


def advance(state: CoverageState, actions, config: EnvConfig):
    """Core transition without observations.

    Returns ``(new_state, rewards, info)`` where ``info`` holds one dict of
    event flags per agent.
    """
    if is_terminal(state, config):
        raise EpisodeFinished("episode finished")
    n = config.num_agents
    actions = _as_joint_action(actions, n)
    w, h = config.width, config.height

    poses = []
    oob = []
    for pose, action in zip(state.poses, actions):
        x, y, theta = kinematics(pose, action, config)
        out = x < 0.0 or x > w or y < 0.0 or y > h
        if out:
            x = min(max(x, 0.0), float(w))
            y = min(max(y, 0.0), float(h))
        poses.append(AgentPose(x, y, theta))
        oob.append(out)

    collided = [False] * n
    cr2 = config.collision_radius * config.collision_radius
    for a in range(n):
        for b in range(a + 1, n):
            dx = poses[a].x - poses[b].x
            dy = poses[a].y - poses[b].y
            if dx * dx + dy * dy < cr2:
                collided[a] = collided[b] = True

    covered = state.covered.copy()
    flat = covered.reshape(-1)
    new_pixels = []
    # lower agent index claims shared cells first
    for pose in poses:
        count = 0
        for cell in footprint(pose, config):
            if not flat[cell]:
                flat[cell] = True
                count += 1
        new_pixels.append(count)

    rewards = np.array(
        [
            config.reward_new_pixel * new_pixels[i]
            + (config.reward_collision if collided[i] else 0.0)
            + (config.reward_oob if oob[i] else 0.0)
            for i in range(n)
        ]
    )
    info = [
        {"collided": collided[i], "out_of_bounds": oob[i], "new_pixels": new_pixels[i]}
        for i in range(n)
    ]
    new_state = CoverageState(
        poses=tuple(poses),
        covered=covered,
        last_actions=actions,
        step_count=state.step_count + 1,
        covered_count=state.covered_count + sum(new_pixels),
    )
    return new_state, rewards, info


def step(state: CoverageState, actions, config: EnvConfig):
    """Apply one joint action.  Returns ``(new_state, StepResult)``."""
    new_state, rewards, info = advance(state, actions, config)
    terminated = new_state.covered_count >= config.n_cells
    done = terminated or new_state.step_count >= config.max_steps
    observations = [observe(new_state, i, config) for i in range(config.num_agents)]
    return new_state, StepResult(observations, rewards, done, info, terminated)


def observe(state: CoverageState, agent_index: int, config: EnvConfig) -> np.ndarray:
    """Per-agent observation vector.

    Layout: own ``(x/width, y/height)``, ``(sin, cos)`` of own heading, own last
    action ``(lin, ang)``, the other agents' normalized positions in index
    order, then the coverage bitmap flattened row-major.
    """
    n = config.num_agents
    if not 0 <= agent_index < n:
        raise IndexError(f"agent_index {agent_index} out of range for {n} agents")
    obs = np.empty(config.obs_dim)
    x, y, theta = state.poses[agent_index]
    obs[0] = x / config.width
    obs[1] = y / config.height
    obs[2] = math.sin(theta)
    obs[3] = math.cos(theta)
    obs[4:6] = state.last_actions[agent_index]
    k = 6
    for other in range(n):
        if other == agent_index:
            continue
        px, py, _ = state.poses[other]
        obs[k] = px / config.width
        obs[k + 1] = py / config.height
        k += 2
    obs[k:] = state.covered.reshape(-1)
    return obs


def clone_state(state: CoverageState) -> CoverageState:
    return CoverageState(
        poses=tuple(state.poses),
        covered=state.covered.copy(),
        last_actions=tuple(state.last_actions),
        step_count=state.step_count,
        covered_count=state.covered_count,
    )


def bitmap_to_string(covered: np.ndarray) -> str:
    """Serialize a coverage bitmap as '0'/'1' characters, y outer, x inner."""
    return "".join("1" if c else "0" for c in np.asarray(covered, dtype=bool).reshape(-1))


def bitmap_from_string(text: str, width: int, height: int) -> np.ndarray:
    if len(text) != width * height or set(text) - {"0", "1"}:
        raise ValueError("bitmap string does not match the grid size or alphabet")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8).reshape(height, width) == ord("1")


def joint_action_from_array(values: Sequence[float], num_agents: int) -> tuple:
    """Decode a flat ``[lin0, ang0, lin1, ang1, ...]`` vector into a joint action."""
    return tuple(Action(values[2 * k], values[2 * k + 1]) for k in range(num_agents))
