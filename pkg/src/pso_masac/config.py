"""Run configuration and its flat ``section.key = value`` text format.

Example::

    # desk-scale comparison
    env.width = 15
    env.num_agents = 2
    pso.particles = 10
    explore.mode = epsilon_pso
    run.episodes = 300

Blank lines and ``#`` comments are ignored; unknown keys are errors.  Keys
that are omitted keep their defaults.  ``emit`` writes every key, and
``parse(emit(cfg)) == cfg`` holds exactly (floats are written with ``repr``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

from .env import EnvConfig
from .exploration import ExplorationConfig
from .pso import PsoConfig
from .sac import SacConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    sac: SacConfig = field(default_factory=SacConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    explore: ExplorationConfig = field(default_factory=ExplorationConfig)
    episodes: int = 300
    seed: int = 0
    output_dir: str = "runs/default"
    log_every: int = 1

    def __post_init__(self):
        if not isinstance(self.episodes, int) or self.episodes < 1:
            raise ConfigError(f"episodes must be an integer >= 1, got {self.episodes!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.log_every, int) or self.log_every < 1:
            raise ConfigError(f"log_every must be an integer >= 1, got {self.log_every!r}")
        if self.pso.bounds is not None:
            raise ConfigError("pso.bounds is fixed to [0, 1] for plan optimization")


# config key -> (section attribute, dataclass field)
_PSO_KEYS = {
    "particles": "num_particles",
    "iterations": "num_iterations",
    "horizon": "horizon",
    "inertia": "inertia",
    "cognitive": "cognitive",
    "social": "social",
    "velocity_clamp": "velocity_clamp",
}
_RUN_KEYS = ("episodes", "seed", "output_dir", "log_every")


def _section_keys(section):
    if section == "pso":
        return dict(_PSO_KEYS)
    cls = {"env": EnvConfig, "sac": SacConfig, "explore": ExplorationConfig}[section]
    return {f.name: f.name for f in dataclasses.fields(cls)}


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _convert(raw: str, default, key: str):
    text = raw.strip()
    try:
        if key == "explore.replan_interval":
            return None if text.lower() == "none" else int(text)
        if isinstance(default, bool):
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return text


def emit(cfg: RunConfig) -> str:
    lines = []
    for section in ("env", "sac", "pso", "explore"):
        obj = getattr(cfg, section)
        for key, attr in _section_keys(section).items():
            lines.append(f"{section}.{key} = {_format(getattr(obj, attr))}")
    for key in _RUN_KEYS:
        lines.append(f"run.{key} = {_format(getattr(cfg, key))}")
    return "\n".join(lines) + "\n"


def parse(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse config text on top of ``base`` (defaults when omitted)."""
    base = RunConfig() if base is None else base
    updates = {"env": {}, "sac": {}, "pso": {}, "explore": {}, "run": {}}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        section, _, name = key.partition(".")
        if section == "run":
            if name not in _RUN_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            updates["run"][name] = _convert(value, getattr(base, name), key)
            continue
        if section not in updates:
            raise ConfigError(f"line {lineno}: unknown section in {key!r}")
        keys = _section_keys(section)
        if name not in keys:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr = keys[name]
        updates[section][attr] = _convert(value, getattr(getattr(base, section), attr), key)
    try:
        return replace(
            base,
            env=replace(base.env, **updates["env"]),
            sac=replace(base.sac, **updates["sac"]),
            pso=replace(base.pso, **updates["pso"]),
            explore=replace(base.explore, **updates["explore"]),
            **updates["run"],
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load(path, base: RunConfig | None = None) -> RunConfig:
    return parse(Path(path).read_text(encoding="utf-8"), base)


def save(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(emit(cfg), encoding="utf-8")
    return path


def desk_preset() -> RunConfig:
    """Laptop-scale profile used by the acceptance comparison."""
    return RunConfig(
        env=EnvConfig(width=15, height=15, num_agents=2, max_steps=60),
        sac=SacConfig(batch_size=64, hidden=(64, 64)),
        pso=PsoConfig(num_particles=10, num_iterations=20, horizon=15),
        episodes=300,
        output_dir="runs/desk",
    )


def full_preset() -> RunConfig:
    """Full-size environment and PSO budget (30x30, 3 agents, 50/100/50)."""
    return RunConfig(output_dir="runs/full")


PRESETS = {"desk": desk_preset, "full": full_preset}
