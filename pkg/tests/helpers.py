"""Shared builders for tests."""

import numpy as np

from pso_masac.env import Action, AgentPose, CoverageState


def make_state(cfg, poses, covered=None, step_count=0):
    if covered is None:
        covered = np.zeros((cfg.height, cfg.width), dtype=bool)
    return CoverageState(
        poses=tuple(AgentPose(*p) for p in poses),
        covered=covered,
        last_actions=tuple(Action(0, 0) for _ in poses),
        step_count=step_count,
        covered_count=int(covered.sum()),
    )


def sphere(x):
    return -float(np.sum(np.square(x)))
