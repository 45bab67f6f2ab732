"""Tiny protocol-compatible environments for exercising the trainer."""
from dataclasses import dataclass

import numpy as np

from floodadapt.adaptation import N_ACTIONS
from floodadapt.env import N_FEATURES, ZoneGraph


@dataclass
class StubStep:
    state: np.ndarray
    reward: float
    done: bool
    masks: np.ndarray
    info: object = None


class BanditEnv:
    """One zone, one step: action 1 pays 1.0, action 0 pays nothing.

    Only actions {0, 1} are unmasked, making this the smallest possible
    check that the trainer can move probability mass onto reward.
    """

    n_zones = 1
    horizon = 1
    graph = ZoneGraph(1, ())

    def __init__(self, rewarding_action: int = 1):
        self.rewarding_action = rewarding_action
        self._masks = np.zeros((1, N_ACTIONS), dtype=bool)
        self._masks[0, :2] = True
        self._state = np.zeros((1, N_FEATURES))

    def reset(self):
        return self._state.copy(), self._masks.copy()

    def step(self, actions):
        r = 1.0 if int(actions[0]) == self.rewarding_action else 0.0
        return StubStep(self._state.copy(), r, True, self._masks.copy())


class ConstantRewardEnv:
    """Fixed-length episodes paying the same reward every step."""

    graph = ZoneGraph(2, ((0, 1),))
    n_zones = 2

    def __init__(self, reward: float = -0.5, length: int = 3):
        self.reward = reward
        self.horizon = length
        self._t = 0
        self._masks = np.ones((2, N_ACTIONS), dtype=bool)
        self._state = np.zeros((2, N_FEATURES))

    def reset(self):
        self._t = 0
        return self._state.copy(), self._masks.copy()

    def step(self, actions):
        self._t += 1
        done = self._t >= self.horizon
        return StubStep(self._state.copy(), self.reward, done, self._masks.copy())
