"""Rule-based and bandit handover controllers, plus the common controller loop.

The hysteresis controller hands over once some candidate beats the serving
RSRP by the margin for time-to-trigger consecutive slots. The bandit treats
SBS indices as arms of an upper-confidence-bound problem over the shaped
per-slot reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import env as env_mod
from . import nn


@dataclass
class A3State:
    hhm_db: float
    ttt_slots: int
    candidate: int | None = None
    countdown: int = 0


def a3_step(st: A3State, rsrp_dbm: np.ndarray, serving: int) -> tuple[int, A3State]:
    """One hysteresis decision. Returns (action, new controller state).

    The countdown runs only while the same candidate keeps beating the serving
    cell by the margin; any break resets it.
    """
    rsrp = np.asarray(rsrp_dbm, dtype=float)
    others = np.arange(len(rsrp)) != serving
    best = int(np.argmax(np.where(others, rsrp, -np.inf)))
    triggered = rsrp[best] > rsrp[serving] + st.hhm_db
    if not triggered:
        return serving, replace(st, candidate=None, countdown=0)
    if best != st.candidate:
        # Fresh (or switched) candidate starts its own time-to-trigger window.
        countdown = st.ttt_slots
    else:
        countdown = st.countdown - 1
    if countdown <= 0:
        return best, replace(st, candidate=None, countdown=0)
    return serving, replace(st, candidate=best, countdown=countdown)


@dataclass
class UcbState:
    mu: np.ndarray
    counts: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, k: int) -> "UcbState":
        return cls(mu=np.zeros(k), counts=np.zeros(k, dtype=int), t=0)


def ucb_step(st: UcbState) -> int:
    """Arm choice: unplayed arms first (lowest index), then the UCB index."""
    unplayed = np.flatnonzero(st.counts == 0)
    if len(unplayed) > 0:
        return int(unplayed[0])
    bonus = np.sqrt(2.0 * math.log(st.t) / st.counts)
    return int(np.argmax(st.mu + bonus))


def ucb_update(st: UcbState, action: int, reward: float) -> UcbState:
    """Incremental mean for the played arm: mu += (r - mu) / M after M += 1."""
    counts = st.counts.copy()
    mu = st.mu.copy()
    counts[action] += 1
    mu[action] += (reward - mu[action]) / counts[action]
    return UcbState(mu=mu, counts=counts, t=st.t + 1)


# --- controller adapters sharing one interface so the harness can swap them ---


class A3Controller:
    def __init__(self, hhm_db: float, ttt_slots: int):
        self.hhm_db = hhm_db
        self.ttt_slots = ttt_slots
        self.st = A3State(hhm_db, ttt_slots)

    def episode_start(self, env):
        self.st = A3State(self.hhm_db, self.ttt_slots)

    def act(self, env) -> int:
        action, self.st = a3_step(self.st, env.last_measurement.rsrp_dbm, env.serving)
        return action

    def feedback(self, action: int, reward: float):
        pass


class UcbController:
    """Bandit over SBS indices; statistics persist across episodes."""

    def __init__(self, k: int):
        self.st = UcbState.fresh(k)

    def episode_start(self, env):
        pass

    def act(self, env) -> int:
        return ucb_step(self.st)

    def feedback(self, action: int, reward: float):
        self.st = ucb_update(self.st, action, reward)


class PolicyController:
    """Frozen network policy; recurrent state resets at episode boundaries."""

    def __init__(self, weights: nn.ActorCriticWeights, rng: np.random.Generator, greedy: bool = False):
        self.weights = weights
        self.rng = rng
        self.greedy = greedy
        self.rs = nn.RecurrentState.zeros(weights.hidden_dim)
        self.values: list[float] = []

    def episode_start(self, env):
        self.rs = nn.RecurrentState.zeros(self.weights.hidden_dim)

    def act(self, env) -> int:
        policy, value, self.rs = nn.forward(self.weights, env.state.as_array(), self.rs)
        self.values.append(value)
        if self.greedy:
            return int(np.argmax(policy))
        return nn.sample_action(policy, self.rng)

    def feedback(self, action: int, reward: float):
        pass


def run_controller(env, controller, max_slots: int) -> list[env_mod.StepOutcome]:
    """Drive any controller for a slot budget, rolling across episodes."""
    history = []
    env.reset()
    controller.episode_start(env)
    for _ in range(max_slots):
        action = controller.act(env)
        out = env.step(action)
        controller.feedback(action, out.reward)
        history.append(out)
        if out.done:
            env.reset()
            controller.episode_start(env)
    return history
