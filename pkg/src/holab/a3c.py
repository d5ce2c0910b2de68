"""Per-UE worker loop: fetch, roll out a truncation block, push gradients.

Each worker owns an environment, an rng, and its recurrent state. Workers
interact only through the parameter server. The gradients produced by
nn.bptt_gradients are ascent directions; the server applies the descent form
of RMSProp, so the worker pushes their negated sum.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .params import ParameterServer


@dataclass
class WorkerConfig:
    n: int = 20
    gamma: float = 0.99
    entropy_coeff: float = 0.01
    max_global_steps: int = 10_000
    clip_norm: float = 40.0
    # Optional stop / pacing knobs for the wall-clock experiments.
    max_wall_clock_s: float | None = None
    max_env_slots: int | None = None
    step_latency_s: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.entropy_coeff < 0:
            raise ValueError(f"entropy_coeff must be >= 0, got {self.entropy_coeff}")


@dataclass
class TrajectorySegment:
    """Up to n steps of one episode plus what bootstrapping needs."""

    states: list[np.ndarray]
    actions: list[int]
    rewards: list[float]
    start_recurrent: nn.RecurrentState
    terminal: bool
    bootstrap_state: np.ndarray | None


@dataclass
class WorkerReport:
    """Per-segment logs and slot-level aggregates from one worker."""

    seg_global_step: list[int] = field(default_factory=list)
    seg_wall_clock: list[float] = field(default_factory=list)
    seg_mean_value: list[float] = field(default_factory=list)
    seg_entropy: list[float] = field(default_factory=list)
    seg_ho_rate: list[float] = field(default_factory=list)
    seg_throughput: list[float] = field(default_factory=list)
    episodes: list[tuple[int, float, float]] = field(default_factory=list)  # (len, ho_rate, bps)
    pushes: int = 0
    dropped_segments: int = 0
    total_slots: int = 0
    total_ho: int = 0
    total_rate: float = 0.0

    @property
    def ho_rate(self) -> float:
        return self.total_ho / self.total_slots if self.total_slots else 0.0

    @property
    def throughput_bps(self) -> float:
        return self.total_rate / self.total_slots if self.total_slots else 0.0


class Worker:
    """One execution stream; run_segment() is also the unit of the sequential mode."""

    def __init__(self, env, server: ParameterServer, cfg: WorkerConfig, rng: np.random.Generator):
        self.env = env
        self.server = server
        self.cfg = cfg
        self.rng = rng
        self.report = WorkerReport()
        self.rs = None
        self.state = None
        self._ep_ho = 0
        self._ep_rate = 0.0
        self._ep_len = 0
        self._t0 = None

    def _start_episode(self):
        self.state = self.env.reset()
        self.rs = nn.RecurrentState.zeros(self.server.fetch().hidden_dim) if self.rs is None else self.rs
        self.rs = nn.RecurrentState.zeros(len(self.rs.cell))
        self._ep_ho = 0
        self._ep_rate = 0.0
        self._ep_len = 0

    def stopped(self) -> bool:
        if self.server.global_step() >= self.cfg.max_global_steps:
            return True
        if self.cfg.max_env_slots is not None and self.report.total_slots >= self.cfg.max_env_slots:
            return True
        if self.cfg.max_wall_clock_s is not None and self._t0 is not None:
            if time.perf_counter() - self._t0 >= self.cfg.max_wall_clock_s:
                return True
        return False

    def run_segment(self) -> bool:
        """One fetch / rollout / push cycle. Returns False once a stop rule fired."""
        if self._t0 is None:
            self._t0 = time.perf_counter()
        if self.stopped():
            return False
        if self.state is None or self.env.done:
            self._start_episode()
        fetched_step = self.server.global_step()
        weights = self.server.fetch()
        seg = TrajectorySegment(
            states=[], actions=[], rewards=[], start_recurrent=self.rs.copy(),
            terminal=False, bootstrap_state=None,
        )
        values = []
        entropies = []
        seg_ho = 0
        seg_rate = 0.0
        try:
            for _ in range(self.cfg.n):
                policy, value, self.rs = nn.forward(weights, self.state.as_array(), self.rs)
                action = nn.sample_action(policy, self.rng)
                out = self.env.step(action)
                seg.states.append(self.state.as_array())
                seg.actions.append(action)
                seg.rewards.append(out.reward)
                values.append(value)
                entropies.append(nn.policy_entropy(policy))
                seg_ho += int(out.ho_occurred)
                seg_rate += out.rate_bps
                self._ep_ho += int(out.ho_occurred)
                self._ep_rate += out.rate_bps
                self._ep_len += 1
                self.state = out.next_state
                if self.cfg.step_latency_s > 0:
                    time.sleep(self.cfg.step_latency_s)
                if out.done:
                    break
            seg.terminal = self.env.done
            if not seg.terminal:
                seg.bootstrap_state = self.state.as_array()
            grad_theta, grad_w = nn.bptt_gradients(
                weights, seg, self.cfg.gamma, self.cfg.entropy_coeff
            )
        except nn.NumericalFault:
            self.report.dropped_segments += 1
            self.rs = nn.RecurrentState.zeros(weights.hidden_dim)
            return True
        push_grad = nn.clip_by_global_norm(nn.scale(nn.add(grad_theta, grad_w), -1.0), self.cfg.clip_norm)
        if self.server.push(push_grad, fetched_step=fetched_step):
            self.report.pushes += 1
        slots = len(seg.states)
        self.report.total_slots += slots
        self.report.total_ho += seg_ho
        self.report.total_rate += seg_rate
        self.report.seg_global_step.append(self.server.global_step())
        self.report.seg_wall_clock.append(time.perf_counter() - self._t0)
        self.report.seg_mean_value.append(float(np.mean(values)))
        self.report.seg_entropy.append(float(np.mean(entropies)))
        self.report.seg_ho_rate.append(seg_ho / slots)
        self.report.seg_throughput.append(seg_rate / slots)
        if seg.terminal:
            self.report.episodes.append(
                (self._ep_len, self._ep_ho / self._ep_len, self._ep_rate / self._ep_len)
            )
        return True

    def run(self) -> WorkerReport:
        while self.run_segment():
            pass
        return self.report


def run_worker(env, server: ParameterServer, cfg: WorkerConfig, rng: np.random.Generator) -> WorkerReport:
    """Run one worker to its stop rule; the thread entry point."""
    return Worker(env, server, cfg, rng).run()


@dataclass
class EvalResult:
    ho_rate: float
    throughput_bps: float
    mean_value: float
    episodes: int
    slots: int


def evaluate_policy(
    weights: nn.ActorCriticWeights,
    env,
    episodes: int,
    greedy: bool,
    rng: np.random.Generator,
    max_slots: int | None = None,
) -> EvalResult:
    """Metrics of a frozen policy over whole episodes (or a slot budget).

    Slots are pooled across episodes, matching the per-slot definition of the
    handover rate and the averaged throughput.
    """
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    total_ho = 0
    total_rate = 0.0
    total_slots = 0
    values = []
    done_episodes = 0
    state = env.reset()
    rs = nn.RecurrentState.zeros(weights.hidden_dim)
    while True:
        policy, value, rs = nn.forward(weights, state.as_array(), rs)
        action = int(np.argmax(policy)) if greedy else nn.sample_action(policy, rng)
        out = env.step(action)
        values.append(value)
        total_ho += int(out.ho_occurred)
        total_rate += out.rate_bps
        total_slots += 1
        state = out.next_state
        if out.done:
            done_episodes += 1
            if done_episodes >= episodes:
                break
            state = env.reset()
            rs = nn.RecurrentState.zeros(weights.hidden_dim)
        if max_slots is not None and total_slots >= max_slots:
            break
    return EvalResult(
        ho_rate=total_ho / total_slots,
        throughput_bps=total_rate / total_slots,
        mean_value=float(np.mean(values)),
        episodes=done_episodes,
        slots=total_slots,
    )
