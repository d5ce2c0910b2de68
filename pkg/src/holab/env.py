"""Episodic handover decision process over one area.

Each slot the controller picks a serving SBS from the current state (normalized
per-SBS SNR plus a one-hot of the previous choice); the slot's rate comes from
the chosen link's current measurement, the UE then walks one slot, and the
episode ends when it leaves the rectangle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import mobility, radio

# Fallback state normalization for the default 16 m / 6-SBS layout. Experiment
# runs recompute these with calibrate_snr_norm and store the values in config.
DEFAULT_SNR_NORM = (60.0, 12.0)


@dataclass
class StateVector:
    """Controller input: normalized link-quality vector plus previous action."""

    rsrq: np.ndarray
    prev_action_onehot: np.ndarray
    terminal: bool = False

    def __post_init__(self):
        if len(self.rsrq) != len(self.prev_action_onehot):
            raise ValueError("rsrq and prev_action_onehot must have equal length")

    @property
    def k(self) -> int:
        return len(self.rsrq)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.rsrq, self.prev_action_onehot])


@dataclass
class RewardConfig:
    beta: float = 25.0
    energy_per_ho: float = 0.3
    rate_scale: float = 1e7

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.energy_per_ho < 0:
            raise ValueError(f"energy_per_ho must be >= 0, got {self.energy_per_ho}")
        if self.rate_scale <= 0:
            raise ValueError(f"rate_scale must be positive, got {self.rate_scale}")


@dataclass
class StepOutcome:
    next_state: StateVector
    reward: float
    done: bool
    ho_occurred: bool
    rate_bps: float


@dataclass
class UeRecord:
    position: np.ndarray
    speed: float
    serving: int


def encode_onehot(action: int, k: int) -> np.ndarray:
    if not 0 <= action < k:
        raise ValueError(f"action {action} out of range [0, {k})")
    vec = np.zeros(k)
    vec[action] = 1.0
    return vec


def reward(rate_bps: float, ho_occurred: bool, cfg: RewardConfig) -> float:
    """Normalized rate, minus the weighted handover energy when one occurred."""
    if rate_bps < 0:
        raise ValueError(f"rate_bps must be >= 0, got {rate_bps}")
    r = rate_bps / cfg.rate_scale
    if ho_occurred:
        r -= cfg.beta * cfg.energy_per_ho
    return r


def episode_metrics(history) -> tuple[float, float]:
    """(handover rate per slot, mean rate in bit/s) over a step history."""
    if len(history) == 0:
        raise ValueError("history must be non-empty")
    hos = sum(1 for h in history if h.ho_occurred)
    total_rate = sum(h.rate_bps for h in history)
    return hos / len(history), total_rate / len(history)


class HandoverEnv:
    """One UE's episodic MDP; owns its rng so replays are seed-deterministic."""

    def __init__(
        self,
        area: mobility.AreaSpec,
        radio_config: radio.RadioConfig,
        reward_config: RewardConfig,
        rng: np.random.Generator,
        snr_norm: tuple[float, float] = DEFAULT_SNR_NORM,
    ):
        self.area = area
        self.radio_config = radio_config
        self.reward_config = reward_config
        self.rng = rng
        self.snr_norm = snr_norm
        self.ue: UeRecord | None = None
        self.last_measurement: radio.LinkMeasurement | None = None
        self.state: StateVector | None = None
        self._terminal = True

    @property
    def k(self) -> int:
        return self.area.sbs_count

    @property
    def state_dim(self) -> int:
        return 2 * self.k

    @property
    def serving(self) -> int:
        return self.ue.serving

    @property
    def done(self) -> bool:
        return self._terminal

    def _normalize(self, snr_db: np.ndarray) -> np.ndarray:
        mean, std = self.snr_norm
        return (snr_db - mean) / std

    def _measure_here(self) -> radio.LinkMeasurement:
        return radio.measure(self.area.sbs_positions, self.ue.position, self.radio_config, self.rng)

    def reset(self) -> StateVector:
        """Spawn a fresh episode; the UE attaches to the strongest measured SBS."""
        pos, speed = mobility.spawn(self.area, self.rng)
        self.ue = UeRecord(position=pos, speed=speed, serving=0)
        self.last_measurement = self._measure_here()
        self.ue.serving = int(np.argmax(self.last_measurement.rsrp_dbm))
        self._terminal = False
        self.state = StateVector(
            rsrq=self._normalize(self.last_measurement.snr_db),
            prev_action_onehot=encode_onehot(self.ue.serving, self.k),
        )
        return self.state

    def step(self, action: int) -> StepOutcome:
        if self._terminal:
            raise RuntimeError("step() called on a terminal episode; reset() first")
        action = int(action)
        if not 0 <= action < self.k:
            raise ValueError(f"action {action} out of range [0, {self.k})")
        ho = action != self.ue.serving
        self.ue.serving = action
        rate = radio.link_rate(float(self.last_measurement.snr_db[action]), ho, self.radio_config)
        rew = reward(rate, ho, self.reward_config)
        new_pos, exited = mobility.step_walk(
            self.ue.position, self.ue.speed, self.area, self.rng, self.radio_config.slot_duration_s
        )
        self.ue.position = new_pos
        if exited:
            self._terminal = True
            next_state = StateVector(
                rsrq=np.zeros(self.k),
                prev_action_onehot=encode_onehot(action, self.k),
                terminal=True,
            )
        else:
            self.last_measurement = self._measure_here()
            next_state = StateVector(
                rsrq=self._normalize(self.last_measurement.snr_db),
                prev_action_onehot=encode_onehot(action, self.k),
            )
        self.state = next_state
        return StepOutcome(
            next_state=next_state, reward=rew, done=exited, ho_occurred=ho, rate_bps=rate
        )


def calibrate_snr_norm(
    area: mobility.AreaSpec,
    radio_config: radio.RadioConfig,
    rng: np.random.Generator,
    slots: int = 2000,
) -> tuple[float, float]:
    """Mean/std of per-SBS SNR along a random walk, for the state's affine scaling."""
    pos, speed = mobility.spawn(area, rng)
    samples = []
    for _ in range(slots):
        meas = radio.measure(area.sbs_positions, pos, radio_config, rng)
        samples.append(meas.snr_db)
        new_pos, exited = mobility.step_walk(
            pos, speed, area, rng, radio_config.slot_duration_s
        )
        if exited:
            pos, speed = mobility.spawn(area, rng)
        else:
            pos = new_pos
    stacked = np.concatenate(samples)
    return float(stacked.mean()), float(stacked.std())


def write_trace(history, path) -> None:
    """Episode trace rows (slot, action, ho, rate, reward, done), one CSV line each."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "action", "ho", "rate_bps", "reward", "done"])
        for slot, out in enumerate(history):
            action = int(np.argmax(out.next_state.prev_action_onehot))
            writer.writerow(
                [slot, action, int(out.ho_occurred), repr(out.rate_bps), repr(out.reward), int(out.done)]
            )
