"""Link-level model: log-distance pathloss, shadowing and fading draws, SNR, slot rates.

All functions are pure given an explicit numpy random generator, so workers can
call them concurrently with per-worker rng streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Log-distance pathloss for dense small-cell deployments: PL(d) = 36.7*log10(d) + 39.4.
PATHLOSS_SLOPE_DB = 36.7
PATHLOSS_INTERCEPT_DB = 39.4

# Distance floor so a UE walking over an SBS never hits the log10 singularity.
MIN_DISTANCE_M = 0.5


@dataclass
class RadioConfig:
    """Constants of the downlink model.

    ho_interruption_s is the dead time charged to a slot in which a handover
    happens; it must fit inside one slot.
    """

    tx_power_dbm: float = 30.0
    bandwidth_hz: float = 10e6
    noise_density_dbm_hz: float = -174.0
    shadow_sigma_db: float = 8.0
    ho_interruption_s: float = 0.05
    slot_duration_s: float = 1.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if self.shadow_sigma_db < 0:
            raise ValueError(f"shadow_sigma_db must be >= 0, got {self.shadow_sigma_db}")
        if not 0.0 <= self.ho_interruption_s <= self.slot_duration_s:
            raise ValueError(
                "ho_interruption_s must lie in [0, slot_duration_s], got "
                f"{self.ho_interruption_s} with slot {self.slot_duration_s}"
            )

    def noise_power_dbm(self) -> float:
        """Thermal noise over the full band: density + 10*log10(bandwidth)."""
        return self.noise_density_dbm_hz + 10.0 * math.log10(self.bandwidth_hz)


@dataclass
class LinkMeasurement:
    """Per-SBS downlink measurements taken by one UE in one slot."""

    rsrp_dbm: np.ndarray
    snr_db: np.ndarray

    def __post_init__(self):
        if self.rsrp_dbm.shape != self.snr_db.shape:
            raise ValueError("rsrp_dbm and snr_db must have the same length")


def pathloss_db(distance_m):
    """Log-distance pathloss in dB; accepts a scalar or an array of distances.

    Distances below MIN_DISTANCE_M are clamped to the floor.
    """
    d = np.asarray(distance_m, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise ValueError(f"distance must be finite and non-negative, got {distance_m}")
    pl = PATHLOSS_SLOPE_DB * np.log10(np.maximum(d, MIN_DISTANCE_M)) + PATHLOSS_INTERCEPT_DB
    return float(pl) if np.isscalar(distance_m) or d.ndim == 0 else pl


def sample_link_gain(rng: np.random.Generator, shadow_sigma_db: float, size=None):
    """Draw (shadow_db, fading_power) for one or `size` links.

    Shadowing is zero-mean log-normal with the given dB standard deviation;
    fading_power is the squared magnitude of a unit Rayleigh draw, i.e. a
    mean-one exponential.
    """
    if shadow_sigma_db > 0:
        shadow = rng.normal(0.0, shadow_sigma_db, size=size)
    else:
        shadow = 0.0 if size is None else np.zeros(size)
    fading = rng.standard_exponential(size=size)
    return shadow, fading


def measure(sbs_positions, ue_pos, config: RadioConfig, rng: np.random.Generator) -> LinkMeasurement:
    """Measure RSRP and SNR from every SBS in one area to a UE position.

    Gains are drawn independently per SBS; SNR subtracts the full-band noise
    power, which orders links identically to RSRP-based quality here because
    interference is not modelled.
    """
    sbs = np.asarray(sbs_positions, dtype=float)
    pos = np.asarray(ue_pos, dtype=float)
    dist = np.hypot(sbs[:, 0] - pos[0], sbs[:, 1] - pos[1])
    shadow, fading = sample_link_gain(rng, config.shadow_sigma_db, size=len(sbs))
    rsrp = config.tx_power_dbm - pathloss_db(dist) - shadow + 10.0 * np.log10(fading)
    snr = rsrp - config.noise_power_dbm()
    return LinkMeasurement(rsrp_dbm=rsrp, snr_db=snr)


def link_rate(snr_db: float, ho_occurred: bool, config: RadioConfig) -> float:
    """Shannon rate for one slot in bit/s, discounted by handover dead time.

    rate = eta * B * log2(1 + 10^(snr/10)), with eta < 1 only on handover slots.
    """
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    eta = 1.0
    if ho_occurred:
        eta = 1.0 - config.ho_interruption_s / config.slot_duration_s
    return eta * config.bandwidth_hz * math.log2(1.0 + 10.0 ** (snr_db / 10.0))
