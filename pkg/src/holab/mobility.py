"""Random-walk UE motion inside rectangular areas and mobility-feature capture.

A UE redraws its heading every slot from the area's direction distribution and
moves speed * slot meters. Stepping outside the rectangle ends the episode;
the position is left unchanged on the exit slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Unit headings indexed as east, south, west, north.
DIRECTIONS = np.array([[1.0, 0.0], [0.0, -1.0], [-1.0, 0.0], [0.0, 1.0]])


@dataclass
class AreaSpec:
    """One rectangular service area with its SBS layout and mobility pattern."""

    id: int
    width_m: float
    height_m: float
    sbs_positions: np.ndarray
    direction_probs: np.ndarray
    speed_range: tuple[float, float] = (1.0, 3.0)

    def __post_init__(self):
        self.sbs_positions = np.asarray(self.sbs_positions, dtype=float)
        self.direction_probs = np.asarray(self.direction_probs, dtype=float)
        if self.direction_probs.shape != (4,):
            raise ValueError("direction_probs must have 4 entries (east, south, west, north)")
        if np.any(self.direction_probs < 0) or abs(self.direction_probs.sum() - 1.0) > 1e-6:
            raise ValueError(f"direction_probs must be non-negative and sum to 1, got {self.direction_probs}")
        if self.speed_range[0] > self.speed_range[1]:
            raise ValueError(f"speed_range min must be <= max, got {self.speed_range}")
        if self.sbs_positions.ndim != 2 or self.sbs_positions.shape[1] != 2:
            raise ValueError("sbs_positions must be an (K, 2) array")
        if np.any(self.sbs_positions < 0) or np.any(
            self.sbs_positions > [self.width_m, self.height_m]
        ):
            raise ValueError("all SBS positions must lie inside the area rectangle")

    @property
    def sbs_count(self) -> int:
        return len(self.sbs_positions)

    def contains(self, pos) -> bool:
        return 0.0 <= pos[0] <= self.width_m and 0.0 <= pos[1] <= self.height_m


@dataclass
class MobilityFeature:
    """Trajectory observed over a fixed window: one (x, y, v) row per slot."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[1] != 3:
            raise ValueError("samples must be a (T, 3) array of (x, y, v) rows")

    def __len__(self) -> int:
        return len(self.samples)


def random_sbs_positions(k: int, width_m: float, height_m: float, rng: np.random.Generator) -> np.ndarray:
    """Drop k SBSs uniformly at random inside the rectangle."""
    xy = rng.uniform(0.0, 1.0, size=(k, 2))
    return xy * np.array([width_m, height_m])


def spawn(area: AreaSpec, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Uniform respawn position and a fresh per-episode speed draw."""
    pos = rng.uniform(0.0, 1.0, size=2) * np.array([area.width_m, area.height_m])
    speed = rng.uniform(area.speed_range[0], area.speed_range[1])
    return pos, float(speed)


def step_walk(
    pos,
    speed: float,
    area: AreaSpec,
    rng: np.random.Generator,
    slot_s: float,
    direction: int | None = None,
) -> tuple[np.ndarray, bool]:
    """Advance one slot of the random walk.

    Returns (new_pos, exited). On exit the returned position is the old one;
    the caller decides whether to respawn or terminate the episode.
    `direction` forces a heading index (tests); normally it is drawn from
    the area's direction distribution.
    """
    pos = np.asarray(pos, dtype=float)
    if direction is None:
        direction = int(rng.choice(4, p=area.direction_probs))
    new_pos = pos + speed * slot_s * DIRECTIONS[direction]
    if not area.contains(new_pos):
        return pos, True
    return new_pos, False


def collect_features(
    area: AreaSpec,
    ue_count: int,
    t_u: int,
    rng: np.random.Generator,
    slot_s: float = 1.0,
) -> list[MobilityFeature]:
    """Observe `ue_count` UEs for exactly t_u slots each.

    A UE that walks out is respawned uniformly with a fresh speed and the
    recording continues, so every feature holds exactly t_u samples.
    """
    if t_u < 1:
        raise ValueError(f"t_u must be >= 1, got {t_u}")
    features = []
    for _ in range(ue_count):
        pos, speed = spawn(area, rng)
        rows = np.empty((t_u, 3))
        for t in range(t_u):
            new_pos, exited = step_walk(pos, speed, area, rng, slot_s)
            if exited:
                pos, speed = spawn(area, rng)
            else:
                pos = new_pos
            rows[t] = (pos[0], pos[1], speed)
        features.append(MobilityFeature(rows))
    return features
