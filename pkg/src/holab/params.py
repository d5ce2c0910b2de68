"""Shared parameter server: fetch/push with element-wise RMSProp accumulation.

Any number of workers may fetch and push concurrently. Updates swap whole
tensors under a mutex, so a fetch never observes a torn tensor; staleness
across tensors (and across pushes) is permitted and expected.

The update applied per push, element-wise on every tensor:

    g      <- decay * g + (1 - decay) * grad^2
    weight <- weight - lr * grad / sqrt(g + eps)

This is the descent form: workers push loss gradients (the negated ascent
directions their rollouts produce).
"""

from __future__ import annotations

import threading
import warnings
from collections import Counter

import numpy as np

from . import nn


class ParameterServer:
    def __init__(
        self,
        weights: nn.ActorCriticWeights,
        learning_rate: float = 1e-3,
        decay: float = 0.99,
        epsilon: float = 1e-8,
    ):
        if learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if not 0.0 <= decay < 1.0:
            raise ValueError(f"decay must lie in [0, 1), got {decay}")
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.learning_rate = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self._lock = threading.Lock()
        self._weights = weights.copy()
        self._rms = nn.zeros_like(weights)
        self._step = 0
        self.rejected_pushes = 0
        self._staleness = Counter()

    def fetch(self) -> nn.ActorCriticWeights:
        """Snapshot of the current global weights."""
        with self._lock:
            return self._weights.copy()

    def push(self, grads: nn.ActorCriticWeights, fetched_step: int | None = None) -> bool:
        """Apply one accumulated gradient; returns False if it was rejected.

        Non-finite gradients are dropped (rejected_pushes counts them) so a
        worker's numerical fault can never poison the global weights.
        """
        for name, g in grads.as_dict().items():
            if g.shape != getattr(self._weights, name).shape:
                raise ValueError(
                    f"gradient tensor {name} has shape {g.shape}, "
                    f"expected {getattr(self._weights, name).shape}"
                )
        if not grads.all_finite():
            with self._lock:
                self.rejected_pushes += 1
            return False
        with self._lock:
            for name, g in grads.as_dict().items():
                rms = getattr(self._rms, name)
                weight = getattr(self._weights, name)
                rms = self.decay * rms + (1.0 - self.decay) * g ** 2
                weight = weight - self.learning_rate * g / np.sqrt(rms + self.epsilon)
                setattr(self._rms, name, rms)
                setattr(self._weights, name, weight)
            self._step += 1
            if fetched_step is not None:
                self._staleness[self._step - 1 - fetched_step] += 1
        return True

    def global_step(self) -> int:
        with self._lock:
            return self._step

    def rms_accumulator(self) -> nn.ActorCriticWeights:
        with self._lock:
            return self._rms.copy()

    def staleness_histogram(self) -> dict[int, int]:
        """Pushes by delay: global steps that elapsed between fetch and push."""
        with self._lock:
            return dict(self._staleness)

    def save(self, path) -> None:
        with self._lock:
            tensors = {f"weights/{k}": v for k, v in self._weights.as_dict().items()}
            tensors.update({f"rms/{k}": v for k, v in self._rms.as_dict().items()})
            nn.write_named_tensors(path, tensors, meta={"global_step": self._step})

    @classmethod
    def load(cls, path, learning_rate: float = 1e-3, decay: float = 0.99, epsilon: float = 1e-8):
        tensors, meta = nn.read_named_tensors(path)
        weights = nn.ActorCriticWeights(
            **{k: tensors[f"weights/{k}"] for k in nn.FIELD_NAMES}
        )
        server = cls(weights, learning_rate, decay, epsilon)
        server._rms = nn.ActorCriticWeights(**{k: tensors[f"rms/{k}"] for k in nn.FIELD_NAMES})
        server._step = int(meta.get("global_step", 0))
        return server


def check_delay_bound(worker_count: int, expected_total_pushes: int) -> bool:
    """Warn when the worker count outgrows the delayed-gradient safety margin.

    Asynchronous updates tolerate delays only while the worker count stays
    within about sqrt(total pushes); beyond that the configuration is flagged,
    not blocked.
    """
    limit = np.sqrt(max(expected_total_pushes, 0))
    if worker_count > limit:
        warnings.warn(
            f"{worker_count} workers exceeds the delayed-gradient margin "
            f"sqrt({expected_total_pushes}) ~= {limit:.1f}; stale pushes may slow learning",
            stacklevel=2,
        )
        return False
    return True
