"""Weighted K-means over mobility features and index-based cluster-count selection.

The distance between two trajectories weighs position and speed mismatch:

    dis(d, o) = tau * sum_t[(x_t-ox_t)^2 + (y_t-oy_t)^2] + (1-tau) * sum_t (v_t-ov_t)^2

Lloyd iterations with this distance keep the usual per-coordinate-mean centroid
update, since the weights are fixed and positive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mobility import MobilityFeature


def _stack(features) -> np.ndarray:
    """Coerce a feature list (or an already-stacked array) to shape (N, T, 3)."""
    if isinstance(features, np.ndarray):
        x = features
    else:
        x = np.stack(
            [f.samples if isinstance(f, MobilityFeature) else np.asarray(f, float) for f in features]
        )
    if x.ndim != 3 or x.shape[2] != 3:
        raise ValueError(f"features must stack to (N, T, 3), got shape {x.shape}")
    return x.astype(float, copy=False)


def feature_distance(d, o, tau: float) -> float:
    """Weighted squared trajectory distance between a feature and a centroid."""
    d = d.samples if isinstance(d, MobilityFeature) else np.asarray(d, float)
    o = o.samples if isinstance(o, MobilityFeature) else np.asarray(o, float)
    if d.shape != o.shape:
        raise ValueError(f"feature/centroid length mismatch: {d.shape} vs {o.shape}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    diff = d - o
    pos = float((diff[:, :2] ** 2).sum())
    vel = float((diff[:, 2] ** 2).sum())
    return tau * pos + (1.0 - tau) * vel


def _pairwise(x: np.ndarray, centroids: np.ndarray, tau: float) -> np.ndarray:
    """Distance matrix (N, H) under the weighted trajectory distance."""
    dpos = ((x[:, None, :, :2] - centroids[None, :, :, :2]) ** 2).sum(axis=(2, 3))
    dvel = ((x[:, None, :, 2] - centroids[None, :, :, 2]) ** 2).sum(axis=2)
    return tau * dpos + (1.0 - tau) * dvel


@dataclass
class ClusterModel:
    """Result of one clustering: centroids, the UE partition, and quality scores."""

    centroids: np.ndarray = field(repr=False)
    assignments: np.ndarray
    h_count: int
    tau: float
    inertia: float
    n_iter: int = 0
    chi: float | None = None
    chi_by_h: dict[int, float] | None = None

    def to_dict(self) -> dict:
        return {
            "h_count": self.h_count,
            "tau": self.tau,
            "inertia": self.inertia,
            "n_iter": self.n_iter,
            "chi": self.chi,
            "chi_by_h": self.chi_by_h,
            "assignments": self.assignments.tolist(),
            "centroids": self.centroids.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusterModel":
        chi_by_h = doc.get("chi_by_h")
        if chi_by_h is not None:
            chi_by_h = {int(k): float(v) for k, v in chi_by_h.items()}
        return cls(
            centroids=np.asarray(doc["centroids"], dtype=float),
            assignments=np.asarray(doc["assignments"], dtype=int),
            h_count=int(doc["h_count"]),
            tau=float(doc["tau"]),
            inertia=float(doc["inertia"]),
            n_iter=int(doc.get("n_iter", 0)),
            chi=doc.get("chi"),
            chi_by_h=chi_by_h,
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "ClusterModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _lloyd_once(x: np.ndarray, h: int, tau: float, rng: np.random.Generator, max_iters: int):
    """One Lloyd run from a random (Forgy) init; returns (centroids, assign, inertia, iters)."""
    n = len(x)
    centroids = x[rng.choice(n, size=h, replace=False)].copy()
    assign = np.full(n, -1, dtype=int)
    prev_obj = math.inf
    for it in range(1, max_iters + 1):
        dist = _pairwise(x, centroids, tau)
        new_assign = dist.argmin(axis=1)
        # Empty-cluster repair: re-seed the centroid at the point farthest from
        # its current one (picked from clusters that can spare a member).
        for empty in range(h):
            while not np.any(new_assign == empty):
                sizes = np.bincount(new_assign, minlength=h)
                movable = sizes[new_assign] > 1
                far = int(np.argmax(np.where(movable, dist[np.arange(n), new_assign], -np.inf)))
                centroids[empty] = x[far]
                new_assign[far] = empty
                dist[:, empty] = _pairwise(x, centroids[empty : empty + 1], tau)[:, 0]
        for k in range(h):
            centroids[k] = x[new_assign == k].mean(axis=0)
        obj = float(_pairwise(x, centroids, tau)[np.arange(n), new_assign].sum())
        assert obj <= prev_obj + 1e-8 * max(1.0, abs(prev_obj)), "Lloyd objective increased"
        if np.array_equal(new_assign, assign):
            return centroids, assign, obj, it
        assign = new_assign
        prev_obj = obj
    return centroids, assign, prev_obj, max_iters


def kmeans(
    features,
    h: int,
    tau: float,
    rng: np.random.Generator,
    restarts: int = 1,
    max_iters: int = 300,
) -> ClusterModel:
    """Weighted K-means; with restarts > 1 the lowest-inertia run wins."""
    x = _stack(features)
    if not 1 <= h <= len(x):
        raise ValueError(f"h must lie in [1, {len(x)}], got {h}")
    best = None
    for _ in range(max(1, restarts)):
        centroids, assign, inertia, iters = _lloyd_once(x, h, tau, rng, max_iters)
        if best is None or inertia < best.inertia:
            best = ClusterModel(centroids, assign, h, tau, inertia, iters)
    return best


def chi(features, model: ClusterModel) -> float:
    """Variance-ratio cluster validity index, scaled by (N - H) / (H - 1).

    A zero intra-cluster dispersion (every point on its centroid) returns the
    +inf sentinel: a perfect clustering.
    """
    if model.h_count < 2:
        raise ValueError("index needs at least 2 clusters")
    x = _stack(features)
    n = len(x)
    global_centroid = x.mean(axis=0)
    inter = 0.0
    intra = 0.0
    for k in range(model.h_count):
        members = x[model.assignments == k]
        inter += len(members) * feature_distance(model.centroids[k], global_centroid, model.tau)
        intra += float(
            _pairwise(members, model.centroids[k : k + 1], model.tau).sum()
        )
    if intra == 0.0:
        return math.inf
    return (inter / intra) * (n - model.h_count) / (model.h_count - 1)


def select_h(
    features,
    h_max: int,
    tau: float,
    rng: np.random.Generator,
    restarts: int = 10,
    max_iters: int = 300,
) -> ClusterModel:
    """Cluster at every candidate count 2..h_max and keep the best-index model."""
    x = _stack(features)
    if len(x) < 2:
        raise ValueError("need at least 2 features to cluster")
    if h_max < 2:
        raise ValueError(f"h_max must be >= 2, got {h_max}")
    chi_by_h: dict[int, float] = {}
    best = None
    for h in range(2, min(h_max, len(x)) + 1):
        model = kmeans(x, h, tau, rng, restarts=restarts, max_iters=max_iters)
        model.chi = chi(x, model)
        chi_by_h[h] = model.chi
        if best is None or model.chi > best.chi:
            best = model
    best.chi_by_h = chi_by_h
    return best
