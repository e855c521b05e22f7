"""K-Means over scene color histograms, with per-slice catalog persistence.

Lloyd iterations with Euclidean distance run until no assignment changes
(or a safety cap).  Initial centroids are K distinct points drawn from the
lexicographically sorted unique-point array, which makes the result both
seed-deterministic and invariant to input ordering.  Catalogs are keyed by
(genre, K, seed) on disk so repeated generations skip the computation.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .config import PipelineConfig
from .errors import EmptySlice
from .genre import UNKNOWN
from .sceneindex import SceneIndex

DEFAULT_K = 90
MAX_ITER = 300
WHOLE = "Whole"  # catalog label when clustering spans every genre


class KTooLargeWarning(UserWarning):
    pass


@dataclass
class ClusterCatalog:
    genre: str
    K: int
    seed: int
    centroids: np.ndarray  # (K, 768)
    assignments: dict[str, int]  # scene-ref -> cluster id
    inertia: float

    def members(self, cluster_id: int) -> list[str]:
        return [ref for ref, c in self.assignments.items() if c == cluster_id]

    def to_json(self) -> str:
        return json.dumps({
            "genre": self.genre,
            "K": self.K,
            "seed": self.seed,
            "centroids": [[float(v) for v in row] for row in self.centroids],
            "assignments": self.assignments,
            "inertia": float(self.inertia),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ClusterCatalog":
        doc = json.loads(text)
        return cls(doc["genre"], int(doc["K"]), int(doc["seed"]),
                   np.asarray(doc["centroids"], dtype=np.float64),
                   {k: int(v) for k, v in doc["assignments"].items()},
                   float(doc["inertia"]))


def _init_centroids(points: np.ndarray, k: int, seed: int,
                    init: str) -> tuple[np.ndarray, int]:
    """Pick k starting centroids from the sorted unique-point array."""
    unique = np.unique(points, axis=0)
    if k > len(unique):
        warnings.warn(f"K={k} exceeds {len(unique)} distinct points; reduced",
                      KTooLargeWarning)
        k = len(unique)
    rng = np.random.default_rng(seed)
    if init == "kmeans++":
        chosen = [int(rng.integers(len(unique)))]
        for _ in range(1, k):
            d2 = cdist(unique, unique[chosen]).min(axis=1) ** 2
            total = d2.sum()
            if total <= 0:
                remaining = np.setdiff1d(np.arange(len(unique)), chosen)
                chosen.append(int(remaining[0]))
                continue
            chosen.append(int(rng.choice(len(unique), p=d2 / total)))
        return unique[chosen].copy(), k
    if init != "random":
        raise ValueError(f"unknown init {init!r}")
    idx = rng.choice(len(unique), size=k, replace=False)
    return unique[np.sort(idx)].copy(), k


def _inertia(points: np.ndarray, centroids: np.ndarray,
             labels: np.ndarray) -> float:
    diff = points - centroids[labels]
    return float((diff * diff).sum())


def kmeans(points: np.ndarray, k: int, seed: int = 0,
           max_iter: int = MAX_ITER,
           init: str = "random") -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd K-Means; returns (centroids, labels, inertia)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("points must be a non-empty 2-D array")
    if k < 1:
        raise ValueError("K must be >= 1")
    centroids, k = _init_centroids(points, k, seed, init)

    labels = None
    prev_inertia = np.inf
    for _ in range(max_iter):
        dist = cdist(points, centroids)
        new_labels = dist.argmin(axis=1)

        # re-seed empty clusters from the point farthest from its centroid
        for c in range(k):
            if not (new_labels == c).any():
                to_own = dist[np.arange(len(points)), new_labels]
                donor = int(np.argmax(to_own))
                centroids[c] = points[donor]
                dist[:, c] = cdist(points, centroids[c][None, :]).ravel()
                new_labels = dist.argmin(axis=1)

        if labels is not None and np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
        cur = _inertia(points, centroids, labels)
        assert cur <= prev_inertia + 1e-9 * max(1.0, prev_inertia), \
            f"inertia increased: {prev_inertia} -> {cur}"
        prev_inertia = cur

    return centroids, labels, _inertia(points, centroids, labels)


def catalog_path(index_dir: str, genre: str, k: int, seed: int) -> str:
    return os.path.join(index_dir, "catalogs", f"{genre}-K{k}-seed{seed}.json")


def cluster_index(index: SceneIndex, genre: str | None = None,
                  k: int = DEFAULT_K, seed: int = 0,
                  config: PipelineConfig | None = None,
                  init: str = "random") -> ClusterCatalog:
    """Cluster one genre slice (Unknown/None means the whole index).

    A previously persisted catalog for the same (genre, K, seed) is loaded
    instead of recomputed.
    """
    config = config or PipelineConfig()
    slice_name = WHOLE if genre in (None, UNKNOWN) else genre
    path = catalog_path(config.index_dir, slice_name, k, seed)
    if os.path.exists(path):
        with open(path) as f:
            return ClusterCatalog.from_json(f.read())

    scenes = index.scenes(genre)
    if not scenes:
        raise EmptySlice(f"no scenes for genre {slice_name}")
    refs = [sc.ref for sc in scenes]
    points = np.stack([sc.histogram for sc in scenes])
    centroids, labels, inertia = kmeans(points, k, seed, init=init)
    catalog = ClusterCatalog(slice_name, len(centroids), seed, centroids,
                             {ref: int(c) for ref, c in zip(refs, labels)},
                             inertia)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        f.write(catalog.to_json())
    return catalog
