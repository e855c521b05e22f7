"""Ordinal linear discriminant analysis over beat-synchronous features.

Training tracks contribute a within-class scatter A_w (segments as classes,
in temporal order) and an ordinal between-class scatter A_o built from each
adjacent class pair's mutual centroid.  The learned transform maximizes the
trace ratio tr((W'(A_w+lambda*I)W)^-1 W'A_oW); its top-d columns project
features before boundary detection.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import DegenerateScatter

DEFAULT_LAMBDA = 1e-4
DEFAULT_PROJECTION_DIM = 16


@dataclass
class OldaModel:
    W: np.ndarray  # (D, D), columns sorted by descending eigenvalue
    d: int
    lam: float

    @property
    def D(self) -> int:
        return self.W.shape[0]

    def projection(self) -> np.ndarray:
        return self.W[:, :min(self.d, self.D)]

    def to_json(self) -> str:
        return json.dumps({"W": self.W.tolist(), "D": self.D, "d": self.d,
                           "lambda": self.lam})

    @classmethod
    def from_json(cls, text: str) -> "OldaModel":
        doc = json.loads(text)
        w = np.asarray(doc["W"], dtype=np.float64)
        if w.shape != (doc["D"], doc["D"]):
            raise ValueError(f"W shape {w.shape} does not match D={doc['D']}")
        return cls(w, int(doc["d"]), float(doc["lambda"]))

    @classmethod
    def identity(cls, dim: int, d: int | None = None,
                 lam: float = DEFAULT_LAMBDA) -> "OldaModel":
        return cls(np.eye(dim), d or dim, lam)


def classes_from_boundaries(beat_times: np.ndarray,
                            boundary_times: np.ndarray) -> np.ndarray:
    """Ordinal segment index for each beat; boundaries include 0 and end."""
    inner = np.asarray(boundary_times, dtype=float)[1:-1]
    return np.array([bisect_right(inner, t) for t in beat_times], dtype=int)


def scatter_matrices(features: np.ndarray,
                     classes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One track's (A_w, A_o) contributions."""
    dim = features.shape[0]
    a_w = np.zeros((dim, dim))
    a_o = np.zeros((dim, dim))
    labels = sorted(set(classes.tolist()))
    stats = {}
    for c in labels:
        x = features[:, classes == c]
        mu = x.mean(axis=1)
        centered = x - mu[:, None]
        a_w += centered @ centered.T
        stats[c] = (x.shape[1], mu)
    for c, c_next in zip(labels, labels[1:]):
        n_a, mu_a = stats[c]
        n_b, mu_b = stats[c_next]
        mutual = (n_a * mu_a + n_b * mu_b) / (n_a + n_b)
        da = (mu_a - mutual)[:, None]
        db = (mu_b - mutual)[:, None]
        a_o += n_a * (da @ da.T) + n_b * (db @ db.T)
    return a_w, a_o


def objective(w: np.ndarray, a_o: np.ndarray, a_w: np.ndarray,
              lam: float) -> float:
    b = w.T @ (a_w + lam * np.eye(a_w.shape[0])) @ w
    return float(np.trace(np.linalg.solve(b, w.T @ a_o @ w)))


def olda_fit(training: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
             lam: float = DEFAULT_LAMBDA,
             d: int = DEFAULT_PROJECTION_DIM) -> OldaModel:
    """Fit the transform from (features, boundary_times, beat_times) tracks.

    With no between-class scatter at all (every track a single segment) the
    objective is flat and the identity transform is returned.
    """
    if not training:
        raise ValueError("need at least one training track")
    dim = training[0][0].shape[0]
    a_w = np.zeros((dim, dim))
    a_o = np.zeros((dim, dim))
    for features, boundary_times, beat_times in training:
        classes = classes_from_boundaries(np.asarray(beat_times),
                                          np.asarray(boundary_times))
        w_part, o_part = scatter_matrices(np.asarray(features, dtype=np.float64),
                                          classes)
        a_w += w_part
        a_o += o_part
    if not a_w.any() and not a_o.any():
        raise DegenerateScatter("all training features identical")
    if not a_o.any():
        return OldaModel.identity(dim, d, lam)

    reg = a_w + lam * np.eye(dim)
    eigvals, eigvecs = scipy.linalg.eigh(a_o, reg)
    order = np.argsort(eigvals)[::-1]
    return OldaModel(eigvecs[:, order], d, lam)
