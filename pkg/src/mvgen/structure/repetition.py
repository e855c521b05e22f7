"""Latent structural repetition from beat-synchronous features.

A binary k-nearest-neighbor self-similarity matrix over beats is skewed so
that diagonals become rows (a repetition at lag p shows up as a constant
stripe in row t+p), smoothed with a horizontal median filter, and reduced
to a low-rank latent factor.
"""

from __future__ import annotations

import numpy as np
import scipy.ndimage
from scipy.spatial.distance import cdist

from ..errors import ColumnMismatch, TooFewBeats
from .features import BeatGrid

MEDIAN_WIDTH = 7  # beats
LATENT_DIM = 16
_SV_TOL = 1e-10


def default_k(t: int) -> int:
    return max(1, int(round(np.sqrt(t))))


def self_similarity(features: np.ndarray, k_neighbors: int | None = None,
                    median_width: int = MEDIAN_WIDTH) -> np.ndarray:
    """(2t, t) skewed binary kNN similarity, median-filtered row-wise."""
    t = features.shape[1]
    k = default_k(t) if k_neighbors is None else k_neighbors
    if t < k + 1:
        raise TooFewBeats(f"{t} beats cannot support k={k}")

    dist = cdist(features.T, features.T)
    np.fill_diagonal(dist, np.inf)
    s = np.zeros((t, t))
    # argpartition gives each column's k nearest rows (self excluded)
    nearest = np.argpartition(dist, k - 1, axis=0)[:k]
    s[nearest, np.arange(t)[None, :]] = 1.0
    s = np.maximum(s, s.T)

    skewed = np.zeros((2 * t, t))
    rows = np.arange(t)
    for i in range(t):
        skewed[(rows - i) + t, i] = s[rows, i]
    if median_width > 1:
        skewed = scipy.ndimage.median_filter(
            skewed, size=(1, median_width), mode="constant", cval=0.0)
    return skewed


def latent_repetition(rep: np.ndarray, d: int = LATENT_DIM) -> np.ndarray:
    """(d, t) projection of R onto its top-d left singular directions.

    Rank deficiency is not an error: directions whose singular value
    vanishes contribute zero rows, keeping the shape at exactly (d, t).
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    d = min(d, min(rep.shape))
    u, s, _ = np.linalg.svd(rep, full_matrices=False)
    latent = u[:, :d].T @ rep
    latent[s[:d] < _SV_TOL] = 0.0
    return latent


def stack_features(mfcc_sync: np.ndarray, chroma_sync: np.ndarray,
                   latent_mfcc: np.ndarray | None,
                   latent_chroma: np.ndarray | None,
                   beats: BeatGrid, repetitive: bool = True) -> np.ndarray:
    """Row-stack all per-beat descriptors in a fixed order.

    Order: mean MFCC, median chroma, latent MFCC, latent chroma (the two
    latent blocks only in repetitive mode), then beat index, beat time and
    beat time normalized by track duration.
    """
    t = mfcc_sync.shape[1]
    blocks = [mfcc_sync, chroma_sync]
    if repetitive:
        if latent_mfcc is None or latent_chroma is None:
            raise ColumnMismatch("repetitive mode needs both latent blocks")
        blocks += [latent_mfcc, latent_chroma]
    blocks += [
        np.arange(t, dtype=float)[None, :],
        beats.beat_times[None, :],
        (beats.beat_times / beats.duration)[None, :],
    ]
    if t == 0:
        raise ColumnMismatch("zero beats")
    for b in blocks:
        if b.shape[1] != t:
            raise ColumnMismatch(f"{b.shape[1]} columns, expected {t}")
    return np.vstack(blocks)
