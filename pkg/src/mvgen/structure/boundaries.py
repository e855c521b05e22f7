"""Structural boundary detection over projected beat features.

Beats are greedily merged (adjacent segments only, Ward-style cost in the
projected, row-standardized feature space) down to a duration-derived
segment count; boundaries are the beat times at segment starts plus the
track endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputLengthOutOfRange
from ..media import PcmAudio
from .features import extract_beat_features
from .olda import OldaModel
from .repetition import LATENT_DIM, latent_repetition, self_similarity, stack_features

MIN_INPUT_SECONDS = 60.0
MAX_INPUT_SECONDS = 400.0
SECONDS_PER_SEGMENT = 32.0
MIN_SEGMENTS = 2
MAX_SEGMENTS = 26


@dataclass
class BoundarySet:
    times: np.ndarray  # strictly increasing; first 0.0, last = duration

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def internal(self) -> np.ndarray:
        return self.times[1:-1]


def segment_count(duration: float) -> int:
    return int(np.clip(round(duration / SECONDS_PER_SEGMENT),
                       MIN_SEGMENTS, MAX_SEGMENTS))


def check_input_length(duration: float) -> None:
    if not MIN_INPUT_SECONDS <= duration <= MAX_INPUT_SECONDS:
        raise InputLengthOutOfRange(
            f"{duration:.1f} s outside [{MIN_INPUT_SECONDS:.0f}, "
            f"{MAX_INPUT_SECONDS:.0f}]")


def _standardize_rows(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    std[std == 0] = 1.0
    return (x - mean) / std


def _ward_adjacent(x: np.ndarray, n_segments: int) -> list[int]:
    """Greedy adjacent merges down to n_segments; returns segment starts."""
    t = x.shape[1]
    if n_segments >= t:
        return list(range(t))
    starts = list(range(t))
    counts = [1] * t
    sums = [x[:, i].copy() for i in range(t)]

    def cost(i: int) -> float:
        n_a, n_b = counts[i], counts[i + 1]
        mu_a = sums[i] / n_a
        mu_b = sums[i + 1] / n_b
        diff = mu_a - mu_b
        return n_a * n_b / (n_a + n_b) * float(diff @ diff)

    costs = [cost(i) for i in range(len(starts) - 1)]
    while len(starts) > n_segments:
        i = int(np.argmin(costs))
        counts[i] += counts[i + 1]
        sums[i] = sums[i] + sums[i + 1]
        del counts[i + 1], sums[i + 1], starts[i + 1], costs[i]
        if i < len(costs):
            costs[i] = cost(i)
        if i > 0:
            costs[i - 1] = cost(i - 1)
    return starts


def detect_boundaries(audio: PcmAudio, model: OldaModel | None = None,
                      repetitive: bool = True) -> BoundarySet:
    """Boundary times for one track, through an optional learned projection.

    With no model the stacked features are used as-is (identity transform).
    Rows are standardized before clustering either way, so unscaled ordinal
    rows cannot dominate the merge cost.
    """
    duration = audio.duration
    check_input_length(duration)
    grid, mfcc_sync, chroma_sync = extract_beat_features(audio)

    latent_mfcc = latent_chroma = None
    if repetitive:
        t = mfcc_sync.shape[1]
        d = min(LATENT_DIM, max(1, t - 1))
        latent_mfcc = latent_repetition(self_similarity(mfcc_sync), d)
        latent_chroma = latent_repetition(self_similarity(chroma_sync), d)
    stacked = stack_features(mfcc_sync, chroma_sync, latent_mfcc,
                             latent_chroma, grid, repetitive)

    projected = stacked if model is None else model.projection().T @ stacked
    z = _standardize_rows(projected)

    starts = _ward_adjacent(z, segment_count(duration))
    times = [0.0]
    for s in starts[1:]:
        t_beat = float(grid.beat_times[s])
        if times[-1] < t_beat < duration:
            times.append(t_beat)
    times.append(duration)
    return BoundarySet(np.array(times))
