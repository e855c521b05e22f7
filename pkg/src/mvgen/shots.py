"""Threshold-based shot boundary detection over decoded frame streams.

Two detectors are provided.  The content detector compares adjacent frames
pixel by pixel on mean-of-RGB intensity and cuts when the share of changed
pixels exceeds a percentage threshold.  The histogram detector compares
adjacent frames by the L1 distance between their per-channel 256-bin
histograms, on raw (unnormalized) counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import DimensionMismatch, InsufficientFrames
from .media import RawFrame

DEFAULT_PIXEL_THRESHOLD = 30.0
DEFAULT_PERCENT_THRESHOLD = 30.0


@dataclass
class DetectorParams:
    pixel_threshold: float = DEFAULT_PIXEL_THRESHOLD
    percent_threshold: float = DEFAULT_PERCENT_THRESHOLD
    # None resolves to M*N once frame dimensions are known: the raw-count
    # L1 metric scales with pixel count, so a fixed default cannot work
    histogram_threshold: float | None = None

    def resolved_histogram_threshold(self, width: int, height: int) -> float:
        if self.histogram_threshold is not None:
            return self.histogram_threshold
        return float(width * height)


@dataclass
class ShotBoundary:
    frame_index: int  # first frame of the new shot
    score: float


@dataclass
class Scene:
    source_id: str
    start_frame: int
    end_frame: int  # inclusive
    duration: float

    @property
    def frame_count(self) -> int:
        return self.end_frame - self.start_frame + 1

    @classmethod
    def from_range(cls, source_id: str, start: int, end: int, fps: float) -> "Scene":
        return cls(source_id, start, end, (end - start + 1) / fps)


def _channel_sum(frame: RawFrame) -> np.ndarray:
    # R+G+B fits int16; |sum_a - sum_b| > 3t is exactly mean delta > t
    flat = frame.pixel_data.reshape(-1, 3)
    s = flat[:, 0].astype(np.int16)
    s += flat[:, 1]
    s += flat[:, 2]
    return s


def _diff_percent(sum_a: np.ndarray, sum_b: np.ndarray, t: float) -> float:
    delta = sum_a - sum_b
    np.abs(delta, out=delta)
    changed = int(np.count_nonzero(delta > 3.0 * t))
    return 100.0 * changed / sum_a.size


def pairwise_diff(frame_a: RawFrame, frame_b: RawFrame, t: float) -> float:
    """Percentage of pixels whose mean-of-RGB intensity delta exceeds t."""
    if (frame_a.width, frame_a.height) != (frame_b.width, frame_b.height):
        raise DimensionMismatch(
            f"{frame_a.width}x{frame_a.height} vs {frame_b.width}x{frame_b.height}")
    return _diff_percent(_channel_sum(frame_a), _channel_sum(frame_b), t)


def frame_channel_hist(frame: RawFrame) -> np.ndarray:
    """(3, 256) int64 count histogram in the frame's native R,G,B order."""
    import cv2

    pixels = frame.pixel_data
    if not pixels.flags.c_contiguous:
        pixels = np.ascontiguousarray(pixels)
    # calcHist counts in float32; exact for any frame below 2^24 pixels
    return np.stack([
        cv2.calcHist([pixels], [c], None, [256], [0, 256]).ravel()
        for c in range(3)
    ]).astype(np.int64)


class ContentDetector:
    """Incremental content-aware detector; feed frames in order."""

    def __init__(self, params: DetectorParams | None = None):
        self.params = params or DetectorParams()
        self._prev_sum: np.ndarray | None = None
        self._prev_shape: tuple[int, int] | None = None
        self._index = -1

    def feed(self, frame: RawFrame) -> ShotBoundary | None:
        self._index += 1
        shape = (frame.width, frame.height)
        cur = _channel_sum(frame)
        prev, self._prev_sum = self._prev_sum, cur
        prev_shape, self._prev_shape = self._prev_shape, shape
        if prev is None:
            return None
        if prev_shape != shape:
            raise DimensionMismatch(f"{prev_shape} vs {shape}")
        score = _diff_percent(prev, cur, self.params.pixel_threshold)
        if score > self.params.percent_threshold:
            return ShotBoundary(self._index, score)
        return None

    @property
    def frames_seen(self) -> int:
        return self._index + 1


class HistogramDetector:
    """Incremental histogram detector; feed frames in order."""

    def __init__(self, params: DetectorParams | None = None):
        self.params = params or DetectorParams()
        self._prev_hist: np.ndarray | None = None
        self._threshold: float | None = None
        self._index = -1

    def feed(self, frame: RawFrame) -> ShotBoundary | None:
        self._index += 1
        if self._threshold is None:
            self._threshold = self.params.resolved_histogram_threshold(
                frame.width, frame.height)
        hist = frame_channel_hist(frame)
        prev, self._prev_hist = self._prev_hist, hist
        if prev is None:
            return None
        score = float(np.abs(hist - prev).sum())
        if score > self._threshold:
            return ShotBoundary(self._index, score)
        return None

    @property
    def frames_seen(self) -> int:
        return self._index + 1


def _collect(frames: Iterable[RawFrame], detector) -> list[ShotBoundary]:
    boundaries = [b for frame in frames if (b := detector.feed(frame))]
    if detector.frames_seen < 2:
        raise InsufficientFrames(f"need >= 2 frames, got {detector.frames_seen}")
    return boundaries


def detect_content(frames: Iterable[RawFrame],
                   params: DetectorParams | None = None) -> list[ShotBoundary]:
    return _collect(frames, ContentDetector(params))


def detect_histogram(frames: Iterable[RawFrame],
                     params: DetectorParams | None = None) -> list[ShotBoundary]:
    return _collect(frames, HistogramDetector(params))


def make_detector(params: DetectorParams | None, mode: str):
    if mode == "content":
        return ContentDetector(params)
    if mode == "histogram":
        return HistogramDetector(params)
    raise ValueError(f"unknown detector mode {mode!r}")


def scenes_from_boundaries(source_id: str, boundaries: list[ShotBoundary],
                           n_frames: int, fps: float) -> list[Scene]:
    """Partition [0, n_frames) at the boundary indices."""
    starts = [0] + [b.frame_index for b in boundaries]
    ends = [b.frame_index - 1 for b in boundaries] + [n_frames - 1]
    return [Scene.from_range(source_id, s, e, fps)
            for s, e in zip(starts, ends)]


def segment(source_id: str, frames: Iterable[RawFrame],
            params: DetectorParams | None = None, mode: str = "content",
            fps: float = 25.0) -> list[Scene]:
    """Split a frame stream into contiguous scenes covering every frame."""
    detector = make_detector(params, mode)
    boundaries = [b for frame in frames if (b := detector.feed(frame))]
    n = detector.frames_seen
    if n < 1:
        raise InsufficientFrames("empty frame stream")
    return scenes_from_boundaries(source_id, boundaries, n, fps)
