"""Build and persist the scene corpus: color profiles, filters, genre labels.

A corpus video is harmonized to the output geometry, segmented into scenes,
and each scene is profiled by a 768-bin color histogram (256 bins per
channel, concatenated B,G,R, each block normalized to unit mass).  Scenes
outside the frame-count bounds are dropped; a video containing any scene
longer than 60 s is rejected outright.  The result is one JSON document per
video plus a manifest, all under an index directory.
"""

from __future__ import annotations

import datetime
import glob
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import media
from .config import PipelineConfig
from .errors import CorruptIndex, EmptyCorpus, EmptyScene, NoAudioStream
from .genre import UNKNOWN, GenreCache, GenreClients, resolve_genre
from .media import RawFrame
from .shots import DetectorParams, Scene, frame_channel_hist, make_detector

HIST_FRAME_STRIDE = 5
MIN_SCENE_FRAMES = 12
MAX_SCENE_FRAMES = 125
MAX_SCENE_SECONDS = 60.0
BAR_SAMPLE_FRAMES = 16

VIDEO_EXTENSIONS = {".rav", ".mp4", ".mkv", ".mov", ".avi", ".webm", ".m4v",
                    ".mpg", ".mpeg", ".wmv"}


class HistogramAccumulator:
    """Accumulates raw per-channel counts over every 5th frame of a scene."""

    def __init__(self):
        self.counts = np.zeros((3, 256), dtype=np.int64)
        self.sampled = 0

    def add(self, frame: RawFrame, offset_in_scene: int) -> None:
        if offset_in_scene % HIST_FRAME_STRIDE == 0:
            self.counts += frame_channel_hist(frame)
            self.sampled += 1

    def finalize(self) -> np.ndarray:
        if self.sampled == 0:
            raise EmptyScene("no sampled frames in scene")
        # counts are in the frames' native R,G,B order; blocks go out B,G,R
        blocks = [self.counts[2], self.counts[1], self.counts[0]]
        return np.concatenate([b / b.sum() for b in blocks])


def scene_histogram(frames: Iterable[RawFrame]) -> np.ndarray:
    """768-bin normalized color profile of one scene's frame stream."""
    acc = HistogramAccumulator()
    for offset, frame in enumerate(frames):
        acc.add(frame, offset)
    return acc.finalize()


def validate_histogram(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (768,):
        raise CorruptIndex(f"histogram length {arr.size}, expected 768")
    if (arr < 0).any():
        raise CorruptIndex("negative histogram entry")
    for c in range(3):
        s = arr[c * 256:(c + 1) * 256].sum()
        if abs(s - 1.0) > 1e-6:
            raise CorruptIndex(f"channel block {c} sums to {s!r}")
    return arr


def accept_scene(scene: Scene) -> bool:
    return MIN_SCENE_FRAMES <= scene.frame_count <= MAX_SCENE_FRAMES


def accept_video(scenes: Iterable[Scene]) -> bool:
    return not any(s.duration > MAX_SCENE_SECONDS for s in scenes)


@dataclass
class IndexedScene:
    scene: Scene
    histogram: np.ndarray

    @property
    def ref(self) -> str:
        return f"{self.scene.source_id}:{self.scene.start_frame}"

    @property
    def duration(self) -> float:
        return self.scene.duration


@dataclass
class VideoRecord:
    source_id: str
    genre: str
    fps: float
    scenes: list[IndexedScene]


@dataclass
class SceneIndex:
    videos: dict[str, VideoRecord] = field(default_factory=dict)
    rejected: dict[str, str] = field(default_factory=dict)

    def scenes(self, genre: str | None = None) -> list[IndexedScene]:
        """All scenes, or the slice for one category; Unknown means all."""
        out = []
        for source_id in sorted(self.videos):
            record = self.videos[source_id]
            if genre in (None, UNKNOWN) or record.genre == genre:
                out.extend(record.scenes)
        return out

    def lookup(self, ref: str) -> IndexedScene:
        source_id, start = ref.rsplit(":", 1)
        for sc in self.videos[source_id].scenes:
            if sc.scene.start_frame == int(start):
                return sc
        raise KeyError(ref)

    def fps_of(self, source_id: str) -> float:
        return self.videos[source_id].fps


def media_path(index_dir: str, source_id: str) -> str | None:
    """Harmonized media file for a source, whatever its extension."""
    for cand in sorted(glob.glob(os.path.join(index_dir, "media",
                                              glob.escape(source_id) + ".*"))):
        return cand
    return None


def _segment_and_profile(video_path: str, source_id: str, fps: float,
                         params: DetectorParams | None, mode: str,
                         config: PipelineConfig) -> tuple[list[Scene], list[np.ndarray]]:
    """Single decode pass: detect cuts and accumulate per-scene histograms."""
    detector = make_detector(params, mode)
    scenes: list[Scene] = []
    hists: list[np.ndarray] = []
    acc = HistogramAccumulator()
    start = 0
    last_index = -1
    for frame in media.decode_frames(video_path, 1, config):
        boundary = detector.feed(frame)
        if boundary is not None:
            scenes.append(Scene.from_range(source_id, start,
                                           boundary.frame_index - 1, fps))
            hists.append(acc.finalize())
            acc = HistogramAccumulator()
            start = boundary.frame_index
        acc.add(frame, frame.frame_index - start)
        last_index = frame.frame_index
    if last_index < 0:
        raise EmptyScene(f"{source_id}: no frames decoded")
    scenes.append(Scene.from_range(source_id, start, last_index, fps))
    hists.append(acc.finalize())
    return scenes, hists


def _sample_bar_frames(path: str, info: media.MediaInfo,
                       config: PipelineConfig) -> list[RawFrame]:
    """Frames spread across the video, one streaming pass at source size."""
    stride = max(1, info.n_frames // BAR_SAMPLE_FRAMES)
    return list(media.decode_frames(path, stride, config))


def _index_one(path: str, params: DetectorParams | None, mode: str,
               config: PipelineConfig, clients: GenreClients | None,
               cache: GenreCache) -> VideoRecord:
    source_id = os.path.splitext(os.path.basename(path))[0]
    info = media.probe(path, config)
    spec = media.detect_black_bars(_sample_bar_frames(path, info, config))

    media_dir = os.path.join(config.index_dir, "media")
    os.makedirs(media_dir, exist_ok=True)
    ext = os.path.splitext(path)[1]
    harmonized = media.harmonize(path, spec,
                                 os.path.join(media_dir, source_id + ext),
                                 config)

    scenes, hists = _segment_and_profile(harmonized, source_id, info.fps,
                                         params, mode, config)
    if not accept_video(scenes):
        worst = max(s.duration for s in scenes)
        raise ValueError(f"scene longer than {MAX_SCENE_SECONDS:.0f} s "
                         f"({worst:.1f} s)")
    kept = [(s, h) for s, h in zip(scenes, hists) if accept_scene(s)]
    if not kept:
        raise ValueError("no scenes within frame-count bounds")

    genre = UNKNOWN
    try:
        audio = media.decode_audio(path, 22050, config)
        genre = resolve_genre(audio, clients, cache=cache).category
    except NoAudioStream:
        pass
    return VideoRecord(source_id, genre, info.fps,
                       [IndexedScene(s, h) for s, h in kept])


def build_index(corpus_dir: str, params: DetectorParams | None = None,
                config: PipelineConfig | None = None, mode: str = "content",
                clients: GenreClients | None = None,
                progress: Callable[[str], None] | None = None) -> SceneIndex:
    """Index every decodable video under corpus_dir; persist the result.

    Per-video failures are recorded as rejections with a reason and do not
    abort the run.
    """
    config = config or PipelineConfig()
    say = progress or (lambda line: None)
    files = sorted(
        p for p in glob.glob(os.path.join(corpus_dir, "*"))
        if os.path.splitext(p)[1].lower() in VIDEO_EXTENSIONS)
    if not files:
        raise EmptyCorpus(corpus_dir)

    cache = GenreCache(config.genre_cache_path)
    index = SceneIndex()

    def work(path: str):
        source_id = os.path.splitext(os.path.basename(path))[0]
        try:
            return source_id, _index_one(path, params, mode, config,
                                         clients, cache), None
        except Exception as exc:
            return source_id, None, f"{type(exc).__name__}: {exc}"

    workers = config.workers or min(4, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(work, files))

    for source_id, record, reason in results:
        if record is not None:
            index.videos[source_id] = record
            say(f"indexed {source_id}: {len(record.scenes)} scenes, "
                f"genre {record.genre}")
        else:
            index.rejected[source_id] = reason
            say(f"rejected {source_id}: {reason}")

    save_index(index, config.index_dir, params, mode)
    return index


def _video_doc(record: VideoRecord) -> dict:
    return {
        "source_id": record.source_id,
        "genre": record.genre,
        "fps": record.fps,
        "scenes": [{
            "start_frame": sc.scene.start_frame,
            "end_frame": sc.scene.end_frame,
            "duration_s": sc.scene.duration,
            "histogram": [float(v) for v in sc.histogram],
        } for sc in record.scenes],
    }


def save_index(index: SceneIndex, index_dir: str,
               params: DetectorParams | None = None,
               mode: str = "content") -> str:
    params = params or DetectorParams()
    videos_dir = os.path.join(index_dir, "videos")
    os.makedirs(videos_dir, exist_ok=True)
    for source_id in sorted(index.videos):
        with open(os.path.join(videos_dir, source_id + ".json"), "w") as f:
            json.dump(_video_doc(index.videos[source_id]), f)
    manifest = {
        "videos": sorted(index.videos),
        "rejected": dict(sorted(index.rejected.items())),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "detector_params": {
            "mode": mode,
            "pixel_threshold": params.pixel_threshold,
            "percent_threshold": params.percent_threshold,
            "histogram_threshold": params.histogram_threshold,
        },
    }
    with open(os.path.join(index_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return index_dir


def load_index(index_dir: str) -> SceneIndex:
    manifest_path = os.path.join(index_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise CorruptIndex(f"no manifest at {manifest_path}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    if "videos" not in manifest:
        raise CorruptIndex("manifest lacks video list")

    index = SceneIndex(rejected=dict(manifest.get("rejected", {})))
    for source_id in manifest["videos"]:
        doc_path = os.path.join(index_dir, "videos", source_id + ".json")
        try:
            with open(doc_path) as f:
                doc = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise CorruptIndex(f"{doc_path}: {exc}") from exc
        try:
            fps = float(doc["fps"])
            scenes = []
            for s in doc["scenes"]:
                scene = Scene(doc["source_id"], int(s["start_frame"]),
                              int(s["end_frame"]), float(s["duration_s"]))
                scenes.append(IndexedScene(scene, validate_histogram(s["histogram"])))
            index.videos[source_id] = VideoRecord(doc["source_id"],
                                                  doc["genre"], fps, scenes)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptIndex(f"{doc_path}: {exc}") from exc
    return index
