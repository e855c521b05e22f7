"""Shared fixture builders: raw frames, RAV/WAV files, synthetic corpora."""

import json
import os
import sys
import wave

import numpy as np

from mvgen import rawcodec
from mvgen.config import PipelineConfig
from mvgen.media import PcmAudio, RawFrame

# The bundled codec stands in for ffmpeg so the suite runs offline.
TOOL = f"{sys.executable} -m mvgen.rawcodec"


def tool_config(index_dir: str = "index", **kw) -> PipelineConfig:
    kw.setdefault("codec_tool_path", TOOL)
    return PipelineConfig(index_dir=index_dir, **kw)


def make_frame(pixels, index: int = 0, fps: float = 25.0) -> RawFrame:
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    h, w, _ = arr.shape
    return RawFrame(w, h, arr, index, index / fps)


def solid(width: int, height: int, rgb) -> np.ndarray:
    return np.full((height, width, 3), rgb, dtype=np.uint8)


def frame_run(colors, width: int = 32, height: int = 18,
              start: int = 0) -> list[RawFrame]:
    return [make_frame(solid(width, height, c), start + i)
            for i, c in enumerate(colors)]


def write_wav(path, samples, rate: int = 44100) -> str:
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0),
                  -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(pcm.tobytes())
    return str(path)


def sine(duration: float, hz: float, rate: int = 44100,
         gain: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(duration * rate))) / rate
    return gain * np.sin(2 * np.pi * hz * t)


def two_section_track(total: float, change: float, seed: int = 0,
                      sr: int = 22050) -> PcmAudio:
    """Steady click grid with a hard timbre switch at `change` seconds."""
    rng = np.random.default_rng(seed)
    n = int(total * sr)
    t = np.arange(n) / sr
    y = np.zeros(n)
    for k in range(int(total / 0.5)):
        i = int(k * 0.5 * sr)
        m = min(200, n - i)
        y[i:i + m] += np.hanning(200)[:m] * rng.standard_normal(m) * 0.6
    c = int(change * sr)
    y[:c] += (0.35 * np.sin(2 * np.pi * 220 * t[:c]) +
              0.25 * np.sin(2 * np.pi * 330 * t[:c]))
    kern = np.hanning(64)
    y[c:] += 0.5 * np.convolve(rng.standard_normal(n - c), kern / kern.sum(),
                               mode="same")
    return PcmAudio(sr, np.clip(y, -1, 1))


def write_rav(path, frames, fps: float = 25.0, audio=None,
              rate: int = 44100) -> str:
    """Write the container directly; frames is an iterable of (h, w, 3) uint8."""
    frames = list(frames)
    first = np.asarray(frames[0])
    h, w, _ = first.shape
    pcm = b""
    n_samples = 0
    if audio is not None:
        arr = np.asarray(audio)
        if arr.dtype.kind == "f":
            arr = np.clip(np.round(arr * 32767.0), -32768, 32767)
        pcm = arr.astype("<i2").tobytes()
        n_samples = len(arr)
    meta = {"width": w, "height": h, "fps": fps, "frames": len(frames),
            "sample_rate": rate if audio is not None else 0,
            "samples": n_samples,
            "channels": 1 if audio is not None else 0}
    with open(path, "wb") as f:
        rawcodec.write_header(f, meta)
        for fr in frames:
            f.write(np.ascontiguousarray(fr, dtype=np.uint8).tobytes())
        f.write(pcm)
    return str(path)


# ---------------------------------------------------------------------------
# synthetic shot-cut videos

# Channel-sum ladder for adjacent scenes.  The content metric compares
# per-pixel R+G+B sums against 3t = 90, so neighbors must sit > 130 apart
# to survive the +-18 speckle and wiggle slack.
_SUM_LADDER = [90, 300, 540, 750, 180, 420, 660, 120, 360, 600]


def _color_for_sum(target: int, rng: np.random.Generator) -> np.ndarray:
    # each channel drawn from its feasible range so the sum lands exactly
    c = np.zeros(3, dtype=int)
    remaining = target
    order = rng.permutation(3)
    for left, ch in zip((2, 1, 0), order):
        low = max(0, remaining - 255 * left)
        high = min(255, remaining)
        c[ch] = rng.integers(low, high + 1) if high > low else low
        remaining -= c[ch]
    return c.astype(np.uint8)


def scene_frames(lengths, width: int = 64, height: int = 36,
                 seed: int = 0, wiggle: bool = True):
    """Frames with a hard cut at each scene start; returns (frames, cuts).

    Adjacent scenes differ everywhere by more than the content threshold,
    frames inside a scene differ by far less than it.
    """
    rng = np.random.default_rng(seed)
    frames = []
    cuts = []
    pos = 0
    for i, n in enumerate(lengths):
        base = _color_for_sum(_SUM_LADDER[i % len(_SUM_LADDER)], rng)
        canvas = np.full((height, width, 3), base, dtype=np.uint8)
        n_spots = (width * height) // 12
        ys = rng.integers(0, height, n_spots)
        xs = rng.integers(0, width, n_spots)
        offs = rng.integers(0, 7, (n_spots, 3))
        canvas[ys, xs] = np.clip(canvas[ys, xs].astype(int) + offs,
                                 0, 255).astype(np.uint8)
        if i > 0:
            cuts.append(pos)
        for j in range(n):
            pix = canvas
            if wiggle and j % 2:
                pix = np.clip(canvas.astype(int) + 1, 0, 255).astype(np.uint8)
            frames.append(make_frame(pix, pos))
            pos += 1
    return frames, cuts


def write_scene_video(path, lengths, width: int = 64, height: int = 36,
                      fps: float = 25.0, seed: int = 0, audio_hz=None,
                      rate: int = 44100):
    frames, cuts = scene_frames(lengths, width, height, seed)
    audio = None
    if audio_hz is not None:
        audio = sine(len(frames) / fps, audio_hz, rate)
    write_rav(path, [f.pixel_data for f in frames], fps, audio, rate)
    return cuts


# ---------------------------------------------------------------------------
# in-memory index/catalog for assembler tests

def synthetic_index(scene_lengths: dict[str, list[int]], fps: float = 25.0,
                    genre: str = "Unknown"):
    """SceneIndex stub over fake refs; histograms are unit basis vectors."""
    from mvgen.sceneindex import IndexedScene, SceneIndex, VideoRecord
    from mvgen.shots import Scene

    index = SceneIndex()
    dim = 0
    for src, lengths in sorted(scene_lengths.items()):
        scenes = []
        start = 0
        for n in lengths:
            hist = np.zeros(768)
            hist[dim % 768] = 1.0
            dim += 1
            scenes.append(IndexedScene(
                Scene.from_range(src, start, start + n - 1, fps), hist))
            start += n
        index.videos[src] = VideoRecord(src, genre, fps, scenes)
    return index


def synthetic_catalog(index, n_clusters: int, genre: str = "Unknown",
                      seed: int = 0):
    """Round-robin scene assignment into n_clusters."""
    from mvgen.clustering import ClusterCatalog

    refs = [sc.ref for sc in index.scenes(None)]
    assignments = {ref: i % n_clusters for i, ref in enumerate(refs)}
    return ClusterCatalog("Unknown" if genre is None else genre,
                          n_clusters, seed,
                          np.zeros((n_clusters, 768)), assignments, 0.0)


def read_json(path) -> dict:
    with open(path) as f:
        return json.load(f)


def manifest_path(index_dir) -> str:
    return os.path.join(str(index_dir), "manifest.json")
