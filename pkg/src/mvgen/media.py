"""Decode, geometry-harmonize and render media through an external codec tool.

Every pixel and PCM sample crosses this boundary as raw bytes over a pipe:
the codec tool (ffmpeg by default, any tool speaking the same argument
dialect works) is spawned per operation and exchanges rawvideo RGB24 frames
and s16le mono PCM on stdout/stdin.  A frame on the wire is exactly
width*height*3 bytes.
"""

from __future__ import annotations

import os
import re
import subprocess
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .config import PipelineConfig
from .errors import (
    CodecToolMissing,
    DimensionMismatch,
    DurationMismatch,
    EmptyInput,
    MissingSource,
    NoAudioStream,
    UndecodableMedia,
)

OUTPUT_SIZE = (640, 360)  # (width, height) of every harmonized/rendered video
INNER_HEIGHTS = (360, 272)  # the two letterbox categories, as inner heights
BLACK_ROW_LUMA = 16.0  # of 255; rows at or below this count as bar rows

_DURATION_RE = re.compile(r"Duration:\s*(\d+):(\d+):(\d+(?:\.\d+)?)")
# delimited so fourcc tags such as "0x31637634" never read as dimensions
_VIDEO_RE = re.compile(r"Video:.*?[\s,](\d{1,5})x(\d{1,5})(?=[\s,\[]|$)",
                       re.MULTILINE)
_FPS_RE = re.compile(r"(\d+(?:\.\d+)?)\s*fps")
_AUDIO_RE = re.compile(r"Audio:.*?(\d+)\s*Hz")
_CHANNELS_RE = re.compile(r"(\d+)\s*channels")


@dataclass
class RawFrame:
    """One decoded frame; pixel_data is (height, width, 3) uint8 RGB."""

    width: int
    height: int
    pixel_data: np.ndarray
    frame_index: int
    timestamp: float


@dataclass
class PcmAudio:
    sample_rate: int
    samples: np.ndarray  # mono float64 in [-1, 1]

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class GeometrySpec:
    """Outer canvas plus the centered inner content region."""

    outer: tuple[int, int] = OUTPUT_SIZE
    inner: tuple[int, int] = OUTPUT_SIZE

    @property
    def bar_height(self) -> int:
        return (self.outer[1] - self.inner[1]) // 2


@dataclass
class MediaInfo:
    duration: float = 0.0
    width: int = 0
    height: int = 0
    fps: float = 0.0
    sample_rate: int = 0
    channels: int = 0

    @property
    def has_video(self) -> bool:
        return self.width > 0

    @property
    def has_audio(self) -> bool:
        return self.sample_rate > 0

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps)) if self.has_video else 0


def _codec(config: PipelineConfig | None) -> list[str]:
    return (config or PipelineConfig()).codec_command


def _run(cmd: list[str], **kw) -> subprocess.Popen:
    kw.setdefault("bufsize", 1 << 22)
    try:
        return subprocess.Popen(cmd, **kw)
    except FileNotFoundError:
        raise CodecToolMissing(cmd[0]) from None


def probe(path: str, config: PipelineConfig | None = None) -> MediaInfo:
    """Parse the codec tool's metadata dump for one file."""
    if not os.path.exists(path):
        raise UndecodableMedia(f"{path}: no such file")
    proc = _run(_codec(config) + ["-i", path],
                stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
    _, err = proc.communicate()
    text = err.decode(errors="replace")
    if "Invalid data found" in text or "Duration" not in text:
        raise UndecodableMedia(f"{path}: {text.strip().splitlines()[-1] if text.strip() else 'no metadata'}")

    info = MediaInfo()
    m = _DURATION_RE.search(text)
    if m:
        info.duration = int(m.group(1)) * 3600 + int(m.group(2)) * 60 + float(m.group(3))
    m = _VIDEO_RE.search(text)
    if m:
        info.width, info.height = int(m.group(1)), int(m.group(2))
        f = _FPS_RE.search(text)
        info.fps = float(f.group(1)) if f else 25.0
    m = _AUDIO_RE.search(text)
    if m:
        info.sample_rate = int(m.group(1))
        c = _CHANNELS_RE.search(text)
        if c:
            info.channels = int(c.group(1))
        else:
            info.channels = 2 if "stereo" in text else 1
    return info


def _read_exact(stream, nbytes: int) -> bytes:
    parts = []
    remaining = nbytes
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            break
        parts.append(chunk)
        remaining -= len(chunk)
    return b"".join(parts)


def _spawn_video_decode(path: str, config: PipelineConfig | None,
                        start_time: float | None = None,
                        n_frames: int | None = None) -> subprocess.Popen:
    cmd = _codec(config) + ["-v", "error"]
    if start_time is not None and start_time > 0:
        cmd += ["-ss", f"{start_time:.6f}"]
    cmd += ["-i", path, "-f", "rawvideo", "-pix_fmt", "rgb24"]
    if n_frames is not None:
        cmd += ["-frames:v", str(n_frames)]
    cmd += ["pipe:1"]
    return _run(cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE)


def decode_frames(video_path: str, sample_stride: int = 1,
                  config: PipelineConfig | None = None) -> Iterator[RawFrame]:
    """Yield every sample_stride-th frame in presentation order."""
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    info = probe(video_path, config)
    if not info.has_video:
        raise UndecodableMedia(f"{video_path}: no video stream")
    frame_size = info.width * info.height * 3
    proc = _spawn_video_decode(video_path, config)
    index = 0
    try:
        while True:
            buf = _read_exact(proc.stdout, frame_size)
            if len(buf) < frame_size:
                break
            if index % sample_stride == 0:
                pixels = np.frombuffer(buf, np.uint8).reshape(
                    info.height, info.width, 3)
                yield RawFrame(info.width, info.height, pixels,
                               index, index / info.fps)
            index += 1
    finally:
        proc.stdout.close()
        proc.wait()
    if index == 0:
        err = proc.stderr.read().decode(errors="replace") if proc.stderr else ""
        raise UndecodableMedia(f"{video_path}: {err.strip() or 'decoded zero frames'}")


def decode_audio(audio_path: str, target_rate: int = 22050,
                 config: PipelineConfig | None = None) -> PcmAudio:
    """Mono PCM at target_rate; stereo is downmixed by channel averaging."""
    info = probe(audio_path, config)
    if not info.has_audio:
        raise NoAudioStream(audio_path)
    cmd = _codec(config) + ["-v", "error", "-i", audio_path,
                            "-f", "s16le", "-ac", "1", "-ar", str(target_rate),
                            "pipe:1"]
    proc = _run(cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    raw, err = proc.communicate()
    if proc.returncode != 0:
        raise UndecodableMedia(f"{audio_path}: {err.decode(errors='replace').strip()}")
    samples = np.frombuffer(raw, "<i2").astype(np.float64) / 32768.0
    return PcmAudio(target_rate, samples)


def _dark_row_runs(dark: np.ndarray) -> tuple[int, int]:
    """Lengths of the leading and trailing True runs of a boolean row mask."""
    n = len(dark)
    top = 0
    while top < n and dark[top]:
        top += 1
    bottom = 0
    while bottom < n - top and dark[n - 1 - bottom]:
        bottom += 1
    return top, bottom


def detect_black_bars(frames: Sequence[RawFrame]) -> GeometrySpec:
    """Classify sampled frames into one of the two letterbox categories.

    A row is a bar row only if its mean luma stays below the threshold in
    every sampled frame; the symmetric bar height is the smaller of the top
    and bottom runs.  The implied inner height, rescaled to the output
    canvas, snaps to the nearest category.
    """
    if not frames:
        raise EmptyInput("no frames to inspect")
    height, width = frames[0].height, frames[0].width
    dark_everywhere = np.ones(height, dtype=bool)
    for fr in frames:
        if (fr.height, fr.width) != (height, width):
            raise DimensionMismatch(
                f"{fr.width}x{fr.height} frame in {width}x{height} batch")
        luma = fr.pixel_data.astype(np.float32).mean(axis=2)
        dark_everywhere &= luma.mean(axis=1) <= BLACK_ROW_LUMA
    top, bottom = _dark_row_runs(dark_everywhere)
    bar = min(top, bottom)
    inner_scaled = (height - 2 * bar) * OUTPUT_SIZE[1] / height
    snapped = min(INNER_HEIGHTS, key=lambda cand: abs(cand - inner_scaled))
    return GeometrySpec(outer=OUTPUT_SIZE, inner=(OUTPUT_SIZE[0], snapped))


def _fit_content(pixels: np.ndarray, spec: GeometrySpec,
                 src_inner_h: int) -> np.ndarray:
    """Scale-to-cover the source content into the target inner region."""
    import cv2

    out_w, out_h = spec.outer
    in_w, in_h = spec.inner
    src_h = pixels.shape[0]
    y0 = (src_h - src_inner_h) // 2
    content = pixels[y0:y0 + src_inner_h]

    scale = max(in_w / content.shape[1], in_h / content.shape[0])
    new_w = max(in_w, int(round(content.shape[1] * scale)))
    new_h = max(in_h, int(round(content.shape[0] * scale)))
    interp = cv2.INTER_AREA if scale < 1 else cv2.INTER_LINEAR
    scaled = cv2.resize(content, (new_w, new_h), interpolation=interp)
    x0 = (new_w - in_w) // 2
    y0 = (new_h - in_h) // 2
    inner = scaled[y0:y0 + in_h, x0:x0 + in_w]

    if (in_w, in_h) == (out_w, out_h):
        return np.ascontiguousarray(inner)
    canvas = np.zeros((out_h, out_w, 3), dtype=np.uint8)
    bar = (out_h - in_h) // 2
    canvas[bar:bar + in_h] = inner
    return canvas


def _spawn_encode(out_path: str, width: int, height: int, fps: float,
                  audio_source: str | None,
                  config: PipelineConfig | None) -> subprocess.Popen:
    cmd = _codec(config) + ["-y", "-v", "error",
                            "-f", "rawvideo", "-pix_fmt", "rgb24",
                            "-s", f"{width}x{height}", "-r", f"{fps:g}",
                            "-i", "pipe:0"]
    if audio_source:
        cmd += ["-i", audio_source, "-map", "0:v", "-map", "1:a?",
                "-c:a", "pcm_s16le"]
    cmd += [out_path]
    return _run(cmd, stdin=subprocess.PIPE, stderr=subprocess.PIPE)


def _finish_encode(proc: subprocess.Popen, out_path: str) -> str:
    proc.stdin.close()
    err = proc.stderr.read().decode(errors="replace") if proc.stderr else ""
    if proc.wait() != 0:
        raise UndecodableMedia(f"encode of {out_path} failed: {err.strip()}")
    return out_path


def harmonize(video_path: str, spec: GeometrySpec, out_path: str,
              config: PipelineConfig | None = None) -> str:
    """Re-encode a video so its geometry matches the given GeometrySpec.

    Audio and frame rate are carried over from the source; only pixels are
    rewritten.  The source's own bars are cropped off before fitting, with
    the source bar height inferred from the target inner/outer ratio.
    """
    info = probe(video_path, config)
    if not info.has_video:
        raise UndecodableMedia(f"{video_path}: no video stream")
    src_inner_h = int(round(info.height * spec.inner[1] / spec.outer[1]))
    audio_source = video_path if info.has_audio else None
    enc = _spawn_encode(out_path, spec.outer[0], spec.outer[1], info.fps,
                        audio_source, config)
    try:
        for frame in decode_frames(video_path, 1, config):
            fitted = _fit_content(frame.pixel_data, spec, src_inner_h)
            enc.stdin.write(fitted.tobytes())
    except BrokenPipeError:
        pass
    return _finish_encode(enc, out_path)


def _decode_range(path: str, info: MediaInfo, start_time: float,
                  n_frames: int, config: PipelineConfig | None) -> Iterator[np.ndarray]:
    frame_size = info.width * info.height * 3
    proc = _spawn_video_decode(path, config, start_time, n_frames)
    got = 0
    last = None
    try:
        while got < n_frames:
            buf = _read_exact(proc.stdout, frame_size)
            if len(buf) < frame_size:
                break
            last = np.frombuffer(buf, np.uint8).reshape(info.height, info.width, 3)
            yield last
            got += 1
    finally:
        proc.stdout.close()
        proc.wait()
    if got < n_frames:
        if last is None:
            raise UndecodableMedia(f"{path}: empty decode at {start_time:.3f}s")
        # a source may come up a frame short at its very end; hold the last
        for _ in range(n_frames - got):
            yield last


def render(edl, audio_path: str, out_path: str, media_dir: str | None = None,
           config: PipelineConfig | None = None) -> str:
    """Materialize an edit decision list into a 640x360, 25 fps video.

    Scene references resolve against media_dir (or the EDL's own absolute
    paths).  The input audio becomes the only audio track; the trailing
    fade directive multiplies frames down to black.
    """
    cfg = config or PipelineConfig()
    fps = float(cfg.output_fps)
    audio_info = probe(audio_path, cfg)
    if not audio_info.has_audio:
        raise NoAudioStream(audio_path)
    duration = audio_info.duration

    entries = list(edl.entries)
    total = sum(e.trim_out - e.trim_in for e in entries)
    if abs(total - duration) > 0.1:
        raise DurationMismatch(
            f"EDL covers {total:.3f}s but audio runs {duration:.3f}s")

    def resolve(source_ref: str) -> str:
        if os.path.isabs(source_ref) and os.path.exists(source_ref):
            return source_ref
        if media_dir:
            for cand in (os.path.join(media_dir, source_ref),
                         os.path.join(media_dir, source_ref + ".rav")):
                if os.path.exists(cand):
                    return cand
        if os.path.exists(source_ref):
            return source_ref
        raise MissingSource(source_ref)

    fade_start = duration
    fade_len = 0.0
    if getattr(edl, "fade_out", None):
        fade_start = edl.fade_out["start"]
        fade_len = edl.fade_out["duration"]

    width, height = OUTPUT_SIZE
    enc = _spawn_encode(out_path, width, height, fps, audio_path, cfg)
    frame_cursor = 0
    try:
        for entry in entries:
            source_id, start_frame = entry.scene.rsplit(":", 1)
            src = resolve(source_id)
            info = probe(src, cfg)
            n_out = int(round((entry.trim_out - entry.trim_in) * fps))
            start = int(start_frame) / info.fps + entry.trim_in
            if abs(info.fps - fps) < 1e-9:
                frames = _decode_range(src, info, start, n_out, cfg)
            else:
                n_src = int(np.ceil(n_out * info.fps / fps)) + 1
                pool = list(_decode_range(src, info, start, n_src, cfg))
                frames = (pool[min(int(k * info.fps / fps + 1e-9), len(pool) - 1)]
                          for k in range(n_out))
            for pixels in frames:
                if pixels.shape[:2] != (height, width):
                    raise DimensionMismatch(
                        f"{src}: {pixels.shape[1]}x{pixels.shape[0]} frame in "
                        f"{width}x{height} render")
                t_end = (frame_cursor + 1) / fps
                if fade_len > 0 and t_end > fade_start:
                    m = max(0.0, (fade_start + fade_len - t_end) / fade_len)
                    pixels = (pixels.astype(np.float32) * m).astype(np.uint8)
                enc.stdin.write(pixels.tobytes())
                frame_cursor += 1
    except BrokenPipeError:
        pass
    return _finish_encode(enc, out_path)
