"""Minimal codec tool for uncompressed media, speaking the ffmpeg CLI dialect.

The pipeline drives its codec tool as a subprocess and only ever asks for a
small command vocabulary: probe a file, stream rawvideo RGB24 or s16le PCM to
stdout, and encode rawvideo from stdin into a container.  In production that
tool is ffmpeg.  This module is a drop-in stand-in for environments without
ffmpeg (CI, tests): it understands the same argument subset and reads/writes
an uncompressed container (".rav") plus PCM WAV files.

RAV container layout:

    b"RAV1\\n"
    <256-byte space-padded JSON header line ending in \\n>
    width*height*3 bytes per frame, frame_count frames (RGB24, row-major)
    2 bytes per sample, sample_count samples (signed 16-bit LE, mono)

Keep this module stdlib-only on the hot paths; numpy is imported lazily and
only when resampling or downmixing is actually required.
"""

from __future__ import annotations

import io
import json
import os
import shutil
import sys
import wave

MAGIC = b"RAV1\n"
HEADER_LEN = 256  # bytes, including trailing newline
CHUNK = 1 << 20

_VALUE_FLAGS = {
    "-ss", "-t", "-f", "-pix_fmt", "-s", "-r", "-frames:v", "-ac", "-ar",
    "-map", "-c:v", "-c:a", "-vcodec", "-acodec", "-v", "-loglevel",
}
_BOOL_FLAGS = {"-y", "-n", "-vn", "-an", "-stats", "-nostdin", "-hide_banner",
               "-accurate_seek"}


class ToolError(Exception):
    pass


# ---------------------------------------------------------------------------
# container read/write


def write_header(f, meta: dict) -> None:
    line = json.dumps(meta, sort_keys=True).encode()
    if len(line) > HEADER_LEN - 1:
        raise ToolError("header too large")
    f.write(MAGIC)
    f.write(line + b" " * (HEADER_LEN - 1 - len(line)) + b"\n")


def read_header(f) -> dict:
    if f.read(len(MAGIC)) != MAGIC:
        raise ToolError("Invalid data found when processing input")
    line = f.read(HEADER_LEN)
    if len(line) != HEADER_LEN:
        raise ToolError("Invalid data found when processing input")
    return json.loads(line.decode())


def payload_offset() -> int:
    return len(MAGIC) + HEADER_LEN


def probe_file(path: str) -> dict:
    """Return {kind, width, height, fps, frames, sample_rate, samples, channels}."""
    with open(path, "rb") as f:
        head = f.read(len(MAGIC))
    if head == MAGIC:
        with open(path, "rb") as f:
            meta = read_header(f)
        meta["kind"] = "rav"
        meta.setdefault("channels", 1)
        return meta
    # fall back to WAV
    try:
        with wave.open(path, "rb") as w:
            if w.getsampwidth() != 2:
                raise ToolError("unsupported WAV sample width")
            return {
                "kind": "wav", "width": 0, "height": 0, "fps": 0.0, "frames": 0,
                "sample_rate": w.getframerate(), "samples": w.getnframes(),
                "channels": w.getnchannels(),
            }
    except wave.Error:
        raise ToolError("Invalid data found when processing input") from None


def read_audio_payload(path: str, meta: dict) -> bytes:
    """Raw interleaved s16le bytes of the file's audio stream."""
    if meta["kind"] == "rav":
        frame_bytes = meta["width"] * meta["height"] * 3 * meta["frames"]
        with open(path, "rb") as f:
            f.seek(payload_offset() + frame_bytes)
            return f.read(meta["samples"] * 2)
    with wave.open(path, "rb") as w:
        return w.readframes(w.getnframes())


def convert_audio(raw: bytes, channels: int, src_rate: int,
                  out_channels: int, out_rate: int) -> bytes:
    """Downmix by channel averaging and linearly resample s16le PCM."""
    if channels == out_channels and src_rate == out_rate:
        return raw
    import numpy as np  # lazy: only conversions need it

    x = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    if channels > 1:
        x = x[: len(x) - len(x) % channels].reshape(-1, channels).mean(axis=1)
    if out_channels != 1:
        raise ToolError("only mono output is supported")
    if src_rate != out_rate:
        n_out = int(round(len(x) * out_rate / src_rate))
        if n_out > 0 and len(x) > 1:
            t_out = np.arange(n_out) * (src_rate / out_rate)
            x = np.interp(t_out, np.arange(len(x)), x)
        else:
            x = x[:n_out]
    return np.clip(np.round(x), -32768, 32767).astype("<i2").tobytes()


# ---------------------------------------------------------------------------
# CLI


def _parse_args(argv: list[str]):
    """Split an ffmpeg-style command into (inputs, outputs).

    Options accumulate and attach to the next -i or to the next output URL,
    matching ffmpeg's positional option semantics.
    """
    inputs, outputs = [], []
    pending: dict = {}
    maps: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "-i":
            i += 1
            if i >= len(argv):
                raise ToolError("missing input url after -i")
            inputs.append({"url": argv[i], **pending})
            pending = {}
        elif tok in _BOOL_FLAGS:
            pending[tok.lstrip("-")] = True
        elif tok in _VALUE_FLAGS:
            i += 1
            if i >= len(argv):
                raise ToolError(f"missing value for {tok}")
            if tok == "-map":
                maps.append(argv[i])
            else:
                pending[tok.lstrip("-")] = argv[i]
        elif tok.startswith("-"):
            raise ToolError(f"unrecognized option {tok}")
        else:
            outputs.append({"url": tok, "maps": list(maps), **pending})
            pending = {}
            maps = []
        i += 1
    return inputs, outputs


def _fmt_duration(seconds: float) -> str:
    cs = int(round(seconds * 100))
    return "%02d:%02d:%02d.%02d" % (cs // 360000, cs // 6000 % 60,
                                    cs // 100 % 60, cs % 100)


def _print_probe(inputs) -> None:
    for n, inp in enumerate(inputs):
        meta = probe_file(inp["url"])
        vdur = meta["frames"] / meta["fps"] if meta.get("fps") else 0.0
        adur = meta["samples"] / meta["sample_rate"] if meta.get("sample_rate") else 0.0
        sys.stderr.write("Input #%d, %s, from '%s':\n" % (n, meta["kind"], inp["url"]))
        sys.stderr.write("  Duration: %s, start: 0.000000, bitrate: N/A\n"
                         % _fmt_duration(max(vdur, adur)))
        stream = 0
        if meta["frames"]:
            sys.stderr.write(
                "  Stream #%d:%d: Video: rawvideo (rgb24), %dx%d, %g fps\n"
                % (n, stream, meta["width"], meta["height"], meta["fps"]))
            stream += 1
        if meta["samples"]:
            sys.stderr.write(
                "  Stream #%d:%d: Audio: pcm_s16le, %d Hz, %d channels, s16\n"
                % (n, stream, meta["sample_rate"], meta.get("channels", 1)))


def _copy_exact(src, dst, nbytes: int) -> int:
    remaining = nbytes
    while remaining > 0:
        chunk = src.read(min(CHUNK, remaining))
        if not chunk:
            break
        dst.write(chunk)
        remaining -= len(chunk)
    return nbytes - remaining


def _decode_video(inp, out) -> None:
    meta = probe_file(inp["url"])
    if meta["kind"] != "rav" or not meta["frames"]:
        raise ToolError("Output file does not contain any stream")
    frame_size = meta["width"] * meta["height"] * 3
    start = int(round(float(inp.get("ss", 0.0)) * meta["fps"]))
    count = meta["frames"] - start
    if "frames:v" in out:
        count = min(count, int(out["frames:v"]))
    if count <= 0:
        return
    with open(inp["url"], "rb") as f:
        f.seek(payload_offset() + start * frame_size)
        _copy_exact(f, sys.stdout.buffer, count * frame_size)
    sys.stdout.buffer.flush()


def _decode_audio(inp, out) -> None:
    meta = probe_file(inp["url"])
    if not meta["samples"]:
        raise ToolError("Output file does not contain any stream")
    raw = read_audio_payload(inp["url"], meta)
    out_rate = int(out.get("ar", meta["sample_rate"]))
    out_ch = int(out.get("ac", 1))
    sys.stdout.buffer.write(
        convert_audio(raw, meta.get("channels", 1), meta["sample_rate"],
                      out_ch, out_rate))
    sys.stdout.buffer.flush()


def _encode(inputs, out) -> None:
    video_in = inputs[0]
    if video_in.get("f") != "rawvideo":
        raise ToolError("encoder expects a rawvideo first input")
    if video_in.get("pix_fmt", "rgb24") != "rgb24":
        raise ToolError("only rgb24 input is supported")
    try:
        width, height = (int(v) for v in video_in["s"].split("x"))
    except (KeyError, ValueError):
        raise ToolError("rawvideo input needs -s WxH") from None
    fps = float(video_in.get("r", 25))
    frame_size = width * height * 3

    src = sys.stdin.buffer if video_in["url"] in ("pipe:0", "-") \
        else open(video_in["url"], "rb")

    tmp = out["url"] + ".part"
    meta = {"width": width, "height": height, "fps": fps, "frames": 0,
            "sample_rate": 0, "samples": 0, "channels": 1}
    with open(tmp, "wb") as f:
        write_header(f, meta)
        carried = b""
        while True:
            chunk = src.read(CHUNK)
            if not chunk:
                break
            carried += chunk
            usable = len(carried) - len(carried) % frame_size
            f.write(carried[:usable])
            meta["frames"] += usable // frame_size
            carried = carried[usable:]
        if carried:
            raise ToolError("truncated frame on input (not a multiple of %d bytes)"
                            % frame_size)
        if len(inputs) > 1 and not out.get("an"):
            ameta = probe_file(inputs[1]["url"])
            if ameta["samples"]:
                raw = read_audio_payload(inputs[1]["url"], ameta)
                rate = int(out.get("ar", ameta["sample_rate"]))
                raw = convert_audio(raw, ameta.get("channels", 1),
                                    ameta["sample_rate"], 1, rate)
                f.write(raw)
                meta["sample_rate"] = rate
                meta["samples"] = len(raw) // 2
        f.seek(0)
        write_header(f, meta)
    os.replace(tmp, out["url"])
    if src is not sys.stdin.buffer:
        src.close()


def run(argv: list[str]) -> int:
    inputs, outputs = _parse_args(argv)
    if not inputs:
        sys.stderr.write("No input specified\n")
        return 1
    for inp in inputs:
        if inp["url"] not in ("pipe:0", "-") and not os.path.exists(inp["url"]):
            sys.stderr.write("%s: No such file or directory\n" % inp["url"])
            return 1
    if not outputs:
        _print_probe(inputs)
        sys.stderr.write("At least one output file must be specified\n")
        return 1
    out = outputs[0]
    fmt = out.get("f")
    if out["url"] in ("pipe:1", "-"):
        if fmt == "rawvideo":
            _decode_video(inputs[0], out)
        elif fmt == "s16le":
            _decode_audio(inputs[0], out)
        else:
            raise ToolError("piped output needs -f rawvideo or -f s16le")
    else:
        _encode(inputs, out)
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except ToolError as exc:
        sys.stderr.write(str(exc) + "\n")
        return 1
    except BrokenPipeError:
        # downstream consumer closed the pipe early; mirror ffmpeg's silence
        try:
            sys.stdout.close()
        except OSError:
            pass
        return 1


if __name__ == "__main__":
    sys.exit(main())
