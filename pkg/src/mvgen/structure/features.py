"""Beat-synchronous audio features: MFCC, chroma, onset strength, beats.

All analysis runs at 22050 Hz mono with a 2048-sample Hann window and a
512-sample hop; frame i is centered at i*hop/sr seconds (reflect padding).
Beats come from a tempo-consistent dynamic-programming picker over the
onset-strength envelope, falling back to a fixed 0.5 s grid when the
envelope carries no usable pulse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.signal

from ..errors import SilentAudio
from ..media import PcmAudio

SAMPLE_RATE = 22050
N_FFT = 2048
HOP = 512
N_MELS = 128
N_MFCC = 32
N_CHROMA = 12
CHROMA_FMIN = 30.0  # Hz; bins below carry no pitch-class information
FALLBACK_BEAT_PERIOD = 0.5  # seconds
BPM_PRIOR_CENTER = 120.0
DP_TIGHTNESS = 100.0
_LOG_FLOOR = 1e-10


@dataclass
class BeatGrid:
    beat_times: np.ndarray  # seconds, strictly increasing
    beat_indices: np.ndarray  # feature frame ordinals
    duration: float


def resample(audio: PcmAudio, rate: int = SAMPLE_RATE) -> PcmAudio:
    if audio.sample_rate == rate:
        return audio
    n_out = int(round(len(audio.samples) * rate / audio.sample_rate))
    t_out = np.arange(n_out) * (audio.sample_rate / rate)
    return PcmAudio(rate, np.interp(t_out, np.arange(len(audio.samples)),
                                    audio.samples))


def frame_times(n_frames: int, sr: int = SAMPLE_RATE, hop: int = HOP) -> np.ndarray:
    return np.arange(n_frames) * hop / sr


def power_spectrogram(y: np.ndarray, n_fft: int = N_FFT,
                      hop: int = HOP) -> np.ndarray:
    """(n_fft//2+1, n_frames) power spectrogram, frames centered."""
    pad = n_fft // 2
    mode = "reflect" if len(y) > pad else "constant"
    padded = np.pad(y, pad, mode=mode)
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop]
    window = scipy.signal.get_window("hann", n_fft, fftbins=True)
    spec = np.fft.rfft(frames * window, axis=1)
    return (spec.real ** 2 + spec.imag ** 2).T


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(sr: int = SAMPLE_RATE, n_fft: int = N_FFT,
                   n_mels: int = N_MELS) -> np.ndarray:
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sr)
    edges = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(sr / 2.0),
                                   n_mels + 2))
    lower = (freqs[None, :] - edges[:-2, None]) / (edges[1:-1] - edges[:-2])[:, None]
    upper = (edges[2:, None] - freqs[None, :]) / (edges[2:] - edges[1:-1])[:, None]
    return np.maximum(0.0, np.minimum(lower, upper))


def log_mel(power: np.ndarray, bank: np.ndarray | None = None) -> np.ndarray:
    bank = mel_filterbank() if bank is None else bank
    return np.log(np.maximum(bank @ power, _LOG_FLOOR))


def mfcc(power: np.ndarray, n_mfcc: int = N_MFCC) -> np.ndarray:
    return scipy.fft.dct(log_mel(power), axis=0, norm="ortho")[:n_mfcc]


def chroma(power: np.ndarray, sr: int = SAMPLE_RATE,
           n_fft: int = N_FFT) -> np.ndarray:
    """Fold spectral power onto 12 pitch classes (C=0 ... B=11)."""
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sr)
    keep = freqs >= CHROMA_FMIN
    midi = np.round(69.0 + 12.0 * np.log2(freqs[keep] / 440.0)).astype(int)
    classes = midi % 12
    out = np.zeros((N_CHROMA, power.shape[1]))
    kept = power[keep]
    for pc in range(N_CHROMA):
        mask = classes == pc
        if mask.any():
            out[pc] = kept[mask].sum(axis=0)
    return out


def onset_envelope(power: np.ndarray) -> np.ndarray:
    """Half-wave-rectified log-mel spectral flux, averaged over bands."""
    logm = log_mel(power)
    flux = np.maximum(0.0, np.diff(logm, axis=1)).mean(axis=0)
    return np.concatenate([[0.0], flux])


def _estimate_period(env: np.ndarray, sr: int, hop: int) -> int | None:
    """Dominant inter-beat lag in frames, weighted toward 120 BPM."""
    e = env - env.mean()
    if not np.any(np.abs(e) > 1e-12):
        return None
    ac = np.correlate(e, e, "full")[len(e) - 1:]
    lag_min = int(round(60.0 / 300.0 * sr / hop))
    lag_max = min(int(round(60.0 / 30.0 * sr / hop)), len(ac) - 1)
    if lag_max <= lag_min:
        return None
    lags = np.arange(lag_min, lag_max + 1)
    bpm = 60.0 * sr / hop / lags
    prior = np.exp(-0.5 * (np.log2(bpm / BPM_PRIOR_CENTER)) ** 2)
    score = ac[lag_min:lag_max + 1] * prior
    if score.max() <= 0:
        return None
    return int(lags[int(np.argmax(score))])


def _dp_beats(env: np.ndarray, period: int,
              tightness: float = DP_TIGHTNESS) -> np.ndarray:
    """Tempo-consistent beat picking by dynamic programming."""
    e = env / (env.std() + 1e-12)
    n = len(e)
    score = np.zeros(n)
    backlink = np.full(n, -1, dtype=int)
    for i in range(n):
        lo = max(0, i - 2 * period)
        hi = i - max(1, period // 2)
        if hi < lo:
            score[i] = e[i]
            continue
        js = np.arange(lo, hi + 1)
        cost = -tightness * np.log(np.maximum(i - js, 1) / period) ** 2
        cand = score[js] + cost
        k = int(np.argmax(cand))
        score[i] = e[i] + cand[k]
        backlink[i] = js[k]
    tail_start = max(0, n - 2 * period)
    end = tail_start + int(np.argmax(score[tail_start:]))
    beats = []
    i = end
    while i >= 0:
        beats.append(i)
        i = backlink[i]
    return np.array(beats[::-1], dtype=int)


def _fallback_grid(duration: float, sr: int, hop: int) -> np.ndarray:
    times = np.arange(0.0, duration, FALLBACK_BEAT_PERIOD)
    return np.unique(np.round(times * sr / hop).astype(int))


def beat_frames(env: np.ndarray, duration: float, sr: int = SAMPLE_RATE,
                hop: int = HOP) -> np.ndarray:
    period = _estimate_period(env, sr, hop)
    if period is None:
        return _fallback_grid(duration, sr, hop)
    beats = _dp_beats(env, period)
    if len(beats) < 2:
        return _fallback_grid(duration, sr, hop)
    return beats


def beat_sync(matrix: np.ndarray, frames: np.ndarray, agg: str) -> np.ndarray:
    """Aggregate frame columns over [b_i, b_{i+1}) intervals, last to end."""
    n = matrix.shape[1]
    fn = np.mean if agg == "mean" else np.median
    cols = []
    for i, start in enumerate(frames):
        stop = frames[i + 1] if i + 1 < len(frames) else n
        start = min(int(start), n - 1)
        stop = max(int(stop), start + 1)
        cols.append(fn(matrix[:, start:stop], axis=1))
    return np.stack(cols, axis=1)


def extract_beat_features(audio: PcmAudio) -> tuple[BeatGrid, np.ndarray, np.ndarray]:
    """Beat grid plus beat-synchronous MFCC (mean) and chroma (median)."""
    if not np.any(audio.samples):
        raise SilentAudio("zero-energy input")
    y = resample(audio).samples
    duration = audio.duration
    power = power_spectrogram(y)
    env = onset_envelope(power)
    frames = beat_frames(env, duration)
    frames = frames[frames < power.shape[1]]
    if len(frames) == 0:
        frames = np.array([0])
    times = frames * HOP / SAMPLE_RATE
    grid = BeatGrid(times, frames, duration)
    mfcc_sync = beat_sync(mfcc(power), frames, "mean")
    chroma_sync = beat_sync(chroma(power), frames, "median")
    return grid, mfcc_sync, chroma_sync
