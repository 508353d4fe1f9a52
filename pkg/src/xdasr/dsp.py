"""Signal-to-feature front-end.

Framing, power spectra, log-mel filterbanks, an autocorrelation pitch tracker,
regression deltas, per-speaker CMVN, frame stacking and strided subsampling.
All operations are pure: same input and config give bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import FeatureMatrix, Waveform

LOG_FLOOR = 1e-10
VOICING_THRESHOLD = 0.3


@dataclass(frozen=True)
class FrontendConfig:
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    n_mels: int = 40
    pre_emphasis: float = 0.97
    window: str = "hamming"
    n_fft: int = 256
    mel_low_hz: float = 20.0
    pitch_min_hz: float = 60.0
    pitch_max_hz: float = 400.0

    def __post_init__(self):
        if self.frame_length_ms < self.frame_shift_ms:
            raise ValueError("frame length must be >= frame shift")
        if self.n_mels < 1:
            raise ValueError("need at least one mel filter")

    def frame_length(self, sample_rate_hz: int) -> int:
        return int(round(self.frame_length_ms * sample_rate_hz / 1000.0))

    def frame_shift(self, sample_rate_hz: int) -> int:
        return int(round(self.frame_shift_ms * sample_rate_hz / 1000.0))


def pre_emphasize(w: Waveform, alpha: float) -> Waveform:
    """First-order pre-emphasis y[t] = x[t] - alpha*x[t-1] (y[0] = x[0])."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("pre-emphasis coefficient must be in [0, 1)")
    x = w.samples
    out = np.empty_like(x)
    out[0] = x[0]
    out[1:] = x[1:] - alpha * x[:-1]
    return Waveform(out, w.sample_rate_hz)


def _window_function(kind: str, length: int) -> np.ndarray:
    if kind == "hamming":
        return np.hamming(length)
    if kind == "hann":
        return np.hanning(length)
    if kind == "rect":
        return np.ones(length)
    raise ValueError(f"unknown window kind {kind!r}")


def num_frames(n_samples: int, frame_len: int, frame_shift: int) -> int:
    if n_samples < frame_len:
        raise ValueError("utterance too short")
    return 1 + (n_samples - frame_len) // frame_shift


def frame_signal(w: Waveform, cfg: FrontendConfig, windowed: bool = True) -> np.ndarray:
    """Slice a waveform into frames.

    With ``windowed`` the frames are tapered and zero-padded to ``n_fft``
    columns (spectral path); without it raw frame_length slices are returned
    (pitch path). Frame count matches in both modes.
    """
    frame_len = cfg.frame_length(w.sample_rate_hz)
    shift = cfg.frame_shift(w.sample_rate_hz)
    if cfg.n_fft < frame_len:
        raise ValueError("n_fft must cover one frame")
    t = num_frames(len(w), frame_len, shift)
    idx = np.arange(frame_len)[None, :] + shift * np.arange(t)[:, None]
    frames = w.samples[idx]
    if not windowed:
        return frames
    tapered = frames * _window_function(cfg.window, frame_len)[None, :]
    out = np.zeros((t, cfg.n_fft))
    out[:, :frame_len] = tapered
    return out


def power_spectrum(frames: np.ndarray) -> np.ndarray:
    """Squared-magnitude half spectrum (n_fft/2 + 1 bins).

    Accepts a single frame (1-D) or a stack of frames (2-D); the output keeps
    the input's dimensionality.
    """
    frames = np.asarray(frames, dtype=np.float64)
    n = frames.shape[-1]
    if n < 2 or n & (n - 1):
        raise ValueError("frame length must be a power of two")
    spec = np.fft.rfft(frames, axis=-1)
    return spec.real**2 + spec.imag**2


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FrontendConfig, sample_rate_hz: int) -> np.ndarray:
    """Triangular filters (n_mels x bins) spanning [mel_low_hz, Nyquist]."""
    nyquist = sample_rate_hz / 2.0
    n_bins = cfg.n_fft // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate_hz / cfg.n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.mel_low_hz), hz_to_mel(nyquist), cfg.n_mels + 2))
    bank = np.zeros((cfg.n_mels, n_bins))
    for i in range(cfg.n_mels):
        left, center, right = edges[i], edges[i + 1], edges[i + 2]
        rise = (bin_hz - left) / (center - left)
        fall = (right - bin_hz) / (right - center)
        bank[i] = np.maximum(0.0, np.minimum(rise, fall))
    return bank


def log_mel(spec: np.ndarray, cfg: FrontendConfig, sample_rate_hz: int) -> np.ndarray:
    """Natural-log mel filterbank energies, floored to avoid -inf on silence."""
    spec = np.asarray(spec, dtype=np.float64)
    bank = mel_filterbank(cfg, sample_rate_hz)
    if spec.shape[-1] != bank.shape[1]:
        raise ValueError(f"spectrum has {spec.shape[-1]} bins, filterbank expects {bank.shape[1]}")
    energies = spec @ bank.T
    return np.log(np.maximum(energies, LOG_FLOOR))


def pitch_features(w: Waveform, cfg: FrontendConfig) -> np.ndarray:
    """Per-frame [log-F0, autocorrelation peak, delta log-F0] (T x 3).

    F0 is the lag maximizing normalized autocorrelation within the configured
    search band. Frames whose peak falls below the voicing threshold reuse the
    last voiced F0 (band midpoint before any voiced frame appears).
    """
    if w.sample_rate_hz < 2 * cfg.pitch_max_hz:
        raise ValueError("sample rate below twice the upper pitch band")
    frames = frame_signal(w, cfg, windowed=False)
    t, frame_len = frames.shape
    min_lag = max(1, int(np.floor(w.sample_rate_hz / cfg.pitch_max_hz)))
    max_lag = min(frame_len - 1, int(np.ceil(w.sample_rate_hz / cfg.pitch_min_hz)))
    lags = np.arange(min_lag, max_lag + 1)

    peak = np.zeros(t)
    best_lag = np.zeros(t, dtype=np.int64)
    for lag_idx, lag in enumerate(lags):
        a = frames[:, : frame_len - lag]
        b = frames[:, lag:]
        num = np.einsum("ij,ij->i", a, b)
        den = np.sqrt(np.einsum("ij,ij->i", a, a) * np.einsum("ij,ij->i", b, b))
        r = np.where(den > 1e-20, num / np.maximum(den, 1e-20), 0.0)
        better = r > peak
        peak = np.where(better, r, peak)
        best_lag = np.where(better, lag, best_lag)

    midpoint_hz = 0.5 * (cfg.pitch_min_hz + cfg.pitch_max_hz)
    f0 = np.empty(t)
    last_voiced = midpoint_hz
    for i in range(t):
        if peak[i] >= VOICING_THRESHOLD and best_lag[i] > 0:
            last_voiced = w.sample_rate_hz / best_lag[i]
        f0[i] = last_voiced
    log_f0 = np.log(f0)
    out = np.empty((t, 3))
    out[:, 0] = log_f0
    out[:, 1] = peak
    out[:, 2] = _delta(log_f0[:, None])[:, 0]
    return out


_DELTA_WINDOW = 2
_DELTA_DENOM = 2.0 * sum(d * d for d in range(1, _DELTA_WINDOW + 1))


def _delta(x: np.ndarray) -> np.ndarray:
    # Regression delta over +-2 with replicated edges.
    t = x.shape[0]
    padded = np.concatenate(
        [np.repeat(x[:1], _DELTA_WINDOW, axis=0), x, np.repeat(x[-1:], _DELTA_WINDOW, axis=0)]
    )
    out = np.zeros_like(x)
    for d in range(1, _DELTA_WINDOW + 1):
        out += d * (padded[_DELTA_WINDOW + d : _DELTA_WINDOW + d + t] - padded[_DELTA_WINDOW - d : _DELTA_WINDOW - d + t])
    return out / _DELTA_DENOM


def add_deltas(f: FeatureMatrix) -> FeatureMatrix:
    """Append first and second order regression deltas (dims become 3x)."""
    d1 = _delta(f.data)
    d2 = _delta(d1)
    return f.with_data(np.hstack([f.data, d1, d2]))


def cmvn_per_speaker(features: list[FeatureMatrix]) -> list[FeatureMatrix]:
    """Normalize pooled per-speaker statistics to zero mean, unit variance.

    Dimensions with zero pooled variance are only centered. Speakers with
    fewer than two pooled frames are rejected.
    """
    by_speaker: dict[str, list[int]] = {}
    for i, fm in enumerate(features):
        by_speaker.setdefault(fm.speaker, []).append(i)
    out: list[FeatureMatrix] = list(features)
    for speaker, indices in by_speaker.items():
        pooled = np.vstack([features[i].data for i in indices])
        if pooled.shape[0] < 2:
            raise ValueError(f"speaker {speaker!r} has fewer than 2 frames")
        mean = pooled.mean(axis=0)
        var = pooled.var(axis=0)
        scale = np.where(var > 0.0, 1.0 / np.sqrt(np.maximum(var, 1e-300)), 1.0)
        for i in indices:
            out[i] = features[i].with_data((features[i].data - mean) * scale)
    return out


def stack_window(f: FeatureMatrix, window: int) -> FeatureMatrix:
    """Concatenate each frame with its +-k neighbours (edges replicated)."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and positive")
    if window == 1:
        return f.with_data(f.data.copy())
    k = (window - 1) // 2
    t = f.num_frames
    idx = np.clip(np.arange(t)[:, None] + np.arange(-k, k + 1)[None, :], 0, t - 1)
    stacked = f.data[idx].reshape(t, window * f.dim)
    return f.with_data(stacked)


def subsample_copies(f: FeatureMatrix, stride: int) -> list[FeatureMatrix]:
    """Strided offset copies: copy j keeps frames j, j+stride, j+2*stride, ..."""
    if stride < 1:
        raise ValueError("stride must be positive")
    if f.num_frames < stride:
        raise ValueError("fewer frames than stride")
    return [f.with_data(f.data[j::stride].copy()) for j in range(stride)]
