"""Core value types shared across the toolkit."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class Waveform:
    """Mono sample buffer in [-1, 1] plus its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("waveform must be a non-empty 1-D sample buffer")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class FeatureMatrix:
    """T x D feature frames with per-utterance provenance."""

    data: np.ndarray
    frame_shift_ms: float
    utt_id: str = ""
    speaker: str = ""
    domain: str = ""
    kind: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1:
            raise ValueError("feature matrix must be 2-D with at least one frame")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature matrix contains non-finite entries")

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray, kind: str | None = None) -> "FeatureMatrix":
        return replace(self, data=data, kind=self.kind if kind is None else kind)


@dataclass
class Utterance:
    """One manifest record: audio reference, speaker/domain tags, phone labels."""

    utt_id: str
    speaker: str
    domain: str
    audio_path: str
    labels: tuple[str, ...] = field(default_factory=tuple)
    rir_label: str | None = None
    snr_db: float | None = None
