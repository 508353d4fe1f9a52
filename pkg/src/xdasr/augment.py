"""Multi-condition augmentation: reverberation and additive noise at target SNR."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .types import Utterance, Waveform


@dataclass
class RoomImpulseResponse:
    taps: np.ndarray
    sample_rate_hz: int
    label: str

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)
        if self.taps.size == 0 or not np.all(np.isfinite(self.taps)):
            raise ValueError("RIR taps must be non-empty and finite")
        # Direct path: a significant tap inside the first 10 ms.
        head = self.taps[: max(1, int(0.01 * self.sample_rate_hz))]
        if np.max(np.abs(head)) < 1e-3 * np.max(np.abs(self.taps)):
            raise ValueError("RIR lacks a direct-path tap in the first 10 ms")


@dataclass
class AugmentPlan:
    n_copies: int = 3
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0)
    seed: int = 0
    rirs: list[RoomImpulseResponse] = field(default_factory=list)
    noises: list[tuple[str, Waveform]] = field(default_factory=list)

    def __post_init__(self):
        if self.n_copies < 0:
            raise ValueError("n_copies must be >= 0")
        if not self.snr_grid_db:
            raise ValueError("SNR grid must be non-empty")


def convolve_full(x: np.ndarray, taps: np.ndarray, truncate_to: int | None = None) -> np.ndarray:
    """Plain linear convolution (the linear core of reverberation)."""
    out = np.convolve(np.asarray(x, dtype=np.float64), np.asarray(taps, dtype=np.float64))
    return out if truncate_to is None else out[:truncate_to]


def convolve_rir(w: Waveform, rir: RoomImpulseResponse) -> Waveform:
    """Reverberate: convolve, truncate to input length, renormalize to the
    input's peak amplitude (keeps the [-1, 1] invariant for hot RIRs)."""
    if w.sample_rate_hz != rir.sample_rate_hz:
        raise ValueError(
            f"sample-rate mismatch: waveform {w.sample_rate_hz} Hz vs RIR {rir.sample_rate_hz} Hz"
        )
    out = convolve_full(w.samples, rir.taps, truncate_to=len(w))
    peak_in = np.max(np.abs(w.samples))
    peak_out = np.max(np.abs(out))
    if peak_out > 0:
        out = out * (peak_in / peak_out)
    return Waveform(out, w.sample_rate_hz)


def _fit_noise(noise: Waveform, n: int, seed: int) -> np.ndarray:
    """Loop/crop noise to n samples starting at a seeded random offset."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    offset = int(rng.integers(0, len(noise)))
    reps = int(np.ceil((offset + n) / len(noise))) + 1
    tiled = np.tile(noise.samples, reps)
    return tiled[offset : offset + n]


def mix_noise_at_snr(w: Waveform, noise: Waveform, snr_db: float, seed: int) -> Waveform:
    """Add noise scaled so the signal-to-noise power ratio over the whole
    utterance hits snr_db; the mix is clipped to [-1, 1]."""
    if w.sample_rate_hz != noise.sample_rate_hz:
        raise ValueError("sample-rate mismatch between signal and noise")
    aligned = _fit_noise(noise, len(w), seed)
    p_signal = float(np.mean(w.samples**2))
    p_noise = float(np.mean(aligned**2))
    if p_signal <= 0.0 or p_noise <= 0.0:
        raise ValueError("degenerate power in signal or noise")
    gain = np.sqrt(p_signal / p_noise) * 10.0 ** (-snr_db / 20.0)
    mixed = w.samples + gain * aligned
    return Waveform(np.clip(mixed, -1.0, 1.0), w.sample_rate_hz)


def _augment_one(
    w: Waveform, utt_index: int, copy_index: int, plan: AugmentPlan
) -> tuple[Waveform, Waveform, np.ndarray, str, float]:
    """One augmented rendition plus its components (reverberant signal and
    scaled noise, pre-clipping) for SNR verification."""
    if not plan.rirs or not plan.noises:
        raise ValueError("augment plan needs non-empty RIR and noise pools")
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, utt_index, copy_index]))
    rir = plan.rirs[int(rng.integers(0, len(plan.rirs)))]
    noise_label, noise = plan.noises[int(rng.integers(0, len(plan.noises)))]
    snr_db = float(plan.snr_grid_db[int(rng.integers(0, len(plan.snr_grid_db)))])
    noise_seed = int(rng.integers(0, 2**31))

    reverberant = convolve_rir(w, rir)
    aligned = _fit_noise(noise, len(w), noise_seed)
    p_signal = float(np.mean(reverberant.samples**2))
    p_noise = float(np.mean(aligned**2))
    if p_signal <= 0.0 or p_noise <= 0.0:
        raise ValueError("degenerate power in signal or noise")
    gain = np.sqrt(p_signal / p_noise) * 10.0 ** (-snr_db / 20.0)
    scaled_noise = gain * aligned
    mixed = Waveform(np.clip(reverberant.samples + scaled_noise, -1.0, 1.0), w.sample_rate_hz)
    return mixed, reverberant, scaled_noise, rir.label, snr_db


def build_multicondition_corpus(
    utterances: list[Utterance],
    plan: AugmentPlan,
    in_root: str | os.PathLike,
    out_dir: str | os.PathLike,
) -> list[Utterance]:
    """Write n_copies augmented renditions per utterance next to the originals.

    The output manifest interleaves, per input utterance, the original record
    followed by its copies; copies inherit speaker/domain/labels and record
    their RIR label and SNR choice. Deterministic under plan.seed.
    """
    from .manifest import write_manifest
    from .wavio import read_wav, write_wav

    in_root = Path(in_root)
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    out_utts: list[Utterance] = []
    for utt_index, utt in enumerate(utterances):
        wave = read_wav(in_root / utt.audio_path)
        rel = f"wav/{utt.utt_id}.wav"
        write_wav(out_dir / rel, wave)
        out_utts.append(replace(utt, audio_path=rel))
        for copy_index in range(1, plan.n_copies + 1):
            mixed, _, _, rir_label, snr_db = _augment_one(wave, utt_index, copy_index, plan)
            aug_id = f"{utt.utt_id}-aug{copy_index}"
            aug_rel = f"wav/{aug_id}.wav"
            write_wav(out_dir / aug_rel, mixed)
            out_utts.append(
                replace(utt, utt_id=aug_id, audio_path=aug_rel, rir_label=rir_label, snr_db=snr_db)
            )
    write_manifest(out_dir / "manifest.tsv", out_utts)
    return out_utts
