"""Synthetic three-domain corpus generation.

Utterances are rendered phone-by-phone with formant synthesis (voiced phones:
impulse train through parallel resonators; unvoiced: band-filtered noise), so
manifest labels are exact by construction. Domain profiles then apply channel
effects (band-limiting, reverberation, additive noise, gain/rate variation)
that never touch the labels.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .augment import RoomImpulseResponse, convolve_rir, mix_noise_at_snr
from .manifest import write_manifest
from .types import Utterance, Waveform
from .wavio import write_wav

SILENCE = "sil"
NOISE_MARK = "nsn"
FILLER_SYMBOLS = (SILENCE, NOISE_MARK)


@dataclass(frozen=True)
class PhoneTemplate:
    symbol: str
    voiced: bool
    formants: tuple[tuple[float, float, float], ...]  # (freq_hz, bandwidth_hz, gain)


@dataclass(frozen=True)
class PhoneInventory:
    phones: tuple[PhoneTemplate, ...]

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(p.symbol for p in self.phones) + FILLER_SYMBOLS

    def template(self, symbol: str) -> PhoneTemplate:
        for p in self.phones:
            if p.symbol == symbol:
                return p
        raise KeyError(symbol)


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    base_f0_hz: float
    formant_scale: float

    def __post_init__(self):
        if not 80.0 <= self.base_f0_hz <= 300.0:
            raise ValueError("base F0 outside [80, 300] Hz")
        if not 0.85 <= self.formant_scale <= 1.15:
            raise ValueError("formant scale outside [0.85, 1.15]")


@dataclass(frozen=True)
class DomainProfile:
    name: str
    band_hz: tuple[float, float]
    reverb_t60_s: tuple[float, float]  # (0, 0) disables reverb
    noise_kind: str  # none | babble | white
    noise_snr_db: tuple[float, float]
    speaking_rate: tuple[float, float]
    gain_var_db: float = 0.0


DOMAIN_PROFILES: dict[str, DomainProfile] = {
    "conversational": DomainProfile(
        name="conversational",
        band_hz=(300.0, 3400.0),
        reverb_t60_s=(0.0, 0.0),
        noise_kind="none",
        noise_snr_db=(0.0, 0.0),
        speaking_rate=(1.1, 1.3),
        gain_var_db=6.0,
    ),
    "broadcast": DomainProfile(
        name="broadcast",
        band_hz=(80.0, 3800.0),
        reverb_t60_s=(0.2, 0.5),
        noise_kind="babble",
        noise_snr_db=(10.0, 20.0),
        speaking_rate=(0.95, 1.1),
    ),
    "scripted": DomainProfile(
        name="scripted",
        band_hz=(80.0, 3800.0),
        reverb_t60_s=(0.0, 0.0),
        noise_kind="none",
        noise_snr_db=(0.0, 0.0),
        speaking_rate=(0.8, 0.95),
    ),
}

DISPLAY_NAMES = {
    "conversational": "Conversational Speech",
    "broadcast": "Broadcast News",
    "scripted": "Scripted Speech",
}


def make_inventory(n_phones: int = 20, seed: int = 11) -> PhoneInventory:
    """Deterministic phone set: voiced phones on a jittered formant grid,
    unvoiced phones as distinct noise bands."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    n_voiced = max(1, int(round(n_phones * 0.7)))
    n_unvoiced = n_phones - n_voiced
    phones: list[PhoneTemplate] = []
    for i in range(n_voiced):
        k1, k2 = i % 4, i // 4
        f1 = 300.0 + 140.0 * k1 + rng.uniform(-25.0, 25.0)
        f2 = 950.0 + 270.0 * k2 + rng.uniform(-40.0, 40.0)
        f3 = 2500.0 + rng.uniform(0.0, 700.0)
        phones.append(
            PhoneTemplate(
                symbol=f"v{i:02d}",
                voiced=True,
                formants=(
                    (f1, rng.uniform(60.0, 110.0), 1.0),
                    (f2, rng.uniform(90.0, 160.0), 0.63),
                    (f3, rng.uniform(140.0, 240.0), 0.32),
                ),
            )
        )
    for j in range(n_unvoiced):
        center = 1300.0 + j * (2200.0 / max(1, n_unvoiced)) + rng.uniform(-90.0, 90.0)
        phones.append(
            PhoneTemplate(
                symbol=f"u{j:02d}",
                voiced=False,
                formants=((center, rng.uniform(350.0, 700.0), 1.0),),
            )
        )
    return PhoneInventory(tuple(phones))


def _resonate(x: np.ndarray, freq_hz: float, bandwidth_hz: float, fs: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth_hz / fs)
    theta = 2.0 * np.pi * freq_hz / fs
    # Two-pole resonator, gain-compensated at the resonant frequency.
    b = np.array([1.0 - r])
    a = np.array([1.0, -2.0 * r * np.cos(theta), r * r])
    return lfilter(b, a, x)


def _impulse_train(n: int, f0_hz: float, fs: int) -> np.ndarray:
    out = np.zeros(n)
    # Small downward drift mimics natural declination.
    step = f0_hz / fs * (1.0 - 0.08 * np.arange(n) / max(1, n))
    phase = np.cumsum(step)
    ticks = np.flatnonzero(np.diff(np.floor(np.concatenate([[0.0], phase]))) > 0)
    out[ticks] = 1.0
    return out


def _envelope(n: int, fs: int, edge_ms: float = 5.0) -> np.ndarray:
    edge = min(n // 2, max(1, int(edge_ms * fs / 1000.0)))
    env = np.ones(n)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(edge) / edge)
    env[:edge] = ramp
    env[n - edge :] = ramp[::-1]
    return env


def render_phone(
    template: PhoneTemplate | None,
    symbol: str,
    duration_s: float,
    speaker: SpeakerProfile,
    f0_hz: float,
    fs: int,
    rng: np.random.Generator,
) -> np.ndarray:
    n = max(int(duration_s * fs), int(0.02 * fs))
    if symbol == SILENCE:
        return rng.normal(0.0, 1e-4, n)
    if symbol == NOISE_MARK:
        burst = _resonate(rng.standard_normal(n), 1800.0, 1600.0, fs)
        return 0.35 * burst / (np.max(np.abs(burst)) + 1e-12) + rng.normal(0.0, 1e-4, n)
    assert template is not None
    if template.voiced:
        excitation = _impulse_train(n, f0_hz, fs)
        parts = [
            gain * _resonate(excitation, freq * speaker.formant_scale, bw, fs)
            for freq, bw, gain in template.formants
        ]
        sound = np.sum(parts, axis=0) + rng.normal(0.0, 3e-3, n)
    else:
        (freq, bw, gain) = template.formants[0]
        sound = gain * _resonate(rng.standard_normal(n), freq * speaker.formant_scale, bw, fs)
        sound *= 0.5
    peak = np.max(np.abs(sound)) + 1e-12
    return (sound / peak) * _envelope(n, fs)


def render_utterance(
    labels,
    speaker: SpeakerProfile,
    inventory: PhoneInventory,
    rate: float,
    fs: int,
    rng: np.random.Generator,
) -> Waveform:
    pieces = []
    f0 = speaker.base_f0_hz * rng.uniform(0.95, 1.05)
    for symbol in labels:
        if symbol == SILENCE:
            dur = rng.uniform(0.08, 0.15)
            template = None
        elif symbol == NOISE_MARK:
            dur = rng.uniform(0.06, 0.12)
            template = None
        else:
            dur = rng.uniform(0.06, 0.18) / rate
            template = inventory.template(symbol)
        pieces.append(render_phone(template, symbol, dur, speaker, f0, fs, rng))
    samples = np.concatenate(pieces)
    peak = np.max(np.abs(samples)) + 1e-12
    return Waveform(samples * (0.25 / peak), fs)


def synth_rir(reverb_time_s: float, sample_rate: int, seed: int) -> RoomImpulseResponse:
    """Unit direct tap plus an exponentially decaying noise tail (60 dB over T60)."""
    if reverb_time_s < 0:
        raise ValueError("reverb time must be >= 0")
    if reverb_time_s == 0:
        return RoomImpulseResponse(np.array([1.0]), sample_rate, "rir_dry")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    n = int(1.2 * reverb_time_s * sample_rate)
    t = np.arange(1, n + 1) / sample_rate
    envelope = 10.0 ** (-3.0 * t / reverb_time_s)
    tail = rng.standard_normal(n) * envelope
    tail *= 0.5 / (np.sqrt(np.mean(tail[: sample_rate // 100] ** 2)) + 1e-12) * 0.1
    taps = np.concatenate([[1.0], tail])
    return RoomImpulseResponse(taps, sample_rate, f"rir_t60_{reverb_time_s:.2f}s_{seed}")


def babble_noise(duration_s: float, fs: int, seed: int, n_streams: int = 8) -> Waveform:
    """Sum of detuned synthetic voiced streams (speech-shaped background)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    n = int(duration_s * fs)
    total = np.zeros(n)
    for _ in range(n_streams):
        f0 = rng.uniform(90.0, 280.0)
        excitation = _impulse_train(n, f0, fs)
        stream = _resonate(excitation, rng.uniform(300.0, 800.0), rng.uniform(70.0, 120.0), fs)
        stream += 0.6 * _resonate(excitation, rng.uniform(900.0, 2200.0), rng.uniform(90.0, 180.0), fs)
        total += stream / (np.max(np.abs(stream)) + 1e-12)
    return Waveform(total * (0.3 / (np.max(np.abs(total)) + 1e-12)), fs)


def white_noise(duration_s: float, fs: int, seed: int) -> Waveform:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 9]))
    x = rng.standard_normal(int(duration_s * fs))
    return Waveform(x * (0.3 / (np.max(np.abs(x)) + 1e-12)), fs)


def _biquad_coeffs(kind: str, freq_hz: float, fs: int, q: float = 0.7071):
    w = 2.0 * np.pi * freq_hz / fs
    alpha = np.sin(w) / (2.0 * q)
    cosw = np.cos(w)
    if kind == "lowpass":
        b = np.array([(1 - cosw) / 2, 1 - cosw, (1 - cosw) / 2])
    elif kind == "highpass":
        b = np.array([(1 + cosw) / 2, -(1 + cosw), (1 + cosw) / 2])
    else:
        raise ValueError(kind)
    a = np.array([1 + alpha, -2 * cosw, 1 - alpha])
    return b / a[0], a / a[0]


def band_limit(w: Waveform, low_hz: float, high_hz: float, order: int = 2) -> Waveform:
    """Cascaded biquad high-pass at low_hz and low-pass at high_hz."""
    x = w.samples
    nyquist = w.sample_rate_hz / 2.0
    if low_hz > 0:
        b, a = _biquad_coeffs("highpass", low_hz, w.sample_rate_hz)
        for _ in range(order):
            x = lfilter(b, a, x)
    if high_hz < nyquist:
        b, a = _biquad_coeffs("lowpass", high_hz, w.sample_rate_hz)
        for _ in range(order):
            x = lfilter(b, a, x)
    return Waveform(x, w.sample_rate_hz)


def apply_domain_channel(
    w: Waveform, profile: DomainProfile, rng: np.random.Generator, noise_seed: int
) -> Waveform:
    """Channel chain: reverb, band-limit, additive noise, gain, clip."""
    out = w
    t60_lo, t60_hi = profile.reverb_t60_s
    if t60_hi > 0:
        t60 = rng.uniform(t60_lo, t60_hi)
        rir = synth_rir(t60, w.sample_rate_hz, seed=int(rng.integers(0, 2**31)))
        out = convolve_rir(out, rir)
    out = band_limit(out, profile.band_hz[0], profile.band_hz[1])
    if profile.noise_kind != "none":
        snr = rng.uniform(*profile.noise_snr_db)
        dur = min(3.0, out.duration_s + 0.1)
        if profile.noise_kind == "babble":
            noise = babble_noise(dur, w.sample_rate_hz, noise_seed)
        elif profile.noise_kind == "white":
            noise = white_noise(dur, w.sample_rate_hz, noise_seed)
        else:
            raise ValueError(f"unknown noise kind {profile.noise_kind!r}")
        out = mix_noise_at_snr(out, noise, snr, seed=noise_seed)
    if profile.gain_var_db > 0:
        gain_db = rng.uniform(-profile.gain_var_db, profile.gain_var_db)
        out = Waveform(out.samples * 10.0 ** (gain_db / 20.0), out.sample_rate_hz)
    return Waveform(np.clip(out.samples, -1.0, 1.0), out.sample_rate_hz)


def sample_phone_sequence(
    inventory: PhoneInventory,
    rng: np.random.Generator,
    min_content: int = 6,
    max_content: int = 20,
) -> list[str]:
    content = int(rng.integers(min_content, max_content + 1))
    symbols = [p.symbol for p in inventory.phones]
    seq = [SILENCE]
    for _ in range(content):
        if rng.random() < 0.04:
            seq.append(NOISE_MARK)
        seq.append(symbols[int(rng.integers(0, len(symbols)))])
    seq.append(SILENCE)
    return seq


def make_speakers(domain: str, split: str, n_speakers: int, seed: int) -> list[SpeakerProfile]:
    speakers = []
    for i in range(n_speakers):
        # crc32 (not hash()) keeps seeding stable across processes.
        tag = zlib.crc32(f"{domain}/{split}".encode("utf-8"))
        rng = np.random.default_rng(np.random.SeedSequence([seed, tag, i]))
        speakers.append(
            SpeakerProfile(
                speaker_id=f"{domain}_{split}_spk{i:02d}",
                base_f0_hz=float(rng.uniform(90.0, 260.0)),
                formant_scale=float(rng.uniform(0.88, 1.12)),
            )
        )
    return speakers


def generate_corpus(
    n_speakers: int,
    n_utts_per_speaker: int,
    domain: DomainProfile,
    inventory: PhoneInventory,
    seed: int,
    out_dir: str | os.PathLike,
    split: str = "train",
    sample_rate: int = 8000,
    min_phones: int = 6,
    max_phones: int = 20,
) -> list[Utterance]:
    """Render a corpus to out_dir/wav plus out_dir/manifest.tsv.

    Generation is a pure function of (arguments, seed); per-utterance seeds are
    derived so parallel and serial runs agree byte-for-byte.
    """
    if n_speakers <= 0 or n_utts_per_speaker <= 0:
        raise ValueError("speaker and utterance counts must be positive")
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    speakers = make_speakers(domain.name, split, n_speakers, seed)
    tag = zlib.crc32(f"{domain.name}/{split}".encode("utf-8"))
    utterances: list[Utterance] = []
    for si, speaker in enumerate(speakers):
        for ui in range(n_utts_per_speaker):
            rng = np.random.default_rng(np.random.SeedSequence([seed, tag, si, ui]))
            labels = sample_phone_sequence(inventory, rng, min_phones, max_phones)
            rate = rng.uniform(*domain.speaking_rate)
            clean = render_utterance(labels, speaker, inventory, rate, sample_rate, rng)
            noise_seed = int(rng.integers(0, 2**31))
            processed = apply_domain_channel(clean, domain, rng, noise_seed)
            utt_id = f"{speaker.speaker_id}_u{ui:03d}"
            rel_path = f"wav/{utt_id}.wav"
            write_wav(out_dir / rel_path, processed)
            utterances.append(
                Utterance(
                    utt_id=utt_id,
                    speaker=speaker.speaker_id,
                    domain=domain.name,
                    audio_path=rel_path,
                    labels=tuple(labels),
                )
            )
    write_manifest(out_dir / "manifest.tsv", utterances)
    return utterances


def band_limited_rir(rir: RoomImpulseResponse, low_hz: float, high_hz: float) -> RoomImpulseResponse:
    """Compose a room response with a band-limiting channel (telephone-like)."""
    taps = band_limit(Waveform(rir.taps, rir.sample_rate_hz), low_hz, high_hz).samples
    label = f"{rir.label}+band{int(low_hz)}-{int(high_hz)}"
    return RoomImpulseResponse(taps, rir.sample_rate_hz, label)


def make_rir_pool(sample_rate: int, seed: int, t60s=(0.12, 0.2, 0.3, 0.45)) -> list[RoomImpulseResponse]:
    """Reverberant responses plus band-limited channel variants, so multi-
    condition training covers narrowband channels as well as rooms."""
    pool = [synth_rir(t60, sample_rate, seed=seed + i) for i, t60 in enumerate(t60s)]
    pool.append(band_limited_rir(synth_rir(0.0, sample_rate, seed), 300.0, 3400.0))
    pool.append(band_limited_rir(synth_rir(t60s[1], sample_rate, seed + 7), 300.0, 3400.0))
    return pool


def make_noise_pool(sample_rate: int, seed: int, duration_s: float = 3.0) -> list[Waveform]:
    return [
        babble_noise(duration_s, sample_rate, seed),
        babble_noise(duration_s, sample_rate, seed + 1),
        white_noise(duration_s, sample_rate, seed + 2),
    ]
