"""Feature pipelines over manifests.

Baseline: 40 log-mel + 3 pitch, first/second-order deltas (129 dims), per-
speaker CMVN. Extractor input: 40 log-mel + deltas (120 dims) with per-
utterance normalization so single waveforms can be featurized in isolation.
Training views: the window-stacked utterance plus its stride-offset copies.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from . import dsp
from .types import FeatureMatrix, Utterance, Waveform
from .util import parallel_map
from .wavio import read_wav

BASELINE_KIND = "fbank_pitch"
EXTRACTOR_INPUT_KIND = "fbank"


def _logmel_frames(w: Waveform, cfg: dsp.FrontendConfig) -> np.ndarray:
    emphasized = dsp.pre_emphasize(w, cfg.pre_emphasis)
    frames = dsp.frame_signal(emphasized, cfg)
    return dsp.log_mel(dsp.power_spectrum(frames), cfg, w.sample_rate_hz)


def baseline_features(w: Waveform, cfg: dsp.FrontendConfig, utt: Utterance) -> FeatureMatrix:
    """Log-mel + pitch with deltas (129 dims for the default config); CMVN is
    applied corpus-side by :func:`compute_baseline`."""
    mels = _logmel_frames(w, cfg)
    pitch = dsp.pitch_features(w, cfg)
    base = FeatureMatrix(
        data=np.hstack([mels, pitch]),
        frame_shift_ms=cfg.frame_shift_ms,
        utt_id=utt.utt_id,
        speaker=utt.speaker,
        domain=utt.domain,
        kind=BASELINE_KIND,
    )
    return dsp.add_deltas(base)


def extractor_input_features(w: Waveform, cfg: dsp.FrontendConfig, utt: Utterance | None = None) -> FeatureMatrix:
    """Log-mel + deltas with per-utterance mean/variance normalization."""
    mels = _logmel_frames(w, cfg)
    fm = FeatureMatrix(
        data=mels,
        frame_shift_ms=cfg.frame_shift_ms,
        utt_id=utt.utt_id if utt else "",
        speaker=utt.speaker if utt else "",
        domain=utt.domain if utt else "",
        kind=EXTRACTOR_INPUT_KIND,
    )
    fm = dsp.add_deltas(fm)
    mean = fm.data.mean(axis=0)
    std = fm.data.std(axis=0)
    return fm.with_data((fm.data - mean) / np.where(std > 0, std, 1.0))


def compute_baseline(
    utterances: list[Utterance],
    root: str | os.PathLike,
    cfg: dsp.FrontendConfig | None = None,
    cmvn: bool = True,
) -> list[FeatureMatrix]:
    cfg = cfg or dsp.FrontendConfig()
    root = Path(root)
    feats = parallel_map(
        lambda u: baseline_features(read_wav(root / u.audio_path), cfg, u), utterances
    )
    return dsp.cmvn_per_speaker(feats) if cmvn else feats


def compute_extractor_input(
    utterances: list[Utterance],
    root: str | os.PathLike,
    cfg: dsp.FrontendConfig | None = None,
) -> list[FeatureMatrix]:
    cfg = cfg or dsp.FrontendConfig()
    root = Path(root)
    return parallel_map(
        lambda u: extractor_input_features(read_wav(root / u.audio_path), cfg, u), utterances
    )


def training_views(fm: FeatureMatrix, window: int, stride: int = 2) -> list[FeatureMatrix]:
    """Window-stack the utterance, then add its strided offset copies.

    With the default stride of 2 this yields three training views per
    utterance: the stacked original plus two half-rate copies.
    """
    stacked = dsp.stack_window(fm, window)
    views = [stacked]
    if stride > 1 and stacked.num_frames >= stride:
        views.extend(dsp.subsample_copies(stacked, stride))
    return views
