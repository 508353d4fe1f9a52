"""Frozen-network bottleneck feature extraction.

A TDNN acoustic model is trained with CTC on a robust (multi-condition
augmented) source corpus, then frozen; activations from an internal layer
serve as input features for new target-domain models.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import dsp, nnet, training
from .features import compute_extractor_input, extractor_input_features
from .types import FeatureMatrix, Utterance, Waveform
from .util import parallel_map
from .wavio import read_wav


def _frontend_hash(cfg: dsp.FrontendConfig) -> str:
    blob = json.dumps(asdict(cfg), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class FeatureExtractor:
    net: nnet.Network
    tap_layer: int  # 1-based index into the TDNN stack
    frontend: dsp.FrontendConfig
    sample_rate_hz: int
    # Per-dim affine fitted on source-corpus tap activations at training time;
    # raw ReLU taps have wildly uneven scales, so the extractor ships its own
    # output normalization (no target-domain statistics involved).
    out_mean: np.ndarray | None = None
    out_std: np.ndarray | None = None

    def __post_init__(self):
        n_hidden = sum(1 for s in self.net.specs if s.kind == "tdnn")
        if not 1 <= self.tap_layer <= n_hidden:
            raise ValueError(f"tap layer {self.tap_layer} outside 1..{n_hidden}")

    @property
    def output_dim(self) -> int:
        hidden = [s for s in self.net.specs if s.kind == "tdnn"]
        return hidden[self.tap_layer - 1].width


def train_extractor(
    utterances: list[Utterance],
    root: str | os.PathLike,
    phone_map: dict[str, int],
    width: int = 96,
    tap_layer: int = 3,
    train_cfg: training.TrainConfig | None = None,
    frontend: dsp.FrontendConfig | None = None,
    sample_rate_hz: int = 8000,
) -> tuple[FeatureExtractor, list[float]]:
    """Train the TDNN source model and freeze it as a feature extractor.

    The source corpus is expected to already contain its augmented copies
    (that multi-condition exposure is what makes the tapped features robust).
    """
    train_cfg = train_cfg or training.TrainConfig()
    frontend = frontend or dsp.FrontendConfig()
    feats = compute_extractor_input(utterances, root, frontend)
    n_out = max(phone_map.values()) + 1
    specs = nnet.tdnn_arch(feats[0].dim, width, n_out)
    net = nnet.Network(specs, seed=train_cfg.seed)
    views = [
        (fm, training.labels_to_ids(u.labels, phone_map)) for fm, u in zip(feats, utterances)
    ]
    history = training.train_ctc(net, views, train_cfg)
    taps = np.vstack([net.forward(fm.data, upto=tap_layer) for fm in feats])
    out_mean = taps.mean(axis=0)
    std = taps.std(axis=0)
    # Floor relative to the typical dimension: rarely-active units must not be
    # amplified into dominant inputs on mismatched data.
    out_std = np.maximum(std, max(0.1 * float(np.median(std)), 1e-6))
    extractor = FeatureExtractor(
        net=net,
        tap_layer=tap_layer,
        frontend=frontend,
        sample_rate_hz=sample_rate_hz,
        out_mean=out_mean,
        out_std=out_std,
    )
    return extractor, history


def extract_features(ext: FeatureExtractor, w: Waveform, utt: Utterance | None = None) -> FeatureMatrix:
    """Forward the extractor's own front-end output through layers 1..tap.

    Frame count is preserved (splices replicate edges); parameters are never
    touched.
    """
    if w.sample_rate_hz != ext.sample_rate_hz:
        raise ValueError(
            f"waveform at {w.sample_rate_hz} Hz but extractor trained at {ext.sample_rate_hz} Hz"
        )
    fm = extractor_input_features(w, ext.frontend, utt)
    taps = ext.net.forward(fm.data, upto=ext.tap_layer)
    if ext.out_mean is not None:
        taps = (taps - ext.out_mean) / ext.out_std
    return FeatureMatrix(
        data=taps,
        frame_shift_ms=ext.frontend.frame_shift_ms,
        utt_id=utt.utt_id if utt else "",
        speaker=utt.speaker if utt else "",
        domain=utt.domain if utt else "",
        kind="bottleneck",
    )


def compute_bottleneck(
    ext: FeatureExtractor,
    utterances: list[Utterance],
    root: str | os.PathLike,
    cmvn: bool = False,
) -> list[FeatureMatrix]:
    """Bottleneck features for a whole manifest (optional per-speaker CMVN)."""
    root = Path(root)
    feats = parallel_map(
        lambda u: extract_features(ext, read_wav(root / u.audio_path), u), utterances
    )
    return dsp.cmvn_per_speaker(feats) if cmvn else feats


def save_extractor(path: str | os.PathLike, ext: FeatureExtractor, meta: dict | None = None) -> None:
    """Checkpoint plus a one-line JSON sidecar (tap layer, front-end hash)."""
    path = Path(path)
    payload = dict(meta or {})
    payload["frontend"] = asdict(ext.frontend)
    payload["sample_rate_hz"] = ext.sample_rate_hz
    if ext.out_mean is not None:
        payload["out_mean"] = ext.out_mean.tolist()
        payload["out_std"] = ext.out_std.tolist()
    nnet.save_checkpoint(path, ext.net, payload)
    sidecar = {"tap_layer": ext.tap_layer, "frontend_hash": _frontend_hash(ext.frontend)}
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8")


def load_extractor(path: str | os.PathLike) -> FeatureExtractor:
    path = Path(path)
    net, meta = nnet.load_checkpoint(path)
    sidecar = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    frontend = dsp.FrontendConfig(**meta["frontend"])
    expected = sidecar.get("frontend_hash")
    if expected and expected != _frontend_hash(frontend):
        raise ValueError(f"{path}: sidecar front-end hash does not match checkpoint metadata")
    return FeatureExtractor(
        net=net,
        tap_layer=sidecar["tap_layer"],
        frontend=frontend,
        sample_rate_hz=meta["sample_rate_hz"],
        out_mean=np.asarray(meta["out_mean"]) if "out_mean" in meta else None,
        out_std=np.asarray(meta["out_std"]) if "out_std" in meta else None,
    )
