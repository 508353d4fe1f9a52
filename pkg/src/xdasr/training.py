"""CTC training loop shared by the target models and the feature extractor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ctc, nnet
from .types import FeatureMatrix


@dataclass
class TrainConfig:
    epochs: int = 12
    lr: float = 0.02
    lr_decay: float = 0.9  # multiplicative, per epoch
    momentum: float = 0.9
    grad_clip: float = 5.0
    seed: int = 0


def build_phone_map(symbols) -> dict[str, int]:
    """Stable phone -> label-id mapping; id 0 is reserved for blank."""
    return {sym: i + 1 for i, sym in enumerate(sorted(set(symbols)))}


def labels_to_ids(labels, phone_map: dict[str, int]) -> list[int]:
    return [phone_map[sym] for sym in labels]


def ids_to_labels(ids, phone_map: dict[str, int]) -> list[str]:
    inverse = {i: sym for sym, i in phone_map.items()}
    return [inverse[i] for i in ids]


def train_ctc(
    net: nnet.Network,
    views: list[tuple[FeatureMatrix, list[int]]],
    cfg: TrainConfig,
) -> list[float]:
    """Train in place on (features, label ids) pairs; returns per-epoch mean loss.

    One utterance view is one batch. Views whose label sequence cannot fit the
    frame count are skipped. Deterministic under (config, seed).
    """
    usable = [
        (fm, ids)
        for fm, ids in views
        if ids and fm.num_frames >= ctc.min_input_length(ids)
    ]
    if not usable:
        raise ValueError("no trainable utterances (labels too long for inputs?)")
    opt = nnet.SgdMomentum(net.num_params, cfg.lr, cfg.momentum, cfg.grad_clip)
    rng = np.random.default_rng(cfg.seed)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(usable))
        total = 0.0
        frames = 0
        for idx in order:
            fm, ids = usable[int(idx)]
            logits = net.forward(fm.data)
            logp = nnet.log_softmax(logits)
            result = ctc.ctc_loss(logp, ids)
            if not np.isfinite(result.neg_log_likelihood):
                raise FloatingPointError(
                    f"CTC loss diverged (utterance {fm.utt_id!r}, epoch {epoch}, seed {cfg.seed})"
                )
            net.backward(result.grad_logits)
            opt.step(net)
            total += result.neg_log_likelihood
            frames += fm.num_frames
        opt.lr *= cfg.lr_decay
        history.append(total / frames)
    return history


def decode_features(net: nnet.Network, feats: list[FeatureMatrix], beam: int = 0) -> list[list[int]]:
    """Greedy (default) or prefix-beam decode of each utterance."""
    out = []
    for fm in feats:
        logp = net.log_probs(fm.data)
        if beam and beam > 1:
            out.append(ctc.prefix_beam_decode(logp, beam))
        else:
            out.append(ctc.greedy_decode(logp))
    return out
