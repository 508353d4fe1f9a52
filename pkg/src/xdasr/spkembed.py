"""Per-sub-speaker embeddings.

A speaker's frames (utterances concatenated in manifest order) are chunked
into 6000-frame sub-speakers; each chunk is summarized by per-dimension mean
and log-variance statistics, projected to a small space by a PCA projector
fitted on training-corpus chunks, and L2-normalized. The embedding is appended
to every owned frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import FeatureMatrix
from .viz import Projector

CHUNK_FRAMES = 6000
VAR_FLOOR = 1e-10


@dataclass(frozen=True)
class SubSpeaker:
    speaker: str
    chunk_index: int
    # (utterance index into the feature list, start frame, end frame) spans
    spans: tuple[tuple[int, int, int], ...]

    @property
    def num_frames(self) -> int:
        return sum(end - start for _, start, end in self.spans)


def split_subspeakers(features: list[FeatureMatrix], chunk_frames: int = CHUNK_FRAMES) -> list[SubSpeaker]:
    """Partition every speaker's frames into consecutive fixed-size chunks;
    the remainder forms the final chunk. Every frame lands in exactly one."""
    order: dict[str, list[int]] = {}
    for i, fm in enumerate(features):
        order.setdefault(fm.speaker, []).append(i)
    out: list[SubSpeaker] = []
    for speaker in sorted(order):
        chunks: list[list[tuple[int, int, int]]] = [[]]
        filled = 0
        for idx in order[speaker]:
            t = features[idx].num_frames
            start = 0
            while start < t:
                room = chunk_frames - filled
                take = min(room, t - start)
                chunks[-1].append((idx, start, start + take))
                filled += take
                start += take
                if filled == chunk_frames:
                    chunks.append([])
                    filled = 0
        if not chunks[-1]:
            chunks.pop()
        out.extend(
            SubSpeaker(speaker=speaker, chunk_index=ci, spans=tuple(spans))
            for ci, spans in enumerate(chunks)
        )
    return out


def chunk_stats(features: list[FeatureMatrix], sub: SubSpeaker) -> np.ndarray:
    """Concatenated per-dim mean and log-variance of a chunk's frames.

    Chunks with a single frame get a zero log-variance block.
    """
    frames = np.vstack([features[idx].data[start:end] for idx, start, end in sub.spans])
    mean = frames.mean(axis=0)
    if frames.shape[0] < 2:
        logvar = np.zeros_like(mean)
    else:
        logvar = np.log(np.maximum(frames.var(axis=0), VAR_FLOOR))
    return np.concatenate([mean, logvar])


def fit_projector(stats: np.ndarray, dim: int) -> Projector:
    """PCA projector over training-chunk statistics (dense eigendecomposition)."""
    stats = np.asarray(stats, dtype=np.float64)
    k = min(dim, stats.shape[1])
    mean = stats.mean(axis=0)
    centered = stats - mean
    cov = (centered.T @ centered) / max(1, stats.shape[0])
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    axes = eigvecs[:, order].T
    total = float(eigvals.sum())
    explained = eigvals[order] / total if total > 0 else np.zeros(k)
    return Projector(mean=mean, axes=axes, explained=explained)


def compute_embedding(features: list[FeatureMatrix], sub: SubSpeaker, projector: Projector) -> np.ndarray:
    """Project a chunk's statistics and L2-normalize."""
    vec = (chunk_stats(features, sub) - projector.mean) @ projector.axes.T
    if vec.size == 0:
        return vec
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        vec = np.zeros_like(vec)
        vec[0] = 1.0
        return vec
    return vec / norm


def append_embeddings(
    features: list[FeatureMatrix],
    subspeakers: list[SubSpeaker],
    embeddings: list[np.ndarray],
    kind_suffix: str = "+spk",
) -> list[FeatureMatrix]:
    """Give every frame its owning sub-speaker's embedding as trailing dims."""
    if len(subspeakers) != len(embeddings):
        raise ValueError("one embedding per sub-speaker required")
    owner: dict[int, list[tuple[int, int, np.ndarray]]] = {}
    for sub, emb in zip(subspeakers, embeddings):
        for idx, start, end in sub.spans:
            owner.setdefault(idx, []).append((start, end, emb))
    out = []
    for i, fm in enumerate(features):
        spans = sorted(owner.get(i, []))
        covered = sum(end - start for start, end, _ in spans)
        if covered != fm.num_frames:
            raise ValueError(f"utterance {fm.utt_id!r} has frames with no owning sub-speaker")
        e_dim = spans[0][2].shape[0] if spans else 0
        if e_dim == 0:
            out.append(fm.with_data(fm.data.copy(), kind=fm.kind + kind_suffix))
            continue
        extra = np.empty((fm.num_frames, e_dim))
        for start, end, emb in spans:
            extra[start:end] = emb
        out.append(fm.with_data(np.hstack([fm.data, extra]), kind=fm.kind + kind_suffix))
    return out


def build_embedded_features(
    train_feats: list[FeatureMatrix],
    apply_feats: list[FeatureMatrix],
    dim: int = 16,
) -> list[FeatureMatrix]:
    """Fit the projector on training chunks only, then embed ``apply_feats``."""
    train_subs = split_subspeakers(train_feats)
    stats = np.vstack([chunk_stats(train_feats, s) for s in train_subs])
    projector = fit_projector(stats, dim)
    subs = split_subspeakers(apply_feats)
    embeddings = [compute_embedding(apply_feats, s, projector) for s in subs]
    return append_embeddings(apply_feats, subs, embeddings)
