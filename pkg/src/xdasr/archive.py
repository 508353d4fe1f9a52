"""Binary feature archives.

Layout: magic "XDAF", version u32, then per-utterance records of
(id length u32, UTF-8 id, T u32, D u32, row-major f32 data), all little-endian.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .types import FeatureMatrix

MAGIC = b"XDAF"
VERSION = 1


def write_archive(path: str | os.PathLike, items: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for utt_id, mat in items.items():
            mat = np.ascontiguousarray(mat, dtype="<f4")
            if mat.ndim != 2:
                raise ValueError(f"{utt_id}: feature matrix must be 2-D")
            ident = utt_id.encode("utf-8")
            f.write(struct.pack("<I", len(ident)))
            f.write(ident)
            f.write(struct.pack("<II", mat.shape[0], mat.shape[1]))
            f.write(mat.tobytes())


def read_archive(path: str | os.PathLike) -> dict[str, np.ndarray]:
    items: dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        head = f.read(8)
        if len(head) < 8 or head[:4] != MAGIC:
            raise ValueError(f"{path}: not a feature archive")
        (version,) = struct.unpack("<I", head[4:])
        if version != VERSION:
            raise ValueError(f"{path}: unsupported archive version {version}")
        while True:
            lenbuf = f.read(4)
            if not lenbuf:
                break
            (id_len,) = struct.unpack("<I", lenbuf)
            ident = f.read(id_len).decode("utf-8")
            t, d = struct.unpack("<II", f.read(8))
            payload = f.read(t * d * 4)
            if len(payload) != t * d * 4:
                raise ValueError(f"{path}: truncated record for {ident!r}")
            items[ident] = np.frombuffer(payload, dtype="<f4").reshape(t, d).astype(np.float64)
    return items


def save_features(path: str | os.PathLike, feats: list[FeatureMatrix]) -> None:
    write_archive(path, {fm.utt_id: fm.data for fm in feats})


def load_features(
    path: str | os.PathLike,
    utterances,
    frame_shift_ms: float = 10.0,
    kind: str = "",
) -> list[FeatureMatrix]:
    """Load an archive and rejoin speaker/domain provenance from a manifest."""
    items = read_archive(path)
    feats = []
    for u in utterances:
        if u.utt_id not in items:
            raise KeyError(f"{path}: no features for utterance {u.utt_id!r}")
        feats.append(
            FeatureMatrix(
                data=items[u.utt_id],
                frame_shift_ms=frame_shift_ms,
                utt_id=u.utt_id,
                speaker=u.speaker,
                domain=u.domain,
                kind=kind,
            )
        )
    return feats
