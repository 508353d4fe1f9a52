"""16-bit PCM mono RIFF/WAVE reading and writing."""

from __future__ import annotations

import os
import struct

import numpy as np

from .types import Waveform

_PCM16_SCALE = 32767.0


def write_wav(path: str | os.PathLike, w: Waveform) -> None:
    """Write a waveform as 16-bit PCM mono. Samples are clipped to [-1, 1]."""
    clipped = np.clip(w.samples, -1.0, 1.0)
    pcm = np.round(clipped * _PCM16_SCALE).astype("<i2")
    data = pcm.tobytes()
    with open(path, "wb") as f:
        f.write(b"RIFF")
        f.write(struct.pack("<I", 36 + len(data)))
        f.write(b"WAVE")
        f.write(b"fmt ")
        # PCM fmt chunk: format 1, mono, 16 bit
        byte_rate = w.sample_rate_hz * 2
        f.write(struct.pack("<IHHIIHH", 16, 1, 1, w.sample_rate_hz, byte_rate, 2, 16))
        f.write(b"data")
        f.write(struct.pack("<I", len(data)))
        f.write(data)


def read_wav(path: str | os.PathLike) -> Waveform:
    """Read a 16-bit PCM mono WAV file written by :func:`write_wav` (or alike)."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_len,) = struct.unpack("<I", raw[pos + 4 : pos + 8])
        body = raw[pos + 8 : pos + 8 + chunk_len]
        if len(body) < chunk_len:
            raise ValueError(f"{path}: truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if chunk_len < 16:
                raise ValueError(f"{path}: malformed fmt chunk")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif chunk_id == b"data":
            data = body
        pos += 8 + chunk_len + (chunk_len & 1)
    if fmt is None or data is None:
        raise ValueError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1 or bits != 16:
        raise ValueError(f"{path}: unsupported encoding (want 16-bit PCM, got format {audio_format}/{bits} bit)")
    if channels != 1:
        raise ValueError(f"{path}: unsupported channel count {channels} (mono only)")
    pcm = np.frombuffer(data, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / _PCM16_SCALE, sample_rate)
