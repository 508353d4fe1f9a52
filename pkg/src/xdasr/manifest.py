"""Tab-separated corpus manifests.

Each line: utterance id, speaker id, domain tag, relative audio path,
space-separated phoneme labels. Augmented manifests carry two extra trailing
fields (rir label, snr in dB; "-" on originals).
"""

from __future__ import annotations

import os

from .types import Utterance


def write_manifest(path: str | os.PathLike, utterances: list[Utterance]) -> None:
    # Once any record carries augmentation fields, every line gets the two
    # trailing columns so the file stays rectangular.
    augmented = any(u.rir_label is not None or u.snr_db is not None for u in utterances)
    lines = []
    for u in utterances:
        fields = [u.utt_id, u.speaker, u.domain, u.audio_path, " ".join(u.labels)]
        if augmented:
            fields.append(u.rir_label if u.rir_label is not None else "-")
            fields.append("-" if u.snr_db is None else f"{u.snr_db:g}")
        lines.append("\t".join(fields))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines))
        if lines:
            f.write("\n")


def read_manifest(path: str | os.PathLike) -> list[Utterance]:
    utterances = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) not in (5, 7):
                raise ValueError(
                    f"{path}:{lineno}: expected 5 (or 7 augmented) tab-separated fields, got {len(fields)}"
                )
            utt_id, speaker, domain, audio_path, labels = fields[:5]
            rir_label = None
            snr_db = None
            if len(fields) == 7:
                rir_label = None if fields[5] == "-" else fields[5]
                snr_db = None if fields[6] == "-" else float(fields[6])
            utterances.append(
                Utterance(
                    utt_id=utt_id,
                    speaker=speaker,
                    domain=domain,
                    audio_path=audio_path,
                    labels=tuple(labels.split()) if labels else (),
                    rir_label=rir_label,
                    snr_db=snr_db,
                )
            )
    return utterances
