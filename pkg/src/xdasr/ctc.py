"""CTC loss, exhaustive oracle, and decoders.

Blank id is 0 throughout. Log-space recursions run in the selected kernels
backend; hard zeros (-inf log probabilities) are absorbing and never produce
NaN.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels

BLANK = 0


@dataclass
class CtcResult:
    neg_log_likelihood: float
    grad_logits: np.ndarray  # T x V, rows sum to 0


def expand_labels(labels) -> np.ndarray:
    """Interleave blanks: [a, b] -> [0, a, 0, b, 0]."""
    labels = list(labels)
    ext = np.zeros(2 * len(labels) + 1, dtype=np.int64)
    ext[1::2] = labels
    return ext


def min_input_length(labels) -> int:
    labels = list(labels)
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def _check_labels(labels, n_vocab: int) -> None:
    for lab in labels:
        if not 1 <= lab < n_vocab:
            raise ValueError(f"label id {lab} outside [1, {n_vocab - 1}]")


def ctc_loss(log_probs: np.ndarray, labels) -> CtcResult:
    """Negative log likelihood and gradient w.r.t. pre-softmax logits.

    ``log_probs`` holds per-frame log-softmax rows (T x V). The gradient is
    softmax minus the label posterior from the alpha/beta pass.
    """
    log_probs = np.ascontiguousarray(log_probs, dtype=np.float64)
    t_len, n_vocab = log_probs.shape
    labels = list(labels)
    _check_labels(labels, n_vocab)
    if t_len < min_input_length(labels):
        raise ValueError("label too long for input")
    ext = expand_labels(labels)
    ll, gamma = kernels.ctc_forward_backward(log_probs, ext)
    if ll == -np.inf:
        # All paths blocked by hard zeros: zero gradient, infinite loss.
        return CtcResult(np.inf, np.zeros_like(log_probs))
    grad = np.exp(log_probs) - gamma
    return CtcResult(-ll, grad)


def grad_log_probs(log_probs: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Loss and gradient w.r.t. the log probabilities themselves (-gamma)."""
    log_probs = np.ascontiguousarray(log_probs, dtype=np.float64)
    labels = list(labels)
    _check_labels(labels, log_probs.shape[1])
    if log_probs.shape[0] < min_input_length(labels):
        raise ValueError("label too long for input")
    ll, gamma = kernels.ctc_forward_backward(log_probs, expand_labels(labels))
    if ll == -np.inf:
        return np.inf, np.zeros_like(log_probs)
    return -ll, -gamma


def collapse(path) -> list[int]:
    """Merge consecutive repeats, then drop blanks."""
    out: list[int] = []
    prev = None
    for sym in path:
        if sym != prev and sym != BLANK:
            out.append(int(sym))
        prev = sym
    return out


def brute_force_ctc(log_probs: np.ndarray, labels) -> float:
    """Exhaustive-path oracle: enumerate all V^T frame paths and sum the
    probability mass of those collapsing to the target. Independent of the
    alpha/beta recursion."""
    log_probs = np.asarray(log_probs, dtype=np.float64)
    t_len, n_vocab = log_probs.shape
    if n_vocab**t_len > 10**7:
        raise ValueError("instance too large")
    target = np.asarray(list(labels), dtype=np.int64)
    paths = np.array(list(itertools.product(range(n_vocab), repeat=t_len)), dtype=np.int64)
    # Collapse every path in parallel: keep first of each repeat run, drop blanks.
    keep = np.ones(paths.shape, dtype=bool)
    keep[:, 1:] = paths[:, 1:] != paths[:, :-1]
    emit = keep & (paths != BLANK)
    position = np.cumsum(emit, axis=1)  # 1-based index into the collapsed output
    length_ok = position[:, -1] == len(target)
    if len(target) > 0:
        padded = np.concatenate([target, [-1]])
        expected = padded[np.minimum(position - 1, len(target) - 1)]
        symbol_ok = np.where(emit, paths == expected, True).all(axis=1)
        match = length_ok & symbol_ok & (position <= len(target)).all(axis=1)
    else:
        match = length_ok
    if not match.any():
        return np.inf
    path_logp = log_probs[np.arange(t_len)[None, :], paths].sum(axis=1)
    chosen = path_logp[match]
    m = chosen.max()
    return float(-(m + np.log(np.exp(chosen - m).sum())))


def greedy_decode(log_probs: np.ndarray) -> list[int]:
    """Per-frame argmax, collapse repeats, strip blanks."""
    return collapse(np.argmax(log_probs, axis=1))


def prefix_beam_decode(log_probs: np.ndarray, beam: int) -> list[int]:
    """CTC prefix beam search without a language model.

    Tracks per-prefix blank/non-blank path mass in log space; with a beam at
    least as large as the number of live prefixes the result is the exact
    maximum-posterior label sequence.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    log_probs = np.asarray(log_probs, dtype=np.float64)
    t_len, n_vocab = log_probs.shape
    # prefix -> (log p ending in blank, log p ending in non-blank)
    beams: dict[tuple[int, ...], tuple[float, float]] = {(): (0.0, -np.inf)}
    for t in range(t_len):
        frame = log_probs[t]
        best = sorted(beams.items(), key=lambda kv: (-np.logaddexp(kv[1][0], kv[1][1]), kv[0]))
        nxt: dict[tuple[int, ...], list[float]] = {}

        def _add(prefix, p_b, p_nb):
            slot = nxt.setdefault(prefix, [-np.inf, -np.inf])
            slot[0] = np.logaddexp(slot[0], p_b)
            slot[1] = np.logaddexp(slot[1], p_nb)

        for prefix, (p_b, p_nb) in best[:beam]:
            total = np.logaddexp(p_b, p_nb)
            _add(prefix, total + frame[BLANK], -np.inf)
            for sym in range(1, n_vocab):
                p_sym = frame[sym]
                if prefix and prefix[-1] == sym:
                    # Repeated symbol: extends only across a blank boundary.
                    _add(prefix, -np.inf, p_nb + p_sym)
                    _add(prefix + (sym,), -np.inf, p_b + p_sym)
                else:
                    _add(prefix + (sym,), -np.inf, total + p_sym)
        beams = {k: (v[0], v[1]) for k, v in nxt.items()}
    winner = max(beams.items(), key=lambda kv: (np.logaddexp(kv[1][0], kv[1][1]), kv[0]))
    return list(winner[0])
