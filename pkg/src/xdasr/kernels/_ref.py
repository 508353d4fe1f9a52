"""Pure numpy fallback for the hot kernels.

Bit-compatible semantics with the compiled backend (same recurrences, same
log-space handling of hard zeros); only speed differs.
"""

from __future__ import annotations

import numpy as np

NAME = "pure"

NEG_INF = -np.inf


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Clamp keeps exp() in range; saturation is exact in float64 anyway.
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def lstm_forward(xp: np.ndarray, wh: np.ndarray):
    """Run the LSTM recurrence over precomputed input projections.

    xp: T x 4H input-side activations (x @ Wx + b), gate order i, f, g, o.
    wh: H x 4H recurrent weights.
    Returns (h, c, gates) with post-nonlinearity gate values cached.
    """
    t_len, four_h = xp.shape
    h_dim = four_h // 4
    h = np.zeros((t_len, h_dim))
    c = np.zeros((t_len, h_dim))
    gates = np.zeros((t_len, four_h))
    h_prev = np.zeros(h_dim)
    c_prev = np.zeros(h_dim)
    for t in range(t_len):
        a = xp[t] + h_prev @ wh
        i = _sigmoid(a[:h_dim])
        f = _sigmoid(a[h_dim : 2 * h_dim])
        g = np.tanh(a[2 * h_dim : 3 * h_dim])
        o = _sigmoid(a[3 * h_dim :])
        c_prev = f * c_prev + i * g
        h_prev = o * np.tanh(c_prev)
        gates[t, :h_dim] = i
        gates[t, h_dim : 2 * h_dim] = f
        gates[t, 2 * h_dim : 3 * h_dim] = g
        gates[t, 3 * h_dim :] = o
        c[t] = c_prev
        h[t] = h_prev
    return h, c, gates


def lstm_backward(dh_out: np.ndarray, wh: np.ndarray, h: np.ndarray, c: np.ndarray, gates: np.ndarray):
    """Backprop through :func:`lstm_forward`. Returns (dxp, dwh)."""
    t_len, h_dim = h.shape
    dxp = np.zeros((t_len, 4 * h_dim))
    dwh = np.zeros_like(wh)
    dh_rec = np.zeros(h_dim)
    dc_next = np.zeros(h_dim)
    for t in range(t_len - 1, -1, -1):
        i = gates[t, :h_dim]
        f = gates[t, h_dim : 2 * h_dim]
        g = gates[t, 2 * h_dim : 3 * h_dim]
        o = gates[t, 3 * h_dim :]
        tc = np.tanh(c[t])
        dh = dh_out[t] + dh_rec
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        c_prev = c[t - 1] if t > 0 else np.zeros(h_dim)
        df = dc * c_prev
        dc_next = dc * f
        da = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)]
        )
        dxp[t] = da
        dh_rec = da @ wh.T
        if t > 0:
            dwh += np.outer(h[t - 1], da)
    return dxp, dwh


def ctc_forward_backward(logp: np.ndarray, ext: np.ndarray):
    """Log-space alpha/beta over the blank-expanded label sequence.

    Returns (log-likelihood, gamma) where gamma[t, v] is the posterior label
    occupancy; gamma is all-zero when every path has zero probability.
    """
    t_len, n_vocab = logp.shape
    ext = np.asarray(ext, dtype=np.int64)
    s_len = ext.shape[0]

    can_skip = np.zeros(s_len, dtype=bool)
    if s_len > 2:
        can_skip[2:] = (ext[2:] != 0) & (ext[2:] != ext[:-2])

    alpha = np.full((t_len, s_len), NEG_INF)
    alpha[0, 0] = logp[0, ext[0]]
    if s_len > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, t_len):
        prev = alpha[t - 1]
        shifted1 = np.concatenate([[NEG_INF], prev[:-1]])
        shifted2 = np.concatenate([[NEG_INF, NEG_INF], prev[:-2]])
        acc = np.logaddexp(prev, shifted1)
        acc = np.where(can_skip, np.logaddexp(acc, shifted2), acc)
        alpha[t] = acc + logp[t, ext]

    ll = alpha[t_len - 1, s_len - 1]
    if s_len > 1:
        ll = np.logaddexp(ll, alpha[t_len - 1, s_len - 2])
    gamma = np.zeros((t_len, n_vocab))
    if ll == NEG_INF:
        return NEG_INF, gamma

    beta = np.full((t_len, s_len), NEG_INF)
    beta[t_len - 1, s_len - 1] = 0.0
    if s_len > 1:
        beta[t_len - 1, s_len - 2] = 0.0
    for t in range(t_len - 2, -1, -1):
        nxt = beta[t + 1] + logp[t + 1, ext]
        shifted1 = np.concatenate([nxt[1:], [NEG_INF]])
        shifted2 = np.concatenate([nxt[2:], [NEG_INF, NEG_INF]])
        skip_in = np.concatenate([can_skip[2:], [False, False]])
        acc = np.logaddexp(nxt, shifted1)
        acc = np.where(skip_in, np.logaddexp(acc, shifted2), acc)
        beta[t] = acc

    post = alpha + beta - ll
    occ = np.exp(np.where(np.isfinite(post), post, NEG_INF))
    for t in range(t_len):
        np.add.at(gamma[t], ext, occ[t])
    return float(ll), gamma
