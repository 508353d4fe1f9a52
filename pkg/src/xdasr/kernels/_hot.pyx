# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: LSTM recurrence (forward/backward) and CTC alpha/beta.

Same contracts as the pure backend in `_ref.py`."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, expm1, fabs, log, log1p, tanh, INFINITY

NAME = "compiled"


cdef inline double _sigmoid(double x) nogil:
    if x < -60.0:
        x = -60.0
    elif x > 60.0:
        x = 60.0
    return 1.0 / (1.0 + exp(-x))


cdef inline double _logadd(double a, double b) nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


cdef void _lstm_forward(double[:, ::1] xp, double[:, ::1] wh,
                        double[:, ::1] h, double[:, ::1] c,
                        double[:, ::1] gates, double[::1] a) nogil:
    cdef Py_ssize_t t_len = xp.shape[0]
    cdef Py_ssize_t four_h = xp.shape[1]
    cdef Py_ssize_t h_dim = four_h // 4
    cdef Py_ssize_t t, j, k
    cdef double hv, iv, fv, gv, ov, cv
    for t in range(t_len):
        for k in range(four_h):
            a[k] = xp[t, k]
        if t > 0:
            for j in range(h_dim):
                hv = h[t - 1, j]
                if hv != 0.0:
                    for k in range(four_h):
                        a[k] += hv * wh[j, k]
        for j in range(h_dim):
            iv = _sigmoid(a[j])
            fv = _sigmoid(a[h_dim + j])
            gv = tanh(a[2 * h_dim + j])
            ov = _sigmoid(a[3 * h_dim + j])
            if t > 0:
                cv = fv * c[t - 1, j] + iv * gv
            else:
                cv = iv * gv
            gates[t, j] = iv
            gates[t, h_dim + j] = fv
            gates[t, 2 * h_dim + j] = gv
            gates[t, 3 * h_dim + j] = ov
            c[t, j] = cv
            h[t, j] = ov * tanh(cv)


def lstm_forward(double[:, ::1] xp, double[:, ::1] wh):
    cdef Py_ssize_t t_len = xp.shape[0]
    cdef Py_ssize_t four_h = xp.shape[1]
    cdef Py_ssize_t h_dim = four_h // 4
    h = np.zeros((t_len, h_dim))
    c = np.zeros((t_len, h_dim))
    gates = np.zeros((t_len, four_h))
    a = np.zeros(four_h)
    cdef double[:, ::1] h_v = h
    cdef double[:, ::1] c_v = c
    cdef double[:, ::1] g_v = gates
    cdef double[::1] a_v = a
    with nogil:
        _lstm_forward(xp, wh, h_v, c_v, g_v, a_v)
    return h, c, gates


cdef void _lstm_backward(double[:, ::1] dh_out, double[:, ::1] wh,
                         double[:, ::1] h, double[:, ::1] c,
                         double[:, ::1] gates, double[:, ::1] dxp,
                         double[:, ::1] dwh, double[::1] dh_rec,
                         double[::1] dc_next, double[::1] da) nogil:
    cdef Py_ssize_t t_len = h.shape[0]
    cdef Py_ssize_t h_dim = h.shape[1]
    cdef Py_ssize_t four_h = 4 * h_dim
    cdef Py_ssize_t t, j, k
    cdef double iv, fv, gv, ov, tc, dh, do, dc, di, dg, df, cp, hv
    for j in range(h_dim):
        dh_rec[j] = 0.0
        dc_next[j] = 0.0
    for t in range(t_len - 1, -1, -1):
        for j in range(h_dim):
            iv = gates[t, j]
            fv = gates[t, h_dim + j]
            gv = gates[t, 2 * h_dim + j]
            ov = gates[t, 3 * h_dim + j]
            tc = tanh(c[t, j])
            dh = dh_out[t, j] + dh_rec[j]
            do = dh * tc
            dc = dc_next[j] + dh * ov * (1.0 - tc * tc)
            di = dc * gv
            dg = dc * iv
            if t > 0:
                cp = c[t - 1, j]
            else:
                cp = 0.0
            df = dc * cp
            dc_next[j] = dc * fv
            da[j] = di * iv * (1.0 - iv)
            da[h_dim + j] = df * fv * (1.0 - fv)
            da[2 * h_dim + j] = dg * (1.0 - gv * gv)
            da[3 * h_dim + j] = do * ov * (1.0 - ov)
        for k in range(four_h):
            dxp[t, k] = da[k]
        for j in range(h_dim):
            dh = 0.0
            for k in range(four_h):
                dh += da[k] * wh[j, k]
            dh_rec[j] = dh
        if t > 0:
            for j in range(h_dim):
                hv = h[t - 1, j]
                if hv != 0.0:
                    for k in range(four_h):
                        dwh[j, k] += hv * da[k]


def lstm_backward(double[:, ::1] dh_out, double[:, ::1] wh, double[:, ::1] h,
                  double[:, ::1] c, double[:, ::1] gates):
    cdef Py_ssize_t t_len = h.shape[0]
    cdef Py_ssize_t h_dim = h.shape[1]
    dxp = np.zeros((t_len, 4 * h_dim))
    dwh = np.zeros((h_dim, 4 * h_dim))
    dh_rec = np.zeros(h_dim)
    dc_next = np.zeros(h_dim)
    da = np.zeros(4 * h_dim)
    cdef double[:, ::1] dxp_v = dxp
    cdef double[:, ::1] dwh_v = dwh
    cdef double[::1] r_v = dh_rec
    cdef double[::1] n_v = dc_next
    cdef double[::1] a_v = da
    with nogil:
        _lstm_backward(dh_out, wh, h, c, gates, dxp_v, dwh_v, r_v, n_v, a_v)
    return dxp, dwh


cdef double _ctc_pass(double[:, ::1] logp, long[::1] ext, unsigned char[::1] can_skip,
                      double[:, ::1] alpha, double[:, ::1] beta,
                      double[:, ::1] gamma) nogil:
    cdef Py_ssize_t t_len = logp.shape[0]
    cdef Py_ssize_t s_len = ext.shape[0]
    cdef Py_ssize_t t, s
    cdef double acc, ll, post

    for s in range(s_len):
        alpha[0, s] = -INFINITY
    alpha[0, 0] = logp[0, ext[0]]
    if s_len > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, t_len):
        for s in range(s_len):
            acc = alpha[t - 1, s]
            if s >= 1:
                acc = _logadd(acc, alpha[t - 1, s - 1])
            if s >= 2 and can_skip[s]:
                acc = _logadd(acc, alpha[t - 1, s - 2])
            alpha[t, s] = acc + logp[t, ext[s]]

    ll = alpha[t_len - 1, s_len - 1]
    if s_len > 1:
        ll = _logadd(ll, alpha[t_len - 1, s_len - 2])
    if ll == -INFINITY:
        return ll

    for s in range(s_len):
        beta[t_len - 1, s] = -INFINITY
    beta[t_len - 1, s_len - 1] = 0.0
    if s_len > 1:
        beta[t_len - 1, s_len - 2] = 0.0
    for t in range(t_len - 2, -1, -1):
        for s in range(s_len):
            acc = beta[t + 1, s] + logp[t + 1, ext[s]]
            if s + 1 < s_len:
                acc = _logadd(acc, beta[t + 1, s + 1] + logp[t + 1, ext[s + 1]])
            if s + 2 < s_len and can_skip[s + 2]:
                acc = _logadd(acc, beta[t + 1, s + 2] + logp[t + 1, ext[s + 2]])
            beta[t, s] = acc

    for t in range(t_len):
        for s in range(s_len):
            post = alpha[t, s] + beta[t, s] - ll
            if post > -INFINITY:
                gamma[t, ext[s]] += exp(post)
    return ll


def ctc_forward_backward(double[:, ::1] logp, ext):
    cdef cnp.ndarray[long, ndim=1] ext_arr = np.ascontiguousarray(ext, dtype=np.int64)
    cdef Py_ssize_t t_len = logp.shape[0]
    cdef Py_ssize_t n_vocab = logp.shape[1]
    cdef Py_ssize_t s_len = ext_arr.shape[0]
    can_skip = np.zeros(s_len, dtype=np.uint8)
    if s_len > 2:
        can_skip[2:] = (ext_arr[2:] != 0) & (ext_arr[2:] != ext_arr[:-2])
    alpha = np.empty((t_len, s_len))
    beta = np.empty((t_len, s_len))
    gamma = np.zeros((t_len, n_vocab))
    cdef long[::1] ext_v = ext_arr
    cdef unsigned char[::1] skip_v = can_skip
    cdef double[:, ::1] alpha_v = alpha
    cdef double[:, ::1] beta_v = beta
    cdef double[:, ::1] gamma_v = gamma
    cdef double ll
    with nogil:
        ll = _ctc_pass(logp, ext_v, skip_v, alpha_v, beta_v, gamma_v)
    if ll == -INFINITY:
        return -np.inf, gamma
    return ll, gamma
