"""Pure numpy message-passing kernels (reference path and fallback)."""

import numpy as np

NAME = "python"


def wht(v):
    """Unnormalized fast Walsh-Hadamard transform along the last axis."""
    v = np.array(v, dtype=np.float64, copy=True)
    Q = v.shape[-1]
    lead = v.shape[:-1]
    h = 1
    while h < Q:
        v = v.reshape(lead + (Q // (2 * h), 2, h))
        a = v[..., 0, :]
        b = v[..., 1, :]
        v = np.stack((a + b, a - b), axis=-2)
        h *= 2
    return v.reshape(lead + (Q,))


def _xor_index(Q):
    idx = np.arange(Q)
    return (idx[:, None] ^ idx[None, :]).ravel()


_XOR_CACHE: dict[int, np.ndarray] = {}


def xor_conv(u, v):
    """(u * v)[s] = sum_{x ^ y = s} u[x] v[y]."""
    Q = len(u)
    idx = _XOR_CACHE.get(Q)
    if idx is None:
        idx = _XOR_CACHE[Q] = _xor_index(Q)
    return np.bincount(idx, weights=np.outer(u, v).ravel(), minlength=Q)


def _normalize(x):
    s = x.sum()
    if s > 0 and np.isfinite(s):
        return x / s
    return np.full_like(x, 1.0 / len(x))


def _extrinsic_sums(y, use_wht):
    """For each i, the XOR-convolution of all rows of y except row i."""
    d, Q = y.shape
    delta = np.zeros(Q)
    delta[0] = 1.0
    if use_wht:
        F = wht(y)
        pre = np.ones((d + 1, Q))
        suf = np.ones((d + 1, Q))
        for i in range(d):
            pre[i + 1] = pre[i] * F[i]
        for i in range(d - 1, -1, -1):
            suf[i] = suf[i + 1] * F[i]
        return wht(pre[:d] * suf[1:]) / Q
    # None stands for the convolution identity (delta at 0)
    def conv(a, b):
        if a is None:
            return b
        if b is None:
            return a
        return xor_conv(a, b)

    pre = [None]
    for i in range(d - 1):
        pre.append(conv(pre[-1], y[i]))
    suf = [None] * (d + 1)
    for i in range(d - 1, 0, -1):
        suf[i] = conv(y[i], suf[i + 1])
    out = np.empty((d, Q))
    for i in range(d):
        s = conv(pre[i], suf[i + 1])
        out[i] = delta if s is None else s
    return out


def check_phase(v2c, check_ptr, perm, invperm, use_wht):
    E, Q = v2c.shape
    out = np.empty_like(v2c)
    rows = np.arange(E)[:, None]
    y_all = v2c[rows, invperm]  # coefficient-normalized: y[alpha * a] = v2c[a]
    if use_wht:
        # transforms batched over every edge; only the products are per check
        F = wht(y_all)
        ext = np.empty_like(F)
        for j in range(len(check_ptr) - 1):
            lo, hi = check_ptr[j], check_ptr[j + 1]
            if hi == lo:
                continue
            f = F[lo:hi]
            pre = np.cumprod(np.vstack([np.ones(Q), f[:-1]]), axis=0)
            suf = np.cumprod(np.vstack([np.ones(Q), f[:0:-1]]), axis=0)[::-1]
            ext[lo:hi] = pre * suf
        s = np.maximum(wht(ext)[rows, perm] / Q, 0.0)
        for e in range(E):
            out[e] = _normalize(s[e])
        return out
    for j in range(len(check_ptr) - 1):
        lo, hi = check_ptr[j], check_ptr[j + 1]
        if hi == lo:
            continue
        s = _extrinsic_sums(y_all[lo:hi], use_wht)
        for i, e in enumerate(range(lo, hi)):
            out[e] = _normalize(s[i][perm[e]])
    return out


def _finish(x, floor):
    x = _normalize(x)
    x = np.maximum(x, floor)
    return x / x.sum()


def var_phase(lam, c2v, var_ptr, var_edges, floor):
    L, Q = lam.shape
    v2c = np.empty_like(c2v)
    marg = np.empty_like(lam)
    for l in range(L):
        edges = var_edges[var_ptr[l]:var_ptr[l + 1]]
        w = len(edges)
        pre = [lam[l]]
        for e in edges:
            pre.append(pre[-1] * c2v[e])
        marg[l] = _finish(pre[-1], floor)
        suf = np.ones(Q)
        for i in range(w - 1, -1, -1):
            v2c[edges[i]] = _finish(pre[i] * suf, floor)
            suf = suf * c2v[edges[i]]
    return v2c, marg


def bp_loop(lam, check_ptr, perm, invperm, var_ptr, var_edges, edge_var, use_wht, floor,
            max_iters, early_exit):
    """Full flooding loop; returns (marginals, hard, iterations, syndrome_zero)."""
    E = len(edge_var)
    P = len(check_ptr) - 1
    starts = check_ptr[:-1][np.diff(check_ptr) > 0]
    v2c = np.ascontiguousarray(lam[edge_var])
    marg, hard, zero, it = None, None, False, 0
    for it in range(1, max_iters + 1):
        c2v = check_phase(v2c, check_ptr, perm, invperm, use_wht)
        v2c, marg = var_phase(lam, c2v, var_ptr, var_edges, floor)
        hard = np.argmax(marg, axis=1)
        zero = True
        if E and P:
            terms = perm[np.arange(E), hard[edge_var]]
            zero = not np.any(np.bitwise_xor.reduceat(terms, starts))
        if early_exit and zero:
            break
    return marg, hard.astype(np.int64), it, zero
