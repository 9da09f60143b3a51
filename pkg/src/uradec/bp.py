"""Classical multiuser decoders over the evidence matrix: non-binary BP, SIC and Top-J."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .gfq import GfContext
from .ldpc import ParityCheckMatrix, syndrome

BACKENDS = ("direct", "wht")


@dataclass(frozen=True)
class BpConfig:
    max_iters: int = 50
    backend: str = "wht"
    message_floor: float = 1e-30
    early_exit: bool = True
    kernels: str | None = None  # "cython", "python" or None for the active build

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.message_floor > 0:
            raise ValueError("message_floor must be positive")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")


@dataclass
class BpResult:
    hard: np.ndarray  # (L,)
    marginals: np.ndarray  # (L, Q)
    converged: bool
    iters: int
    seconds: float


def slot_beliefs(S) -> np.ndarray:
    """Per-slot softmax of the evidence rows."""
    S = np.asarray(S, dtype=np.float64)
    if not np.all(np.isfinite(S)):
        raise ValueError("evidence must be finite")
    z = np.exp(S - S.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def _pow2(Q):
    if Q < 1 or Q & (Q - 1):
        raise ValueError(f"length {Q} is not a power of two")


def wht(v):
    v = np.asarray(v, dtype=np.float64)
    _pow2(v.shape[-1])
    return kernels.wht(v)


def iwht(v):
    v = np.asarray(v, dtype=np.float64)
    return wht(v) / v.shape[-1]


def xor_convolve(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("xor_convolve expects two vectors of equal length")
    return kernels.xor_conv(u, v)


def _check_update(ctx: GfContext, incoming, coeffs, target_coeff, use_wht):
    incoming = np.atleast_2d(np.asarray(incoming, dtype=np.float64))
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=np.int64))
    if len(coeffs) != len(incoming):
        raise ValueError("one coefficient per incoming message")
    if np.any(coeffs == 0) or target_coeff == 0:
        raise ValueError("check coefficients must be nonzero")
    Q = ctx.Q
    # y[alpha * b] = m[b], so the constraint becomes a plain XOR sum
    y = np.zeros_like(incoming)
    for i, a in enumerate(coeffs):
        y[i, ctx.mul_table[a]] = incoming[i]
    if use_wht:
        s = iwht(np.prod(wht(y), axis=0))
    else:
        s = np.zeros(Q)
        s[0] = 1.0
        for row in y:
            s = xor_convolve(s, row)
    out = s[ctx.mul_table[target_coeff]]
    if use_wht:
        out = np.maximum(out, 0.0)
    return out / out.sum()


def check_update_direct(ctx: GfContext, incoming, coeffs, target_coeff):
    """Message from a check to the slot with coefficient ``target_coeff``.

    ``incoming`` holds the messages of the other neighbours (one row each)
    with their coefficients; the check reads sum_i coeffs[i] c_i = 0.
    """
    return _check_update(ctx, incoming, coeffs, target_coeff, False)


def check_update_wht(ctx: GfContext, incoming, coeffs, target_coeff):
    return _check_update(ctx, incoming, coeffs, target_coeff, True)


def bp_decode(lam, H: ParityCheckMatrix, cfg: BpConfig = BpConfig()) -> BpResult:
    """Flooding-schedule sum-product decoding from slot beliefs ``lam`` (L, Q)."""
    t0 = time.perf_counter()
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    if lam.shape != (H.L, H.Q):
        raise ValueError(f"beliefs have shape {lam.shape}, expected {(H.L, H.Q)}")
    kern = kernels.get(cfg.kernels)
    g = H.tanner
    marg, hard, iters, zero = kern.bp_loop(
        lam, g.check_ptr, g.perm, g.invperm, g.var_ptr, g.var_edges, g.var,
        cfg.backend == "wht", cfg.message_floor, cfg.max_iters, cfg.early_exit)
    return BpResult(np.asarray(hard, dtype=np.int64), marg, bool(zero), int(iters),
                    time.perf_counter() - t0)


SIC_CANCEL = ("floor", "retry")


def _retry_stage(S, resid, H, cfg, rows):
    """Stage rescue after a non-converged decode: un-floor one slot at a time.

    A row that collides with an earlier row at slot l lost its own symbol to
    the flooring there, which leaves slot l with a weak residual maximum.
    Slots are tried weakest first; the first restoration that converges to a
    codeword not yet emitted wins. None when none does.
    """
    for l in np.argsort(resid.max(axis=1), kind="stable"):
        trial = resid.copy()
        trial[l] = S[l]
        res = bp_decode(slot_beliefs(trial), H, cfg)
        if res.converged and not any(np.array_equal(res.hard, r) for r in rows):
            return res
    return None


def sic_decode(S, H: ParityCheckMatrix, K: int, cfg: BpConfig = BpConfig(),
               evidence_floor: float = -40.0, cancel: str = "floor",
               return_results: bool = False):
    """Decode K rows in succession, flooring each decoded symbol's evidence before the next stage.

    ``cancel="retry"`` additionally rescues a non-converged stage by
    restoring one slot's evidence at a time (symbol collisions with an
    earlier row); the default is plain flooring.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if cancel not in SIC_CANCEL:
        raise ValueError(f"cancel must be one of {SIC_CANCEL}, got {cancel!r}")
    S = np.asarray(S, dtype=np.float64)
    resid = S.copy()
    slots = np.arange(H.L)
    rows, results = [], []
    for _ in range(K):
        res = bp_decode(slot_beliefs(resid), H, cfg)
        if cancel == "retry" and rows and not res.converged:
            res = _retry_stage(S, resid, H, cfg, rows) or res
        rows.append(res.hard)
        results.append(res)
        resid[slots, res.hard] = evidence_floor
    grid = np.stack(rows)
    return (grid, results) if return_results else grid


class TopJBudgetError(RuntimeError):
    def __init__(self, J: int, L: int, budget: int):
        self.candidates = J ** L
        self.budget = budget
        super().__init__(f"Top-{J} would enumerate {J}^{L} = {self.candidates:.3g} sequences "
                         f"(budget {budget:.3g}); refusing")


def topj_decode(S, H: ParityCheckMatrix, K: int, J: int, budget: int = 1 << 22,
                chunk: int = 1 << 16) -> np.ndarray:
    """Best K parity-valid sequences among the per-slot top-J candidates.

    Rows are ranked by (valid first, total evidence descending, symbols
    lexicographically); invalid sequences pad the output when fewer than K
    are valid.
    """
    S = np.asarray(S, dtype=np.float64)
    L, Q = S.shape
    if not 1 <= J <= Q:
        raise ValueError(f"J must lie in [1, {Q}]")
    if K < 1:
        raise ValueError("K must be >= 1")
    if J ** L > budget:
        raise TopJBudgetError(J, L, budget)
    top = np.argsort(-S, axis=1, kind="stable")[:, :J]  # (L, J)
    slots = np.arange(L)
    weights = J ** np.arange(L - 1, -1, -1, dtype=np.int64)
    n = J ** L
    best = None
    for lo in range(0, n, chunk):
        idx = np.arange(lo, min(n, lo + chunk), dtype=np.int64)
        digits = (idx[:, None] // weights[None, :]) % J
        cand = top[slots, digits]
        pool = cand if best is None else np.vstack([best, cand])
        valid = ~np.any(syndrome(H, pool), axis=1)
        score = S[slots, pool].sum(axis=1)
        keys = [pool[:, l] for l in range(L - 1, -1, -1)] + [-score, ~valid]
        order = np.lexsort(keys)[:K]
        best = pool[order]
    if len(best) < K:  # fewer than K sequences exist at all (J^L < K): repeat the best one
        best = np.vstack([best, np.repeat(best[:1], K - len(best), axis=0)])
    return best
