"""Structured denoiser forward pass (row demixing + parity-aware propagation) and the oracle stand-in.

A denoiser is any callable ``f(X, S, H, gamma) -> logits`` with X a K x L grid
over [Q] plus MASK (-1), S the L x Q evidence, H the parity-check matrix and
gamma the mask-ratio conditioning value. Logits have shape (K, L, Q).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

from .ldpc import ParityCheckMatrix

MASK = -1


def gelu(x):
    # tanh approximation
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x ** 3)))


@dataclass(frozen=True)
class Dense:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __call__(self, x):
        return x @ self.weight.T + self.bias


@dataclass(frozen=True)
class TwoLayer:
    first: Dense
    second: Dense

    def __call__(self, x):
        return self.second(gelu(self.first(x)))


@dataclass(frozen=True)
class DenoiserParams:
    embed: np.ndarray  # (Q+1, D); row Q is the MASK embedding
    out_proj: np.ndarray  # (Q, D), rows w_a
    sym_embed: np.ndarray  # (Q, D), rows v_a
    tau_demix: float
    gate_a: TwoLayer  # [Z, e] (2D) -> D gate pre-activations
    check_agg: TwoLayer  # D -> D, applied after sum-pooling
    fuse_b: TwoLayer  # [Z~, m] (2D) -> D residual
    evidence_scale: float = 1.0

    def __post_init__(self):
        if not self.tau_demix > 0:
            raise ValueError("tau_demix must be positive")
        for name, arr in self._arrays():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter {name} has non-finite entries")
        Q1, D = self.embed.shape
        if self.out_proj.shape != (Q1 - 1, D) or self.sym_embed.shape != (Q1 - 1, D):
            raise ValueError("embed, out_proj and sym_embed disagree on (Q, D)")

    def _arrays(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                yield f.name, v
            elif isinstance(v, TwoLayer):
                for sub in ("first", "second"):
                    d = getattr(v, sub)
                    yield f"{f.name}.{sub}.weight", d.weight
                    yield f"{f.name}.{sub}.bias", d.bias

    @property
    def Q(self) -> int:
        return self.out_proj.shape[0]

    @property
    def D(self) -> int:
        return self.out_proj.shape[1]

    @classmethod
    def random(cls, Q: int = 64, D: int = 128, seed=0, tau_demix: float = 1.0,
               evidence_scale: float = 1.0) -> "DenoiserParams":
        """Uniform(-1/sqrt(D), 1/sqrt(D)) initialization from a seeded generator."""
        rng = np.random.default_rng(seed)
        a = 1.0 / math.sqrt(D)

        def u(*shape):
            return rng.uniform(-a, a, size=shape)

        def mlp(d_in):
            return TwoLayer(Dense(u(D, d_in), u(D)), Dense(u(D, D), u(D)))

        return cls(embed=u(Q + 1, D), out_proj=u(Q, D), sym_embed=u(Q, D), tau_demix=tau_demix,
                   gate_a=mlp(2 * D), check_agg=mlp(D), fuse_b=mlp(2 * D),
                   evidence_scale=evidence_scale)


def _check_grid(X, Q):
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError("grid must be K x L")
    if not np.issubdtype(X.dtype, np.integer):
        raise ValueError("grid entries must be integers")
    if X.size and (X.min() < MASK or X.max() >= Q):
        raise ValueError(f"grid entries must lie in [0, {Q}) or be MASK")
    return X.astype(np.int64)


def embed_grid(X, params: DenoiserParams) -> np.ndarray:
    X = _check_grid(X, params.Q)
    return params.embed[np.where(X == MASK, params.Q, X)]


def _axis0_sorted_sum(x):
    # summing in sorted order keeps the result independent of the row order
    return np.sort(x, axis=0).sum(axis=0)


def demix_responsibilities(logits_bar, tau: float) -> np.ndarray:
    """Softmax over rows (axis 0) of logits_bar / tau."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    z = np.asarray(logits_bar, dtype=np.float64) / tau
    z = np.exp(z - z.max(axis=0, keepdims=True))
    return z / _axis0_sorted_sum(z)[None]


def evidence_embed(r, S, params: DenoiserParams) -> np.ndarray:
    """e[k, l] = sum_a r[k, l, a] S[l, a] v_a."""
    return np.einsum("kla,la,ad->kld", r, S, params.sym_embed)


def gates(Z, e, params: DenoiserParams) -> np.ndarray:
    return expit(params.gate_a(np.concatenate([Z, e], axis=-1)))


def module_a(Z, S, params: DenoiserParams) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    logits_bar = Z @ params.out_proj.T + params.evidence_scale * S[None]
    r = demix_responsibilities(logits_bar, params.tau_demix)
    e = evidence_embed(r, S, params)
    g = gates(Z, e, params)
    return g * Z + (1.0 - g) * e


def coeff_action(x, alpha: int, params: DenoiserParams, ctx) -> np.ndarray:
    """T_alpha(x) = W^T Pi_alpha W x, with (Pi_alpha y)[alpha * a] = y[a]."""
    if alpha == 0:
        raise ValueError("coefficient must be nonzero")
    W = params.out_proj
    y = np.asarray(x) @ W.T
    inv = np.empty(ctx.Q, dtype=np.int64)
    inv[ctx.mul_table[alpha]] = np.arange(ctx.Q)
    return y[..., inv] @ W


def permutation_matrix(alpha: int, ctx) -> np.ndarray:
    P = np.zeros((ctx.Q, ctx.Q))
    P[ctx.mul_table[alpha], np.arange(ctx.Q)] = 1.0
    return P


def _extrinsic_mask(g) -> np.ndarray:
    same = g.check[:, None] == g.check[None, :]
    np.fill_diagonal(same, False)
    return same.astype(np.float64)


def check_messages(Zt, H: ParityCheckMatrix, params: DenoiserParams) -> np.ndarray:
    """Per-edge extrinsic messages n[k, e] = Psi(sum over the other slots of check(e) of T_alpha Z~)."""
    g = H.tanner
    W = params.out_proj
    y = Zt[:, g.var, :] @ W.T  # (K, E, Q)
    norm = np.take_along_axis(y, np.broadcast_to(g.invperm[None], y.shape), axis=2) @ W
    pooled = np.einsum("ef,kfd->ked", _extrinsic_mask(g), norm)
    return params.check_agg(pooled)


def module_b(Zt, H: ParityCheckMatrix, params: DenoiserParams) -> np.ndarray:
    K, L, D = Zt.shape
    if L != H.L:
        raise ValueError(f"latent grid has L={L}, H has L={H.L}")
    g = H.tanner
    m = np.zeros_like(Zt)
    if g.n_edges:
        n = check_messages(Zt, H, params)
        W = params.out_proj
        y = n @ W.T
        # denormalize with alpha^-1: (Pi_{alpha^-1} y)[a] = y[alpha * a]
        den = np.take_along_axis(y, np.broadcast_to(g.perm[None], y.shape), axis=2) @ W
        np.add.at(m, (slice(None), g.var), den)
    return Zt + params.fuse_b(np.concatenate([Zt, m], axis=-1))


def final_logits(Zh, params: DenoiserParams) -> np.ndarray:
    return Zh @ params.out_proj.T


class StructuredDenoiser:
    """embed -> module A -> module B -> logits. Time-homogeneous: gamma is accepted and ignored."""

    def __init__(self, params: DenoiserParams):
        self.params = params

    def __call__(self, X, S, H: ParityCheckMatrix, gamma: float = 1.0) -> np.ndarray:
        if H.Q != self.params.Q:
            raise ValueError(f"code over GF({H.Q}) but denoiser built for Q={self.params.Q}")
        Z = embed_grid(X, self.params)
        Zt = module_a(Z, S, self.params)
        Zh = module_b(Zt, H, self.params)
        return final_logits(Zh, self.params)


class OracleDenoiser:
    """Test stand-in: +``scale`` at the true symbol of every site, 0 elsewhere."""

    def __init__(self, truth, Q: int, scale: float = 10.0):
        self.truth = np.asarray(truth, dtype=np.int64)
        self.Q = Q
        self.scale = scale

    def __call__(self, X, S, H, gamma: float = 1.0) -> np.ndarray:
        X = _check_grid(X, self.Q)
        if X.shape != self.truth.shape:
            raise ValueError(f"grid shape {X.shape} does not match truth {self.truth.shape}")
        out = np.zeros(self.truth.shape + (self.Q,))
        np.put_along_axis(out, self.truth[..., None], self.scale, axis=-1)
        return out
