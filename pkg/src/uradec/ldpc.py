"""Q-ary LDPC codes: random construction, syndromes, systematic encoding."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .gfq import GfContext, gf_rank, row_reduce


class CodeConstructionError(RuntimeError):
    pass


class ParityFileError(ValueError):
    pass


@dataclass(frozen=True)
class TannerGraph:
    """Edge-list view of H used by the message-passing kernels.

    Edges are sorted by (check, slot). ``check_ptr[j]:check_ptr[j+1]`` indexes
    the edges of check ``j``; ``var_edges[var_ptr[l]:var_ptr[l+1]]`` the edges
    of slot ``l`` in increasing check order.
    """

    check: np.ndarray
    var: np.ndarray
    coef: np.ndarray
    check_ptr: np.ndarray
    var_ptr: np.ndarray
    var_edges: np.ndarray
    perm: np.ndarray  # perm[e, a] = coef[e] * a
    invperm: np.ndarray  # invperm[e, perm[e, a]] = a

    @property
    def n_edges(self) -> int:
        return len(self.check)


class ParityCheckMatrix:
    def __init__(self, ctx: GfContext, P: int, L: int, entries, col_weight: int | None = None,
                 seed: int | None = None):
        self.ctx = ctx
        self.P, self.L, self.Q = int(P), int(L), ctx.Q
        self.col_weight = col_weight
        self.seed = seed
        cleaned = sorted((int(j), int(l), int(a)) for j, l, a in entries)
        seen = set()
        for j, l, a in cleaned:
            if not (0 <= j < self.P and 0 <= l < self.L):
                raise ParityFileError(f"entry ({j}, {l}) outside a {self.P}x{self.L} matrix")
            if not 0 < a < self.Q:
                raise ParityFileError(f"entry ({j}, {l}) has coefficient {a} outside GF({self.Q})^x")
            if (j, l) in seen:
                raise ParityFileError(f"duplicate entry ({j}, {l})")
            seen.add((j, l))
        self.entries = tuple(cleaned)
        self.nvar = [[] for _ in range(self.P)]
        self.nchk = [[] for _ in range(self.L)]
        for j, l, _ in self.entries:
            self.nvar[j].append(l)
            self.nchk[l].append(j)

    def __repr__(self):
        return f"ParityCheckMatrix(P={self.P}, L={self.L}, Q={self.Q}, edges={len(self.entries)})"

    def __eq__(self, other):
        return (isinstance(other, ParityCheckMatrix) and self.entries == other.entries
                and (self.P, self.L, self.Q) == (other.P, other.L, other.Q))

    def __hash__(self):
        return hash((self.P, self.L, self.Q, self.entries))

    @property
    def n_edges(self) -> int:
        return len(self.entries)

    def dense(self) -> np.ndarray:
        H = np.zeros((self.P, self.L), dtype=np.int64)
        for j, l, a in self.entries:
            H[j, l] = a
        return H

    @cached_property
    def tanner(self) -> TannerGraph:
        E = len(self.entries)
        arr = np.array(self.entries, dtype=np.int64).reshape(E, 3)
        check, var, coef = arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy()
        check_ptr = np.zeros(self.P + 1, dtype=np.int64)
        np.add.at(check_ptr, check + 1, 1)
        check_ptr = np.cumsum(check_ptr)
        var_edges = np.lexsort((check, var)).astype(np.int64)
        var_ptr = np.zeros(self.L + 1, dtype=np.int64)
        np.add.at(var_ptr, var + 1, 1)
        var_ptr = np.cumsum(var_ptr)
        perm = self.ctx.mul_table[coef] if E else np.zeros((0, self.Q), dtype=np.int64)
        invperm = np.empty_like(perm)
        rows = np.arange(E)[:, None]
        invperm[rows, perm] = np.arange(self.Q)[None, :]
        g = TannerGraph(check, var, coef, check_ptr, var_ptr, var_edges,
                        np.ascontiguousarray(perm), np.ascontiguousarray(invperm))
        for a in (g.check, g.var, g.coef, g.check_ptr, g.var_ptr, g.var_edges, g.perm, g.invperm):
            a.setflags(write=False)
        return g

    def rank(self) -> int:
        return gf_rank(self.ctx, self.dense())


def syndrome(H: ParityCheckMatrix, c) -> np.ndarray:
    """H c over GF(Q). ``c`` may be a single word (L,) or a batch (..., L)."""
    c = np.asarray(c, dtype=np.int64)
    if c.shape[-1] != H.L:
        raise ValueError(f"word length {c.shape[-1]} does not match L={H.L}")
    g = H.tanner
    out = np.zeros(c.shape[:-1] + (H.P,), dtype=np.int64)
    terms = H.ctx.mul_table[g.coef, c[..., g.var]]
    for e in range(g.n_edges):
        out[..., g.check[e]] ^= terms[..., e]
    return out


def is_codeword(H: ParityCheckMatrix, c) -> np.ndarray | bool:
    s = syndrome(H, c)
    return ~np.any(s, axis=-1)


def build_random_ldpc(ctx: GfContext, L: int, P: int, col_weight: int = 3, rng=None,
                      max_retries: int = 64, seed: int | None = None) -> ParityCheckMatrix:
    """Column-regular random LDPC code with balanced check degrees and full row rank.

    Each slot joins ``col_weight`` distinct checks, picked among the currently
    least-loaded checks so check degrees never differ by more than one; ties
    prefer checks that do not close a length-4 cycle, then a random order.
    Coefficients are uniform on the nonzero elements.
    """
    if not 0 < P < L:
        raise ValueError(f"need 0 < P < L, got P={P}, L={L}")
    if col_weight < 2 or col_weight > P or col_weight * L < P:
        raise ValueError(f"infeasible column weight {col_weight} for L={L}, P={P}")
    rng = np.random.default_rng(rng)
    for _ in range(max_retries):
        entries = _sample_pattern(ctx, L, P, col_weight, rng)
        H = ParityCheckMatrix(ctx, P, L, entries, col_weight=col_weight, seed=seed)
        if H.rank() == P:
            return H
    raise CodeConstructionError(f"no full-rank {P}x{L} matrix after {max_retries} attempts")


def _sample_pattern(ctx, L, P, col_weight, rng):
    degree = np.zeros(P, dtype=np.int64)
    members = [set() for _ in range(P)]
    entries = []
    for l in rng.permutation(L):
        chosen: list[int] = []
        for _ in range(col_weight):
            best = None
            for j in rng.permutation(P):
                if j in chosen:
                    continue
                # slots already sharing a chosen check with l would form a 4-cycle through j
                overlap = sum(len(members[j] & members[c]) for c in chosen)
                key = (degree[j], overlap)
                if best is None or key < best[0]:
                    best = (key, j)
            j = int(best[1])
            chosen.append(j)
        for j in chosen:
            degree[j] += 1
            members[j].add(int(l))
            entries.append((j, int(l), int(rng.integers(1, ctx.Q))))
    return entries


@dataclass(frozen=True)
class GeneratorForm:
    ctx: GfContext
    rank: int
    info_positions: np.ndarray
    parity_positions: np.ndarray
    parity_map: np.ndarray  # parity_map[r, i]: coefficient of info symbol i in parity symbol r
    L: int

    @property
    def n_info(self) -> int:
        return len(self.info_positions)

    @property
    def size(self) -> int:
        return self.ctx.Q ** self.n_info

    def encode(self, info) -> np.ndarray:
        u = np.asarray(info, dtype=np.int64)
        if u.shape[-1] != self.n_info:
            raise ValueError(f"info length {u.shape[-1]} != {self.n_info}")
        out = np.zeros(u.shape[:-1] + (self.L,), dtype=np.int64)
        out[..., self.info_positions] = u
        mul = self.ctx.mul_table
        for r, p in enumerate(self.parity_positions):
            acc = np.zeros(u.shape[:-1], dtype=np.int64)
            for i in range(self.n_info):
                if self.parity_map[r, i]:
                    acc ^= mul[self.parity_map[r, i], u[..., i]]
            out[..., p] = acc
        return out


def derive_generator(H: ParityCheckMatrix) -> GeneratorForm:
    R, pivots = row_reduce(H.ctx, H.dense())
    if len(pivots) < H.P:
        raise CodeConstructionError(f"H has rank {len(pivots)} < P={H.P}")
    info = np.array([c for c in range(H.L) if c not in set(pivots)], dtype=np.int64)
    # Row r of the RREF reads c_{pivot_r} + sum_i R[r, info_i] c_{info_i} = 0; char 2 drops the sign.
    pmap = R[: len(pivots)][:, info]
    return GeneratorForm(H.ctx, len(pivots), info, np.array(pivots, dtype=np.int64), pmap, H.L)


def draw_distinct_info(gen: GeneratorForm, K: int, rng) -> tuple[np.ndarray, int]:
    """K distinct uniform info vectors; also returns how many draws were rejected as duplicates."""
    if K > gen.size:
        raise ValueError(f"cannot draw {K} distinct codewords from a codebook of size {gen.size}")
    rng = np.random.default_rng(rng)
    rows: list[tuple] = []
    seen = set()
    rejected = 0
    while len(rows) < K:
        u = tuple(int(x) for x in rng.integers(0, gen.ctx.Q, size=gen.n_info))
        if u in seen:
            rejected += 1
            continue
        seen.add(u)
        rows.append(u)
    return np.array(rows, dtype=np.int64).reshape(K, gen.n_info), rejected


def sample_codewords(gen: GeneratorForm, K: int, rng) -> np.ndarray:
    info, _ = draw_distinct_info(gen, K, rng)
    return gen.encode(info)


def save_parity_file(H: ParityCheckMatrix, path) -> None:
    lines = [f"{H.P} {H.L} {H.Q} {H.col_weight if H.col_weight is not None else 0} "
             f"{H.ctx.prim_poly} {H.seed if H.seed is not None else -1}"]
    lines += [f"{j} {l} {a}" for j, l, a in H.entries]
    Path(path).write_text("\n".join(lines) + "\n")


def load_parity_file(path) -> ParityCheckMatrix:
    text = Path(path).read_text().split("\n")
    rows = [ln.split() for ln in text if ln.strip()]
    if not rows or len(rows[0]) != 6:
        raise ParityFileError(f"{path}: header must be 'P L Q col_weight prim_poly seed'")
    try:
        P, L, Q, w, poly, seed = (int(x) for x in rows[0])
        body = [tuple(int(x) for x in r) for r in rows[1:]]
    except ValueError as exc:
        raise ParityFileError(f"{path}: non-integer field") from exc
    if any(len(r) != 3 for r in body):
        raise ParityFileError(f"{path}: entry lines must be 'j l alpha'")
    m = Q.bit_length() - 1
    if Q != 1 << m:
        raise ParityFileError(f"{path}: Q={Q} is not a power of two")
    ctx = GfContext(m, poly)
    return ParityCheckMatrix(ctx, P, L, body, col_weight=w or None, seed=None if seed < 0 else seed)
