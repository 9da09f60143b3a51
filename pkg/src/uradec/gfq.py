"""Arithmetic over GF(2^m) with log/antilog tables.

Symbols are the integers ``0..Q-1``; a symbol's bits are the coefficients of
its polynomial representative, so field addition is XOR.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Conventional primitive polynomials, bit i = coefficient of x^i.
DEFAULT_PRIM_POLY = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,  # x^6 + x + 1
    7: 0b10001001,
    8: 0b100011101,
}


class FieldError(ValueError):
    """Raised for operations outside the field's domain (e.g. inverting 0)."""


def poly_mul_mod(a: int, b: int, prim_poly: int, m: int) -> int:
    """Schoolbook carry-less multiply of two GF(2)[x] polynomials, reduced mod ``prim_poly``."""
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a >> m:
            a ^= prim_poly
    return acc


@dataclass(frozen=True)
class GfContext:
    m: int = 6
    prim_poly: int | None = None
    Q: int = field(init=False)
    log_table: np.ndarray = field(init=False, repr=False)
    antilog_table: np.ndarray = field(init=False, repr=False)
    mul_table: np.ndarray = field(init=False, repr=False)
    inv_table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.m <= 8:
            raise FieldError(f"extension degree must be in 1..8, got {self.m}")
        poly = DEFAULT_PRIM_POLY[self.m] if self.prim_poly is None else int(self.prim_poly)
        if poly >> self.m != 1:
            raise FieldError(f"polynomial {poly:#b} does not have degree {self.m}")
        Q = 1 << self.m
        antilog = np.zeros(Q - 1, dtype=np.int64)
        log = np.full(Q, -1, dtype=np.int64)
        x = 1
        for e in range(Q - 1):
            if log[x] != -1:
                raise FieldError(f"{poly:#b} is not primitive over GF(2)")
            antilog[e] = x
            log[x] = e
            x = poly_mul_mod(x, 2 if Q > 2 else 1, poly, self.m)
        if x != 1:
            raise FieldError(f"{poly:#b} is not primitive over GF(2)")

        nz = np.arange(1, Q)
        mul = np.zeros((Q, Q), dtype=np.int64)
        mul[1:, 1:] = antilog[(log[nz][:, None] + log[nz][None, :]) % (Q - 1)]
        inv = np.zeros(Q, dtype=np.int64)
        inv[1:] = antilog[(-log[nz]) % (Q - 1)]
        for arr in (antilog, log, mul, inv):
            arr.setflags(write=False)

        object.__setattr__(self, "prim_poly", poly)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "log_table", log)
        object.__setattr__(self, "antilog_table", antilog)
        object.__setattr__(self, "mul_table", mul)
        object.__setattr__(self, "inv_table", inv)

    def _check(self, *elems):
        for a in elems:
            if not 0 <= a < self.Q:
                raise FieldError(f"{a} is not an element of GF({self.Q})")

    def add(self, a: int, b: int) -> int:
        self._check(a, b)
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        self._check(a, b)
        if a == 0 or b == 0:
            return 0
        return int(self.antilog_table[(self.log_table[a] + self.log_table[b]) % (self.Q - 1)])

    def inv(self, a: int) -> int:
        self._check(a)
        if a == 0:
            raise FieldError("zero has no multiplicative inverse")
        return int(self.antilog_table[(-self.log_table[a]) % (self.Q - 1)])

    def permutation(self, alpha: int) -> "SymbolPermutation":
        return symbol_permutation(self, alpha)


@dataclass(frozen=True)
class SymbolPermutation:
    """``perm[a] = alpha * a``, the relabelling of symbols induced by a nonzero coefficient."""

    alpha: int
    perm: np.ndarray

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(len(self.perm))
        return inv

    def __matmul__(self, other: "SymbolPermutation") -> np.ndarray:
        # (self o other)[a] = self[other[a]]
        return self.perm[other.perm]


def symbol_permutation(ctx: GfContext, alpha: int) -> SymbolPermutation:
    ctx._check(alpha)
    if alpha == 0:
        raise FieldError("coefficient permutations need a nonzero alpha")
    perm = ctx.mul_table[alpha].copy()
    perm.setflags(write=False)
    return SymbolPermutation(int(alpha), perm)


def gf_rank(ctx: GfContext, M: np.ndarray) -> int:
    """Rank of a dense matrix over the field by Gaussian elimination."""
    return len(row_reduce(ctx, M)[1])


def row_reduce(ctx: GfContext, M: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(Q). Returns (R, pivot_columns)."""
    R = np.array(M, dtype=np.int64, copy=True)
    rows, cols = R.shape
    mul, inv = ctx.mul_table, ctx.inv_table
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(R[r:, c])[0]
        if len(nz) == 0:
            continue
        p = r + nz[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
        R[r] = mul[inv[R[r, c]], R[r]]
        for i in range(rows):
            if i != r and R[i, c]:
                R[i] ^= mul[R[i, c], R[r]]
        pivots.append(c)
        r += 1
    return R, pivots
