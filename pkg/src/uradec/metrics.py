"""Permutation-invariant scoring: Hungarian row matching, SER and CER."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class MatchResult:
    perm: np.ndarray  # perm[k] = truth row matched to predicted row k
    cost: float
    row_costs: np.ndarray

    def __post_init__(self):
        if sorted(self.perm.tolist()) != list(range(len(self.perm))):
            raise ValueError("perm is not a bijection")


def _validate(cost):
    C = np.asarray(cost, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix must be finite")
    if np.any(C < 0):
        raise ValueError("cost matrix must be non-negative")
    return C


def _result(C, perm):
    perm = np.asarray(perm, dtype=np.int64)
    rc = C[np.arange(len(perm)), perm]
    return MatchResult(perm, float(rc.sum()), rc)


def hungarian_match(cost) -> MatchResult:
    """Minimum-cost assignment; among equal-cost optima the lexicographically smallest.

    The optimum value comes from scipy's assignment solver. The tie rule is
    applied greedily: for each row in turn, take the smallest column whose
    forced choice still admits an optimal completion.
    """
    C = _validate(cost)
    K = len(C)
    if K == 0:
        return MatchResult(np.zeros(0, dtype=np.int64), 0.0, np.zeros(0))
    r, c = linear_sum_assignment(C)
    opt = C[r, c].sum()
    tol = 1e-9 * max(1.0, abs(opt))
    perm = np.empty(K, dtype=np.int64)
    rows = list(range(K))
    cols = list(range(K))
    acc = 0.0
    for k in range(K):
        rows.remove(k)
        for j in sorted(cols):
            rest = 0.0
            if rows:
                sub_cols = [x for x in cols if x != j]
                sub = C[np.ix_(rows, sub_cols)]
                rr, cc = linear_sum_assignment(sub)
                rest = sub[rr, cc].sum()
            if acc + C[k, j] + rest <= opt + tol:
                perm[k] = j
                acc += C[k, j]
                cols.remove(j)
                break
    return _result(C, perm)


def brute_force_match(cost) -> MatchResult:
    """Factorial oracle (small K only); itertools order makes ties lexicographic."""
    C = _validate(cost)
    K = len(C)
    if K > 8:
        raise ValueError("brute force is limited to K <= 8")
    best = None
    for p in itertools.permutations(range(K)):
        v = C[np.arange(K), p].sum()
        if best is None or v < best[0]:
            best = (v, p)
    return _result(C, best[1])


def hamming_cost(truth, pred) -> np.ndarray:
    """cost[k, k'] = number of slots where pred row k differs from truth row k'."""
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    return (pred[:, None, :] != truth[None, :, :]).sum(axis=2)


def match_rows(truth, pred, brute_force: bool = False) -> MatchResult:
    """Row matching for scoring: minimum total Hamming distance, then fewest imperfect rows.

    Plain Hamming optima can tie while spreading the errors over a different
    number of rows; the secondary key makes CER independent of row order.
    Costs in the result are Hamming counts.
    """
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 2:
        raise ValueError(f"grids must share a 2-d shape, got {truth.shape} and {pred.shape}")
    C = hamming_cost(truth, pred)
    K = len(C)
    # the secondary term sums to at most K < K + 1, so it never overrides the primary one
    aug = C * (K + 1) + (C > 0)
    m = brute_force_match(aug) if brute_force else hungarian_match(aug)
    return _result(C.astype(np.float64), m.perm)


def ser_cer(truth, pred, brute_force: bool = False) -> tuple[float, float]:
    m = match_rows(truth, pred, brute_force)
    K, L = np.shape(truth)
    if K == 0:
        return 0.0, 0.0
    return float(m.row_costs.sum() / (K * L)), float(np.count_nonzero(m.row_costs) / K)


def dataset_rates(pairs) -> tuple[float, float]:
    """Unweighted means of per-frame SER/CER over (truth, pred) pairs."""
    rates = np.array([ser_cer(t, p) for t, p in pairs], dtype=np.float64).reshape(-1, 2)
    if len(rates) == 0:
        return 0.0, 0.0
    return float(rates[:, 0].mean()), float(rates[:, 1].mean())
