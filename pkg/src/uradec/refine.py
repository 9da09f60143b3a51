"""Masked-refinement decoding engine: cosine reveal schedule, first-reveal anchoring,
temperature annealing and quality-guided remasking with row clamping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .denoiser import MASK


class RefinementError(RuntimeError):
    def __init__(self, step: int, phase: str = "refine"):
        super().__init__(f"denoiser failed at {phase} step {step}")
        self.step = step


@dataclass(frozen=True)
class RevealSchedule:
    T: int
    tau_max: float = 1.0
    tau_min: float = 0.5
    first_reveal: bool = True

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.tau_max >= self.tau_min > 0:
            raise ValueError("need tau_max >= tau_min > 0")


@dataclass(frozen=True)
class RemaskConfig:
    thresholds: tuple = ()

    def __post_init__(self):
        th = tuple(float(x) for x in self.thresholds)
        if any(not 0.0 < x < 1.0 for x in th):
            raise ValueError("thresholds must lie in (0, 1)")
        if any(a <= b for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly descending")
        object.__setattr__(self, "thresholds", th)

    @property
    def stages(self) -> int:
        return len(self.thresholds)


# steps and remask thresholds per user count
PER_K_SCHEDULE = {
    2: (12, ()),
    3: (24, ()),
    4: (42, ()),
    5: (60, ()),
    6: (50, (0.97,)),
    7: (62, (0.96, 0.90)),
    8: (74, (0.96, 0.90, 0.85)),
}

# refinement steps per scale at K=2
PER_SCALE_T = {"tiny": 12, "small": 16, "moderate": 20, "large": 28}


def schedule_for_K(K: int, **kw) -> tuple[RevealSchedule, RemaskConfig]:
    if K not in PER_K_SCHEDULE:
        raise ValueError(f"no preset schedule for K={K}")
    T, th = PER_K_SCHEDULE[K]
    return RevealSchedule(T, **kw), RemaskConfig(th)


def cosine_fraction(t, T: int) -> float:
    """Scheduled revealed fraction after t of T steps."""
    if not 0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    return 0.5 * (1.0 - math.cos(math.pi * t / T))


def mask_ratio(t, T: int) -> float:
    return 1.0 - cosine_fraction(t, T)


def infer_temperature(t: int, T: int, tau_max: float, tau_min: float) -> float:
    if T == 1:
        return tau_min
    w = 0.5 * (1.0 + math.cos(math.pi * (t - 1) / (T - 1)))
    return tau_max * w + tau_min * (1.0 - w)


def reveal_targets(T: int, n_sites: int) -> list[int]:
    """Cumulative revealed counts after steps 1..T, round-half-up of rho(t) * n."""
    out = [int(math.floor(cosine_fraction(t, T) * n_sites + 0.5)) for t in range(1, T + 1)]
    out[-1] = n_sites
    return out


def confidence(logits, tau: float) -> np.ndarray:
    """Max temperature-scaled softmax probability per site."""
    z = np.asarray(logits, dtype=np.float64) / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return 1.0 / e.sum(axis=-1)  # the max entry is exp(0) = 1


def reveal_step(X, logits, target_revealed: int, tau: float, first: bool = False,
                editable=None) -> np.ndarray:
    """Reveal masked sites by confidence; ``editable`` (K x L bool) limits which sites count.

    Non-first steps reveal the most confident masked sites until the number of
    revealed editable sites reaches ``target_revealed`` (ties by row, then
    slot). The first step instead reveals one site per slot. Values are
    argmax of the logits (lowest symbol on ties).
    """
    X = np.array(X, dtype=np.int64, copy=True)
    K, L = X.shape
    if editable is None:
        editable = np.ones((K, L), dtype=bool)
    masked = (X == MASK) & editable
    kappa = confidence(logits, tau)
    values = np.argmax(logits, axis=-1)
    if first:
        score = np.where(masked, kappa, -np.inf)
        rows = np.argmax(score, axis=0)
        for l in range(L):
            if masked[rows[l], l]:
                X[rows[l], l] = values[rows[l], l]
        return X
    revealed = int(np.count_nonzero(editable & (X != MASK)))
    need = target_revealed - revealed
    if need <= 0:
        return X
    r, s = np.nonzero(masked)
    order = np.lexsort((s, r, -kappa[r, s]))[:need]
    X[r[order], s[order]] = values[r[order], s[order]]
    return X


@dataclass
class RefinementTrace:
    reveal_counts: list = field(default_factory=list)  # sites revealed at each step
    temperatures: list = field(default_factory=list)
    final_logits: np.ndarray | None = None
    passes: list = field(default_factory=list)  # remask passes: dicts with threshold, k_low, T_rm


def _call(denoiser, X, S, H, gamma, step, phase):
    try:
        out = denoiser(X, S, H, gamma)
    except Exception as exc:
        raise RefinementError(step, phase) from exc
    out = np.asarray(out, dtype=np.float64)
    if out.shape[:2] != X.shape:
        raise RefinementError(step, phase) from ValueError(f"logits shape {out.shape}")
    return out


def run_refinement(denoiser, S, H, schedule: RevealSchedule, K: int, L: int, init=None,
                   editable_rows=None, return_trace: bool = False, phase: str = "refine"):
    """Decode a K x L grid from all-MASK (or from ``init`` with ``editable_rows`` re-masked)."""
    if init is None:
        X = np.full((K, L), MASK, dtype=np.int64)
    else:
        X = np.array(init, dtype=np.int64, copy=True)
        if X.shape != (K, L):
            raise ValueError(f"init grid has shape {X.shape}, expected {(K, L)}")
    editable = np.zeros((K, L), dtype=bool)
    if editable_rows is None:
        editable[:] = True
    else:
        editable[np.asarray(editable_rows, dtype=np.int64)] = True
    X[editable] = MASK
    T = schedule.T
    targets = reveal_targets(T, int(editable.sum()))
    trace = RefinementTrace()
    logits = None
    for t in range(1, T + 1):
        logits = _call(denoiser, X, S, H, mask_ratio(t - 1, T), t, phase)
        tau = infer_temperature(t, T, schedule.tau_max, schedule.tau_min)
        before = np.count_nonzero(X == MASK)
        X = reveal_step(X, logits, targets[t - 1], tau, first=schedule.first_reveal and t == 1,
                        editable=editable)
        trace.reveal_counts.append(int(before - np.count_nonzero(X == MASK)))
        trace.temperatures.append(tau)
    left = X == MASK
    if left.any():
        X[left] = np.argmax(logits, axis=-1)[left]
    logits = _call(denoiser, X, S, H, 0.0, T + 1, phase)
    X = np.where(editable, np.argmax(logits, axis=-1), X)
    trace.final_logits = logits
    return (X, trace) if return_trace else X


def row_confidence(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if np.any(scores < 0) or np.any(scores > 1):
        raise ValueError("per-token scores must lie in [0, 1]")
    return scores.mean(axis=1)


def remask_steps(T: int, n_low: int, K: int) -> int:
    return max(1, (T * n_low) // K)


def max_softmax_scorer(grid, logits, S=None, H=None) -> np.ndarray:
    """Default quality scorer: per-site max softmax probability of the final-pass logits."""
    return confidence(logits, 1.0)


def remask_pass(grid, confidences, phi: float, denoiser, S, H, schedule: RevealSchedule,
                return_trace: bool = False):
    grid = np.asarray(grid, dtype=np.int64)
    if np.any(grid == MASK):
        raise ValueError("remasking needs a fully revealed grid")
    K, L = grid.shape
    low = np.flatnonzero(np.asarray(confidences) < phi)
    if len(low) == 0:
        return (grid.copy(), None, 0) if return_trace else grid.copy()
    T_rm = remask_steps(schedule.T, len(low), K)
    sub = RevealSchedule(T_rm, schedule.tau_max, schedule.tau_min, schedule.first_reveal)
    out, trace = run_refinement(denoiser, S, H, sub, K, L, init=grid, editable_rows=low,
                                return_trace=True, phase="remask")
    return (out, trace, T_rm) if return_trace else out


def run_with_remasking(denoiser, scorer, S, H, schedule: RevealSchedule, remask_cfg: RemaskConfig,
                       K: int, L: int, return_trace: bool = False):
    grid, trace = run_refinement(denoiser, S, H, schedule, K, L, return_trace=True)
    logits = trace.final_logits
    scorer = scorer or max_softmax_scorer
    for phi in remask_cfg.thresholds:
        conf = row_confidence(scorer(grid, logits, S, H))
        grid, sub, T_rm = remask_pass(grid, conf, phi, denoiser, S, H, schedule, return_trace=True)
        n_low = int(np.count_nonzero(conf < phi))
        trace.passes.append({"threshold": phi, "k_low": n_low, "T_rm": T_rm})
        if sub is None:
            break
        logits = sub.final_logits
    trace.final_logits = logits
    return (grid, trace) if return_trace else grid
