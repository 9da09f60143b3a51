"""Stochastic binning: users pick one of zeta bins, each bin is decoded on its own, overloaded bins are erased."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .metrics import match_rows


class ProtocolConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    k_tot: int
    zeta: int | None = None  # None: ceil(k_tot / 4)
    k_max: int = 8

    def __post_init__(self):
        if self.k_tot < 0:
            raise ProtocolConfigError("k_tot must be >= 0")
        if self.zeta is not None and self.zeta < 1:
            raise ProtocolConfigError("zeta must be >= 1")
        if self.k_max < 1:
            raise ProtocolConfigError("k_max must be >= 1")

    @property
    def bins(self) -> int:
        return self.zeta if self.zeta is not None else max(1, math.ceil(self.k_tot / 4))


def assign_bins(k_tot: int, zeta: int, rng) -> np.ndarray:
    """Per-bin loads when each of k_tot users picks a bin uniformly."""
    if k_tot < 0 or zeta < 1:
        raise ValueError("need k_tot >= 0 and zeta >= 1")
    rng = np.random.default_rng(rng)
    return rng.multinomial(k_tot, np.full(zeta, 1.0 / zeta))


def poisson_overflow(kappa: float, k_max: int) -> float:
    """Pr[Poisson(kappa) > k_max]."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if kappa == 0:
        return 0.0
    return float(stats.poisson.sf(k_max, kappa))


def expected_overflow_fraction(k_tot: int, zeta: int, k_max: int) -> float:
    """Exact expected share of users landing in overloaded bins (binomial per-bin load)."""
    if k_tot == 0:
        return 0.0
    n = np.arange(k_max + 1, k_tot + 1)
    pmf = stats.binom.pmf(n, k_tot, 1.0 / zeta)
    return float(zeta * np.sum(n * pmf) / k_tot)


@dataclass
class ProtocolFrame:
    loads: np.ndarray
    symbol_errors: int
    user_errors: int
    overflow_users: int
    scored_users: int
    L: int
    bins: list = field(default_factory=list)  # per decoded bin: (load, symbol errors, user errors)

    @property
    def k_tot(self) -> int:
        return int(self.loads.sum())

    @property
    def ser(self) -> float:
        return self.symbol_errors / (self.k_tot * self.L) if self.k_tot else 0.0

    @property
    def cer(self) -> float:
        return self.user_errors / self.k_tot if self.k_tot else 0.0

    @property
    def overflow_fraction(self) -> float:
        return self.overflow_users / self.k_tot if self.k_tot else 0.0


def _bin_errors(truth, pred):
    m = match_rows(truth, pred)
    return int(m.row_costs.sum()), int(np.count_nonzero(m.row_costs))


def run_protocol_frame(cfg: ProtocolConfig, L: int, simulate_bin, decoder_bank, rng) -> ProtocolFrame:
    """One protocol frame.

    ``simulate_bin(load, rng)`` returns a FrameSample for that bin (with
    evidence filled when the decoders need it); ``decoder_bank[load]`` maps a
    FrameSample to a predicted grid.
    """
    rng = np.random.default_rng(rng)
    loads = assign_bins(cfg.k_tot, cfg.bins, rng)
    sym = usr = ovf = scored = 0
    per_bin = []
    for load in loads:
        load = int(load)
        if load == 0:
            continue
        if load > cfg.k_max:
            ovf += load
            sym += load * L
            usr += load
            continue
        if load not in decoder_bank:
            raise ProtocolConfigError(f"no decoder for bin load {load}")
        frame = simulate_bin(load, rng)
        pred = np.asarray(decoder_bank[load](frame))
        s, u = _bin_errors(frame.truth, pred)
        sym += s
        usr += u
        scored += load
        per_bin.append((load, s, u))
    return ProtocolFrame(loads, sym, usr, ovf, scored, L, per_bin)


def check_bank(cfg: ProtocolConfig, decoder_bank) -> None:
    missing = [k for k in range(1, min(cfg.k_max, cfg.k_tot) + 1) if k not in decoder_bank]
    if missing:
        raise ProtocolConfigError(f"decoder bank lacks loads {missing}")


def run_protocol(cfg: ProtocolConfig, L: int, simulate_bin, decoder_bank, rng, frames: int = 1):
    """Returns (mean frame SER, mean frame CER, total overflow users, per-frame records)."""
    check_bank(cfg, decoder_bank)
    rng = np.random.default_rng(rng)
    recs = [run_protocol_frame(cfg, L, simulate_bin, decoder_bank, rng) for _ in range(frames)]
    ser = float(np.mean([r.ser for r in recs])) if recs else 0.0
    cer = float(np.mean([r.cer for r in recs])) if recs else 0.0
    return ser, cer, int(sum(r.overflow_users for r in recs)), recs


def frame_simulator(frame_config, H, gen, dictionaries, amp_cfg=None, detect: bool = True):
    """simulate_bin for the standard pipeline: per-bin FrameConfig with K = load, AMP evidence."""
    from .amp import AmpConfig, detect_frame
    from .sim import generate_frame

    base_amp = amp_cfg or AmpConfig()

    def simulate(load, rng):
        fc = replace(frame_config, K=load)
        frame = generate_frame(fc, H, gen, rng, dictionaries=dictionaries)
        if detect:
            detect_frame(frame, base_amp.resolved(fc))
        return frame

    return simulate
