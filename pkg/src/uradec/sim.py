"""Frame generation: per-slot partial-DFT dictionaries and noisy superpositions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .ldpc import GeneratorForm, ParityCheckMatrix, sample_codewords


@dataclass(frozen=True)
class SensingMatrix:
    columns: np.ndarray  # (n_s, Q) complex
    rows: np.ndarray  # selected DFT row indices

    @property
    def n_s(self) -> int:
        return self.columns.shape[0]

    @property
    def Q(self) -> int:
        return self.columns.shape[1]


def partial_dft(Q: int, n_s: int, rng) -> SensingMatrix:
    if not 0 < n_s <= Q:
        raise ValueError(f"need 0 < n_s <= Q, got n_s={n_s}, Q={Q}")
    rng = np.random.default_rng(rng)
    rows = np.sort(rng.choice(Q, size=n_s, replace=False))
    k = rows[:, None]
    n = np.arange(Q)[None, :]
    A = np.exp(-2j * np.pi * ((k * n) % Q) / Q) / math.sqrt(n_s)
    A.setflags(write=False)
    rows.setflags(write=False)
    return SensingMatrix(A, rows)


def make_dictionaries(Q: int, L: int, n_s: int, rng) -> list[SensingMatrix]:
    rng = np.random.default_rng(rng)
    return [partial_dft(Q, n_s, rng) for _ in range(L)]


def activity_vector(symbols, Q: int) -> np.ndarray:
    """Per-slot activity U: colliding users accumulate integer counts."""
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.size and (symbols.min() < 0 or symbols.max() >= Q):
        raise ValueError("symbols must lie in [0, Q)")
    return np.bincount(symbols.ravel(), minlength=Q).astype(np.complex128)


def complex_noise(shape, noise_var: float, rng) -> np.ndarray:
    s = math.sqrt(noise_var / 2.0)
    return s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)


def transmit(A: SensingMatrix, U, p_sym: float, noise_var: float, rng) -> np.ndarray:
    if p_sym <= 0:
        raise ValueError("symbol power must be positive")
    rng = np.random.default_rng(rng)
    Y = math.sqrt(p_sym) * (A.columns @ np.asarray(U, dtype=np.complex128))
    if noise_var > 0:
        Y = Y + complex_noise(A.n_s, noise_var, rng)
    return Y


def symbol_power(eb_db: float, B: float, L: int) -> float:
    if L <= 0:
        raise ValueError("L must be positive")
    return B * 10.0 ** (eb_db / 10.0) / L


def snr_db(eb_db: float, L: int, n_s: int, B: float) -> float:
    """Per-user per-channel-use SNR for unit noise variance."""
    return eb_db - 10.0 * math.log10(L * n_s / B)


@dataclass(frozen=True)
class FrameConfig:
    Q: int = 64
    L: int = 12
    K: int = 2
    n_s: int = 24
    eb_db: float = 10.0
    noise_var: float = 1.0
    payload_bits: int = 24

    @property
    def p_sym(self) -> float:
        return symbol_power(self.eb_db, self.payload_bits, self.L)

    @property
    def snr_db(self) -> float:
        # SNR referenced to the actual noise variance
        if self.noise_var <= 0:
            return math.inf
        return snr_db(self.eb_db, self.L, self.n_s, self.payload_bits) - 10.0 * math.log10(self.noise_var)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FrameSample:
    truth: np.ndarray  # (K, L)
    observations: np.ndarray  # (L, n_s) complex
    dictionaries: list[SensingMatrix] = field(repr=False)
    seed: object = None
    evidence: np.ndarray | None = None  # (L, Q), filled by the detector
    snr_db: float | None = None


def generate_frame(config: FrameConfig, H: ParityCheckMatrix, gen: GeneratorForm, rng,
                   dictionaries: list[SensingMatrix] | None = None, seed=None) -> FrameSample:
    """Sample K distinct codewords and push every slot through its dictionary.

    Dictionaries are normally shared across a dataset; when omitted they are
    drawn from ``rng`` before the payloads.
    """
    if H.L != config.L or H.Q != config.Q:
        raise ValueError(f"code dims (L={H.L}, Q={H.Q}) do not match config (L={config.L}, Q={config.Q})")
    rng = np.random.default_rng(rng)
    if dictionaries is None:
        dictionaries = make_dictionaries(config.Q, config.L, config.n_s, rng)
    truth = sample_codewords(gen, config.K, rng)
    # all slots at once; noise drawn after the payloads so the stream layout is fixed
    A = np.stack([d.columns for d in dictionaries])  # (L, n_s, Q)
    U = np.stack([activity_vector(truth[:, l], config.Q) for l in range(config.L)])  # (L, Q)
    Y = math.sqrt(config.p_sym) * np.einsum("lnq,lq->ln", A, U)
    if config.noise_var > 0:
        Y = Y + complex_noise(Y.shape, config.noise_var, rng)
    return FrameSample(truth, Y, dictionaries, seed=seed, snr_db=config.snr_db)


def frame_rng(master_seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Counter-based per-frame generator: independent of worker count or order."""
    return np.random.default_rng([int(master_seed), int(stream), int(index)])
