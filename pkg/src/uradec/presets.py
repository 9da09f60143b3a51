"""Problem-size presets and code/dictionary construction shared by the CLI and the protocol."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gfq import GfContext
from .ldpc import GeneratorForm, ParityCheckMatrix, build_random_ldpc, derive_generator
from .sim import make_dictionaries


@dataclass(frozen=True)
class Scale:
    name: str
    Q: int
    L: int
    P: int
    T: int  # refinement steps at K=2

    @property
    def n_info(self) -> int:
        return self.L - self.P

    @property
    def payload_bits(self) -> int:
        return (self.Q.bit_length() - 1) * self.n_info


SCALES = {
    "tiny": Scale("tiny", 64, 12, 8, 12),
    "small": Scale("small", 64, 18, 12, 16),
    "moderate": Scale("moderate", 64, 24, 16, 20),
    "large": Scale("large", 64, 48, 32, 28),
}


def get_scale(name: str) -> Scale:
    try:
        return SCALES[name]
    except KeyError:
        raise ValueError(f"unknown scale {name!r}; choose from {sorted(SCALES)}") from None


def build_code(Q: int, L: int, P: int, col_weight: int = 3, seed: int = 0
               ) -> tuple[ParityCheckMatrix, GeneratorForm]:
    m = Q.bit_length() - 1
    if Q != 1 << m:
        raise ValueError(f"Q={Q} is not a power of two")
    ctx = GfContext(m)
    # separate stream from the frames so code and data seeds never alias
    H = build_random_ldpc(ctx, L, P, col_weight, rng=np.random.default_rng([seed, 1 << 20]), seed=seed)
    return H, derive_generator(H)


def dataset_dictionaries(Q: int, L: int, n_s: int, seed: int):
    return make_dictionaries(Q, L, n_s, np.random.default_rng([seed, 1 << 21]))
