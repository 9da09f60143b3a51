"""Named decoder factory: every decoder maps (evidence, truth) to a K x L grid plus telemetry."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .bp import BpConfig, TopJBudgetError, sic_decode, topj_decode
from .denoiser import DenoiserParams, OracleDenoiser, StructuredDenoiser
from .refine import PER_K_SCHEDULE, RemaskConfig, RevealSchedule, run_with_remasking

DECODERS = ("sic-bp", "topj", "refine-oracle", "refine-structured")


@dataclass(frozen=True)
class DecoderSpec:
    name: str = "sic-bp"
    backend: str = "wht"
    max_iters: int = 50
    early_exit: bool = True
    sic_cancel: str = "floor"
    J: int = 2
    topj_budget: int = 1 << 22
    T: int | None = None  # None: per-K preset
    tau_max: float = 1.0
    tau_min: float = 0.5
    remask: tuple | None = None  # None: per-K preset
    denoiser_seed: int = 0
    D: int = 128

    def __post_init__(self):
        if self.name not in DECODERS:
            raise ValueError(f"unknown decoder {self.name!r}; choose from {DECODERS}")

    def to_dict(self) -> dict:
        return asdict(self)


def validate(spec: DecoderSpec, H, K: int) -> None:
    """Raise before any decoding when the decoder cannot run on this problem."""
    if K < 1:
        raise ValueError("K must be >= 1")
    BpConfig(spec.max_iters, spec.backend, early_exit=spec.early_exit)
    if spec.name == "topj" and spec.J ** H.L > spec.topj_budget:
        raise TopJBudgetError(spec.J, H.L, spec.topj_budget)
    if spec.name.startswith("refine") and spec.T is None and K not in PER_K_SCHEDULE:
        raise ValueError(f"no preset refinement schedule for K={K}; pass T explicitly")


def _schedule(spec, K, scale_T=None):
    T, th = PER_K_SCHEDULE.get(K, (None, ()))
    if spec.T is not None:
        T = spec.T
    elif K == 2 and scale_T is not None:
        T = scale_T
    th = th if spec.remask is None else tuple(spec.remask)
    return RevealSchedule(T, spec.tau_max, spec.tau_min), RemaskConfig(th)


def make_decoder(spec: DecoderSpec, H, K: int, scale_T: int | None = None):
    """Returns decode(S, truth) -> (grid, stats)."""
    validate(spec, H, K)
    if spec.name == "sic-bp":
        cfg = BpConfig(spec.max_iters, spec.backend, early_exit=spec.early_exit)

        def decode(S, truth=None):
            grid, res = sic_decode(S, H, K, cfg, cancel=spec.sic_cancel, return_results=True)
            return grid, {"iters": sum(r.iters for r in res),
                          "converged": all(r.converged for r in res)}
        return decode

    if spec.name == "topj":
        def decode(S, truth=None):
            return topj_decode(S, H, K, spec.J, budget=spec.topj_budget), {}
        return decode

    schedule, remask = _schedule(spec, K, scale_T)
    structured = None
    if spec.name == "refine-structured":
        structured = StructuredDenoiser(DenoiserParams.random(H.Q, spec.D, seed=spec.denoiser_seed))

    def decode(S, truth=None):
        if structured is None:
            if truth is None:
                raise ValueError("the oracle denoiser needs the true grid")
            den = OracleDenoiser(truth, H.Q)
        else:
            den = structured
        grid, trace = run_with_remasking(den, None, S, H, schedule, remask, K, H.L,
                                         return_trace=True)
        return grid, {"T": schedule.T, "remask_passes": len(trace.passes)}
    return decode
