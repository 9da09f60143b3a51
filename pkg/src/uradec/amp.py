"""Slot-wise AMP with a Bernoulli-Gaussian MMSE denoiser; produces log-activity evidence.

All functions broadcast over leading axes, so a whole frame (or a batch of
frames sharing per-slot dictionaries) is detected in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class AmpNumericalError(FloatingPointError):
    def __init__(self, iteration: int, what: str):
        super().__init__(f"non-finite {what} at AMP iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class AmpConfig:
    iters: int = 20
    rho_bg: float | None = None  # None: K/Q
    sigma_u2: float | None = None  # None: P_sym
    evidence_floor: float = -40.0
    nu_floor: float = 1e-12

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError("AMP needs at least one iteration")
        if self.rho_bg is not None and not 0.0 < self.rho_bg < 1.0:
            raise ValueError(f"rho_bg must lie in (0, 1), got {self.rho_bg}")
        if self.sigma_u2 is not None and not self.sigma_u2 > 0:
            raise ValueError(f"sigma_u2 must be positive, got {self.sigma_u2}")

    def resolved(self, frame_config) -> "AmpConfig":
        """Fill unset priors from a FrameConfig: rho = K/Q, sigma_u^2 = P_sym."""
        return replace(
            self,
            rho_bg=frame_config.K / frame_config.Q if self.rho_bg is None else self.rho_bg,
            sigma_u2=frame_config.p_sym if self.sigma_u2 is None else self.sigma_u2,
        )


def _require(cfg: AmpConfig):
    if cfg.rho_bg is None or cfg.sigma_u2 is None:
        raise ValueError("AmpConfig priors unset; call cfg.resolved(frame_config) first")


def _check_nu(nu):
    nu = np.asarray(nu, dtype=np.float64)
    if np.any(~(nu > 0)):
        raise ValueError("effective variance nu must be positive")
    return nu


def activity_llr(r, nu, cfg: AmpConfig):
    """log [rho phi(r; nu+s2)] - log [(1-rho) phi(r; nu)] for circular complex Gaussians."""
    _require(cfg)
    nu = _check_nu(nu)
    s2 = cfg.sigma_u2
    rho = cfg.rho_bg
    abs2 = np.abs(r) ** 2
    return (np.log(rho) - np.log1p(-rho) + np.log(nu) - np.log(nu + s2)
            + abs2 * (s2 / (nu * (nu + s2))))


def log_bg_posterior(r, nu, cfg: AmpConfig):
    return -np.logaddexp(0.0, -activity_llr(r, nu, cfg))


def bg_posterior(r, nu, cfg: AmpConfig):
    """Posterior probability that a coordinate is active given pseudo-observation r."""
    return np.exp(log_bg_posterior(r, nu, cfg))


def mmse_denoise(r, nu, cfg: AmpConfig):
    """Returns (posterior mean, Wirtinger derivative d mean / d r)."""
    nu = _check_nu(nu)
    p = bg_posterior(r, nu, cfg)
    s2 = cfg.sigma_u2
    gain = s2 / (nu + s2)
    slope = s2 / (nu * (nu + s2))
    mean = p * gain * r
    div = gain * (p + np.abs(r) ** 2 * p * (1.0 - p) * slope)
    return mean, div


def amp_detect(Y, A, cfg: AmpConfig, return_history: bool = False):
    """Run ``cfg.iters`` AMP iterations on observations Y (..., n_s) with dictionary A (..., n_s, Q).

    Returns the final pseudo-observation R (..., Q) and its variance estimate
    nu (...). With ``return_history`` also the residual energy ||Y~||^2 at
    every iteration (length iters + 1).
    """
    _require(cfg)
    Y = np.asarray(Y, dtype=np.complex128)
    A = np.asarray(A.columns if hasattr(A, "columns") else A, dtype=np.complex128)
    n_s, Q = A.shape[-2:]
    if Y.shape[-1] != n_s:
        raise ValueError(f"observation length {Y.shape[-1]} does not match dictionary rows {n_s}")
    AH = np.conj(np.swapaxes(A, -1, -2))
    U = np.zeros(np.broadcast_shapes(Y.shape[:-1], A.shape[:-2]) + (Q,), dtype=np.complex128)
    resid = np.broadcast_to(Y, U.shape[:-1] + (n_s,)).copy()
    history = []
    for i in range(cfg.iters + 1):
        energy = np.sum(np.abs(resid) ** 2, axis=-1)
        history.append(energy)
        nu = np.maximum(energy / n_s, cfg.nu_floor)
        R = U + (AH @ resid[..., None])[..., 0]
        if not np.all(np.isfinite(R)):
            raise AmpNumericalError(i, "pseudo-observation")
        if i == cfg.iters:
            break
        U, div = mmse_denoise(R, nu[..., None], cfg)
        onsager = np.sum(div, axis=-1, keepdims=True) / n_s
        resid = Y - (A @ U[..., None])[..., 0] + resid * onsager
        if not np.all(np.isfinite(resid)):
            raise AmpNumericalError(i, "residual")
    if return_history:
        return R, nu, np.stack(history, axis=-1)
    return R, nu


def evidence_row(R, nu, cfg: AmpConfig):
    """Floored log activity probabilities: one evidence row per slot."""
    nu = np.asarray(nu, dtype=np.float64)
    if nu.ndim:
        nu = nu[..., None]
    return np.maximum(log_bg_posterior(R, nu, cfg), cfg.evidence_floor)


def detect_slots(observations, dictionaries, cfg: AmpConfig):
    """Evidence matrix S for observations (..., L, n_s) against per-slot dictionaries."""
    A = np.stack([d.columns if hasattr(d, "columns") else d for d in dictionaries])
    R, nu = amp_detect(observations, A, cfg)
    return evidence_row(R, nu, cfg)


def detect_frame(frame, cfg: AmpConfig):
    S = detect_slots(frame.observations, frame.dictionaries, cfg)
    frame.evidence = S
    return S
