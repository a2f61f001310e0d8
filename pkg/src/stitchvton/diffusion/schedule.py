"""Noise schedule and the DDIM update algebra.

The cumulative alpha-bar table has T+1 entries with alpha_bar[0] = 1,
built from a linear beta schedule. The elementwise ops are dtype
preserving: float32 pipelines stay float32 (coefficients are applied
in float64 internally), float64 inputs stay float64.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, NumericsError, ShapeError

__all__ = [
    "NoiseSchedule",
    "signal_noise_mix",
    "forward_diffuse",
    "predict_x0",
    "ddim_step",
    "cfg_noise",
    "ddim_timesteps",
]


class NoiseSchedule:
    """Linear-beta schedule with a cumulative alpha-bar lookup table."""

    def __init__(self, timesteps=1000, beta_start=1e-4, beta_end=0.02):
        if timesteps < 1:
            raise ContractError("timesteps must be >= 1")
        self.timesteps = int(timesteps)
        self.beta_start = float(beta_start)
        self.beta_end = float(beta_end)
        betas = np.linspace(beta_start, beta_end, timesteps, dtype=np.float64)
        abar = np.empty(timesteps + 1, dtype=np.float64)
        abar[0] = 1.0
        abar[1:] = np.cumprod(1.0 - betas)
        if not (np.diff(abar) < 0).all() or abar[-1] <= 0.0:
            raise NumericsError("alpha-bar table must be strictly decreasing "
                                "within (0, 1]")
        self.alpha_bar = abar

    def check_t(self, t):
        t = int(t)
        if not 0 <= t <= self.timesteps:
            raise ContractError("timestep %d outside [0, %d]"
                                % (t, self.timesteps))
        return t

    def config(self):
        return {"timesteps": self.timesteps, "beta_start": self.beta_start,
                "beta_end": self.beta_end}


def _arr(x):
    a = x.data if hasattr(x, "data") and isinstance(getattr(x, "data"), np.ndarray) \
        else np.asarray(x)
    return a


def signal_noise_mix(x0, eps, alpha_bar):
    """sqrt(abar)*x0 + sqrt(1-abar)*eps, preserving the input dtype."""
    x0, eps = _arr(x0), _arr(eps)
    if x0.shape != eps.shape:
        raise ShapeError("x0 %s and eps %s differ" % (x0.shape, eps.shape))
    out = (np.sqrt(alpha_bar) * x0.astype(np.float64)
           + np.sqrt(1.0 - alpha_bar) * eps.astype(np.float64))
    return out.astype(x0.dtype)


def forward_diffuse(x0, t, eps, schedule):
    """Noising step of the forward process at timestep t."""
    t = schedule.check_t(t)
    return signal_noise_mix(x0, eps, schedule.alpha_bar[t])


def predict_x0(x_t, eps_hat, t, schedule):
    """Estimate the clean latent from x_t and a noise prediction."""
    t = schedule.check_t(t)
    abar = schedule.alpha_bar[t]
    if abar <= 0.0:
        raise NumericsError("alpha_bar is 0 at t=%d; x0 estimate singular" % t)
    x_t, eps_hat = _arr(x_t), _arr(eps_hat)
    if x_t.shape != eps_hat.shape:
        raise ShapeError("x_t %s and eps_hat %s differ"
                         % (x_t.shape, eps_hat.shape))
    out = (x_t.astype(np.float64)
           - np.sqrt(1.0 - abar) * eps_hat.astype(np.float64)) / np.sqrt(abar)
    return out.astype(x_t.dtype)


def ddim_step(x_t, eps_hat, t, t_prev, schedule):
    """Deterministic (eta = 0) DDIM update from t to t_prev < t."""
    t = schedule.check_t(t)
    t_prev = schedule.check_t(t_prev)
    if t_prev >= t:
        raise ContractError("ddim_step needs t_prev < t, got %d >= %d"
                            % (t_prev, t))
    x0_hat = predict_x0(x_t, eps_hat, t, schedule)
    return signal_noise_mix(x0_hat, eps_hat, schedule.alpha_bar[t_prev])


def cfg_noise(eps_cond, eps_uncond, scale):
    """Classifier-free guidance combination of the two branches."""
    eps_cond, eps_uncond = _arr(eps_cond), _arr(eps_uncond)
    if eps_cond.shape != eps_uncond.shape:
        raise ShapeError("cfg branches differ: %s vs %s"
                         % (eps_cond.shape, eps_uncond.shape))
    out = (eps_uncond.astype(np.float64)
           + scale * (eps_cond.astype(np.float64)
                      - eps_uncond.astype(np.float64)))
    return out.astype(eps_cond.dtype)


def ddim_timesteps(schedule, steps=25):
    """Evenly spaced sampling ladder from T down to 0 (steps+1 entries)."""
    if steps < 1:
        raise ContractError("need at least one sampling step")
    ts = np.linspace(schedule.timesteps, 0, steps + 1)
    return [int(round(t)) for t in ts]
