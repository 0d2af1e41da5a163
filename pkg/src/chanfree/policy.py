"""Gaussian exploration around the transmitter output and the scalar-loss
gradient estimator for its parameters.

The channel input is relaxed to x_p = sqrt(1 - v) * x + w with
w ~ CN(0, v I), which preserves unit average symbol energy. The estimator
weight each sample's log-density gradient by its received per-example loss;
it sees only losses, the sample record, and this config, never channel
internals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .baseband import RngStream, complex_to_real
from .nn import DimensionError, ParamSet
from .transceiver import TxCache, TxModel, tx_backward

DEFAULT_EXPLORATION_VAR = 0.02


@dataclass(frozen=True)
class PolicyConfig:
    """Fixed exploration variance per complex symbol, in (0, 1)."""

    variance: float = DEFAULT_EXPLORATION_VAR

    def __post_init__(self):
        if not 0.0 < self.variance < 1.0:
            raise ValueError(f"exploration variance must lie in (0, 1), got {self.variance}")


class PolicySample(NamedTuple):
    x: np.ndarray  # deterministic transmitter output
    x_p: np.ndarray  # perturbed channel input
    cache: TxCache | None


def policy_sample(
    x: np.ndarray, cfg: PolicyConfig, rng: RngStream, cache: TxCache | None = None
) -> PolicySample:
    """Draw x_p = sqrt(1 - v) * x + w, w ~ CN(0, v) per symbol."""
    w = rng.cnormal(x.shape, cfg.variance)
    x_p = np.sqrt(1.0 - cfg.variance) * x + w
    return PolicySample(x=x, x_p=x_p, cache=cache)


def log_policy_grad_wrt_mean(sample: PolicySample, cfg: PolicyConfig) -> np.ndarray:
    """Gradient of log pi(x_p | x) w.r.t. the unscaled transmitter output.

    Returns (2 sqrt(1 - v) / v) * (x_p - sqrt(1 - v) x) as stacked reals,
    shape (batch, 2n); composing with tx_backward yields the log-density
    gradient w.r.t. the transmitter parameters.
    """
    v = cfg.variance
    root = np.sqrt(1.0 - v)
    residual = sample.x_p - root * sample.x
    return complex_to_real((2.0 * root / v) * residual)


def estimate_tx_gradient(
    tx: TxModel,
    losses: np.ndarray,
    sample: PolicySample,
    cfg: PolicyConfig,
    baseline: bool = False,
) -> ParamSet:
    """Loss-weighted score-function estimate of the transmitter gradient.

    (1/B) sum_i l_i * d/dtheta log pi(x_p_i | x_i). With baseline=True the
    batch-mean loss is subtracted from each l_i first, which changes the
    variance but not the expectation.
    """
    losses = np.asarray(losses, dtype=np.float64)
    batch = sample.x.shape[0]
    if losses.shape != (batch,):
        raise DimensionError(f"losses shape {losses.shape} does not match batch size {batch}")
    if sample.cache is None:
        raise ValueError("sample carries no transmitter cache to backpropagate through")
    weights = losses - losses.mean() if baseline else losses
    score = log_policy_grad_wrt_mean(sample, cfg)
    return tx_backward(tx, sample.cache, score * (weights / batch)[:, None])
