"""Dense-network compute core with hand-written backward passes.

Everything runs on plain float64 numpy arrays; a parameter set is an
ordered ``dict[str, np.ndarray]``. Backward passes return gradients summed
over the batch, never averaged: the single 1/batch factor lives with the
loss, applied by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

ParamSet = dict[str, np.ndarray]

ACTIVATIONS = ("linear", "relu", "elu", "softmax")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction."""
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _apply_activation(z: np.ndarray, act: str) -> np.ndarray:
    if act == "linear":
        return z
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "elu":
        # alpha = 1; expm1 keeps the negative branch accurate near 0
        return np.where(z > 0.0, z, np.expm1(z))
    if act == "softmax":
        return softmax(z)
    raise ValueError(f"unknown activation {act!r}")


def _activation_backward(upstream: np.ndarray, z: np.ndarray, out: np.ndarray, act: str) -> np.ndarray:
    """Gradient w.r.t. pre-activation z given gradient w.r.t. the output."""
    if act == "linear":
        return upstream
    if act == "relu":
        return upstream * (z > 0.0)
    if act == "elu":
        # out + 1 equals exp(z) on the negative branch; slope at 0 is 1
        return upstream * np.where(z > 0.0, 1.0, out + 1.0)
    if act == "softmax":
        inner = (upstream * out).sum(axis=1, keepdims=True)
        return out * (upstream - inner)
    raise ValueError(f"unknown activation {act!r}")


class DenseCache(NamedTuple):
    weight: np.ndarray
    inputs: np.ndarray
    pre_act: np.ndarray
    out: np.ndarray
    act: str


class EmbeddingCache(NamedTuple):
    ids: np.ndarray
    in_dim: int
    pre_act: np.ndarray
    out: np.ndarray
    act: str


def dense_forward(
    weight: np.ndarray, bias: np.ndarray, inputs: np.ndarray, act: str = "linear"
) -> tuple[np.ndarray, DenseCache]:
    """out = g(inputs @ weight.T + bias), row-wise.

    weight is (out_dim, in_dim), bias (out_dim,), inputs (batch, in_dim).
    """
    if act not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}, got {act!r}")
    if weight.ndim != 2 or inputs.ndim != 2:
        raise DimensionError(
            f"dense_forward expects 2-d weight and inputs, got {weight.shape} and {inputs.shape}"
        )
    out_dim, in_dim = weight.shape
    if bias.shape != (out_dim,):
        raise DimensionError(f"bias shape {bias.shape} does not match weight {weight.shape}")
    if inputs.shape[1] != in_dim:
        raise DimensionError(
            f"inputs have {inputs.shape[1]} features, weight expects {in_dim}"
        )
    if not np.isfinite(inputs).all():
        raise NumericError("dense_forward received non-finite inputs")
    z = inputs @ weight.T + bias
    out = _apply_activation(z, act)
    return out, DenseCache(weight, inputs, z, out, act)


def dense_backward(
    cache: DenseCache, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients (d_weight, d_bias, d_inputs) for a recorded forward call."""
    if upstream.shape != cache.out.shape:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match forward output {cache.out.shape}"
        )
    dz = _activation_backward(upstream, cache.pre_act, cache.out, cache.act)
    d_weight = dz.T @ cache.inputs
    d_bias = dz.sum(axis=0)
    d_inputs = dz @ cache.weight
    return d_weight, d_bias, d_inputs


def embedding_forward(
    weight: np.ndarray, bias: np.ndarray, ids: np.ndarray, act: str = "linear"
) -> tuple[np.ndarray, EmbeddingCache]:
    """Dense layer applied to one-hot rows, computed as a table lookup.

    Equivalent to ``dense_forward(weight, bias, one_hot(ids), act)`` but
    without materializing the one-hot matrix.
    """
    if act not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}, got {act!r}")
    out_dim, in_dim = weight.shape
    if bias.shape != (out_dim,):
        raise DimensionError(f"bias shape {bias.shape} does not match weight {weight.shape}")
    ids = np.asarray(ids)
    if ids.ndim != 1:
        raise DimensionError(f"ids must be 1-d, got shape {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= in_dim):
        raise ValueError(f"ids out of range [0, {in_dim})")
    z = weight.T[ids] + bias
    out = _apply_activation(z, act)
    return out, EmbeddingCache(ids, in_dim, z, out, act)


def embedding_backward(cache: EmbeddingCache, upstream: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (d_weight, d_bias); the categorical input has no gradient."""
    if upstream.shape != cache.out.shape:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match forward output {cache.out.shape}"
        )
    dz = _activation_backward(upstream, cache.pre_act, cache.out, cache.act)
    d_weight_t = np.zeros((cache.in_dim, dz.shape[1]))
    np.add.at(d_weight_t, cache.ids, dz)
    d_bias = dz.sum(axis=0)
    return np.ascontiguousarray(d_weight_t.T), d_bias


def softmax_ce_backward(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of per-example -log p[label] w.r.t. pre-softmax logits.

    Returns probs - one_hot(labels), unscaled (no batch averaging).
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != probs.shape[0]:
        raise DimensionError(
            f"labels shape {labels.shape} does not match probs {probs.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise ValueError(f"label out of range [0, {probs.shape[1]})")
    d_logits = probs.copy()
    d_logits[np.arange(labels.shape[0]), labels] -= 1.0
    return d_logits


def _check_keys(params: ParamSet, grads: ParamSet) -> None:
    if params.keys() != grads.keys():
        missing = params.keys() ^ grads.keys()
        raise KeyError(f"parameter/gradient key mismatch: {sorted(missing)}")


def sgd_step(params: ParamSet, grads: ParamSet, lr: float) -> ParamSet:
    """One plain gradient-descent update: theta - lr * grad, per entry."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    _check_keys(params, grads)
    return {name: p - lr * grads[name] for name, p in params.items()}


@dataclass
class AdamState:
    """First/second moment accumulators and step counter."""

    m: ParamSet
    v: ParamSet
    t: int = 0


def init_adam(params: ParamSet) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        t=0,
    )


def adam_step(
    params: ParamSet,
    grads: ParamSet,
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> tuple[ParamSet, AdamState]:
    """Standard Adam update with bias correction; returns fresh params and state."""
    _check_keys(params, grads)
    _check_keys(params, state.m)
    t = state.t + 1
    new_params: ParamSet = {}
    new_m: ParamSet = {}
    new_v: ParamSet = {}
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        new_params[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, t)


def finite_diff_grad(
    f: Callable[[ParamSet], float], params: ParamSet, eps: float = 1e-6
) -> ParamSet:
    """Central-difference gradient (f(p+eps) - f(p-eps)) / 2eps per coordinate.

    The test oracle for every analytic backward pass in this package. f must
    be deterministic and must not mutate its argument.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    work = {k: p.copy() for k, p in params.items()}
    grads: ParamSet = {}
    for name, p in work.items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f(work)
            flat[i] = orig - eps
            fm = f(work)
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"non-finite objective while differencing {name}[{i}]")
            gflat[i] = (fp - fm) / (2.0 * eps)
        grads[name] = g
    return grads


def glorot_uniform(rng, fan_out: int, fan_in: int) -> np.ndarray:
    """Zero-mean uniform init with limit sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_out, fan_in))
