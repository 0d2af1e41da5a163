"""Transmitter and receiver networks, cross-entropy loss, hard decisions.

The transmitter maps a message id through an MxM table-lookup layer with
ELU, a linear layer down to 2n reals, real-to-complex packing, and energy
normalization. The receiver unpacks the n received symbols to 2n reals and
classifies them; the fading variant first estimates a single complex
channel gain, divides the received symbols by it, and feeds the quotient to
the same classifier tail.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import nn
from .baseband import (
    NormCache,
    RngStream,
    complex_to_real,
    normalize_energy,
    normalize_energy_backward,
    real_to_complex,
)
from .nn import DenseCache, DimensionError, EmbeddingCache, ParamSet

PROB_CLIP = 1e-12
# Floor on |h_hat|^2 before dividing; keeps early-training gradients finite.
EPS_DIV = 1e-6
MODEL_FORMAT_VERSION = 1
DEFAULT_EST_WIDTH = 32


@dataclass
class TxModel:
    """Message encoder producing n unit-average-energy complex symbols."""

    m: int
    n: int
    params: ParamSet = field(repr=False)

    @classmethod
    def init(cls, m: int, n: int, rng: RngStream, dtype=np.float64) -> "TxModel":
        params = {
            "emb.W": nn.glorot_uniform(rng, m, m).astype(dtype),
            "emb.b": np.zeros(m, dtype=dtype),
            "out.W": nn.glorot_uniform(rng, 2 * n, m).astype(dtype),
            "out.b": np.zeros(2 * n, dtype=dtype),
        }
        return cls(m=m, n=n, params=params)


@dataclass
class RxModel:
    """Soft detector mapping n received symbols to message probabilities."""

    m: int
    n: int
    variant: str  # "awgn" or "rbf"
    params: ParamSet = field(repr=False)
    est_width: int = DEFAULT_EST_WIDTH

    @classmethod
    def init(
        cls,
        m: int,
        n: int,
        variant: str = "awgn",
        rng: RngStream = None,
        est_width: int = DEFAULT_EST_WIDTH,
        dtype=np.float64,
    ) -> "RxModel":
        if variant not in ("awgn", "rbf"):
            raise ValueError(f"receiver variant must be 'awgn' or 'rbf', got {variant!r}")
        params = {
            "h1.W": nn.glorot_uniform(rng, m, 2 * n).astype(dtype),
            "h1.b": np.zeros(m, dtype=dtype),
            "out.W": nn.glorot_uniform(rng, m, m).astype(dtype),
            "out.b": np.zeros(m, dtype=dtype),
        }
        if variant == "rbf":
            params["est1.W"] = nn.glorot_uniform(rng, est_width, 2 * n).astype(dtype)
            params["est1.b"] = np.zeros(est_width, dtype=dtype)
            params["est2.W"] = nn.glorot_uniform(rng, 2, est_width).astype(dtype)
            params["est2.b"] = np.zeros(2, dtype=dtype)
        return cls(m=m, n=n, variant=variant, params=params, est_width=est_width)


class TxCache(NamedTuple):
    emb: EmbeddingCache
    out: DenseCache
    norm: NormCache


def tx_forward(tx: TxModel, msgs: np.ndarray) -> tuple[np.ndarray, TxCache]:
    """Encode message ids into (batch, n) complex symbols with ||row||^2 = n."""
    msgs = np.asarray(msgs)
    if msgs.size and (msgs.min() < 0 or msgs.max() >= tx.m):
        raise ValueError(f"message id out of range [0, {tx.m})")
    hidden, emb_cache = nn.embedding_forward(tx.params["emb.W"], tx.params["emb.b"], msgs, "elu")
    reals, out_cache = nn.dense_forward(tx.params["out.W"], tx.params["out.b"], hidden, "linear")
    symbols, norm_cache = normalize_energy(real_to_complex(reals))
    return symbols, TxCache(emb_cache, out_cache, norm_cache)


def tx_backward(tx: TxModel, cache: TxCache, d_symbols_real: np.ndarray) -> ParamSet:
    """Jacobian-transpose product through normalization, packing, and layers.

    d_symbols_real is the gradient w.r.t. the transmitted symbols in stacked
    (re, im) coordinates, shape (batch, 2n).
    """
    d_reals = normalize_energy_backward(cache.norm, d_symbols_real)
    d_w2, d_b2, d_hidden = nn.dense_backward(cache.out, d_reals)
    d_w1, d_b1 = nn.embedding_backward(cache.emb, d_hidden)
    return {"emb.W": d_w1, "emb.b": d_b1, "out.W": d_w2, "out.b": d_b2}


class RxCache(NamedTuple):
    variant: str
    est1: DenseCache | None
    est2: DenseCache | None
    received: np.ndarray | None  # complex symbols fed to the divider
    h_hat: np.ndarray | None  # complex channel estimate per row
    denom: np.ndarray | None  # max(|h_hat|^2, EPS_DIV)
    clamped: np.ndarray | None
    h1: DenseCache
    out: DenseCache


def rx_forward(rx: RxModel, received: np.ndarray) -> tuple[np.ndarray, RxCache]:
    """Map (batch, n) received symbols to a probability row per example."""
    if received.shape[1] != rx.n:
        raise DimensionError(f"expected {rx.n} symbols per row, got {received.shape[1]}")
    reals = complex_to_real(received)
    if rx.variant == "rbf":
        est_hidden, est1_cache = nn.dense_forward(
            rx.params["est1.W"], rx.params["est1.b"], reals, "relu"
        )
        est_out, est2_cache = nn.dense_forward(
            rx.params["est2.W"], rx.params["est2.b"], est_hidden, "linear"
        )
        h_hat = est_out[:, 0] + 1j * est_out[:, 1]
        mag2 = est_out[:, 0] ** 2 + est_out[:, 1] ** 2
        clamped = mag2 < EPS_DIV
        denom = np.maximum(mag2, EPS_DIV)
        equalized = received * np.conj(h_hat)[:, None] / denom[:, None]
        tail_in = complex_to_real(equalized)
    else:
        est1_cache = est2_cache = h_hat = denom = clamped = None
        received = None
        tail_in = reals
    hidden, h1_cache = nn.dense_forward(rx.params["h1.W"], rx.params["h1.b"], tail_in, "relu")
    probs, out_cache = nn.dense_forward(rx.params["out.W"], rx.params["out.b"], hidden, "softmax")
    return probs, RxCache(
        rx.variant, est1_cache, est2_cache, received, h_hat, denom, clamped, h1_cache, out_cache
    )


def _divider_backward(cache: RxCache, d_tail_real: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of q = y * conj(h) / max(|h|^2, eps) w.r.t. y and (re h, im h)."""
    g = real_to_complex(d_tail_real)
    y = cache.received
    h = cache.h_hat
    denom = cache.denom
    d_y = g * (h / denom)[:, None]
    # numerator u = y * conj(h); denominator gradient only where |h|^2 is live
    u = y * np.conj(h)[:, None]
    s1 = (g * np.conj(y)).sum(axis=1)
    s2 = (g * np.conj(u)).sum(axis=1).real
    live = np.where(cache.clamped, 0.0, 1.0)
    d_re = s1.real / denom - 2.0 * h.real * s2 / denom**2 * live
    d_im = -s1.imag / denom - 2.0 * h.imag * s2 / denom**2 * live
    d_h = np.stack([d_re, d_im], axis=1)
    return complex_to_real(d_y), d_h


def rx_backward(rx: RxModel, cache: RxCache, d_logits: np.ndarray) -> tuple[ParamSet, np.ndarray]:
    """Backprop from the pre-softmax logits gradient.

    Returns parameter gradients plus the gradient w.r.t. the received
    symbols in stacked-real coordinates (needed by the supervised path).
    """
    # last layer's softmax was consumed by the loss; treat it as linear here
    d_w_out = d_logits.T @ cache.out.inputs
    d_b_out = d_logits.sum(axis=0)
    d_hidden = d_logits @ cache.out.weight
    d_w1, d_b1, d_tail_in = nn.dense_backward(cache.h1, d_hidden)
    grads = {"h1.W": d_w1, "h1.b": d_b1, "out.W": d_w_out, "out.b": d_b_out}
    if rx.variant == "rbf":
        d_y, d_h = _divider_backward(cache, d_tail_in)
        d_w_e2, d_b_e2, d_est_hidden = nn.dense_backward(cache.est2, d_h)
        d_w_e1, d_b_e1, d_reals_est = nn.dense_backward(cache.est1, d_est_hidden)
        grads.update({"est1.W": d_w_e1, "est1.b": d_b_e1, "est2.W": d_w_e2, "est2.b": d_b_e2})
        d_received = d_y + d_reals_est
    else:
        d_received = d_tail_in
    return grads, d_received


def ce_per_example(probs: np.ndarray, msgs: np.ndarray) -> np.ndarray:
    """Per-example loss -log p[true message], with probabilities clipped at 1e-12."""
    msgs = np.asarray(msgs)
    if msgs.size and (msgs.min() < 0 or msgs.max() >= probs.shape[1]):
        raise ValueError(f"message id out of range [0, {probs.shape[1]})")
    picked = probs[np.arange(msgs.shape[0]), msgs]
    return -np.log(np.maximum(picked, PROB_CLIP))


def hard_decision(probs: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest index."""
    return np.argmax(probs, axis=1)


# --- serialization -----------------------------------------------------------
#
# Versioned, byte-stable textual record: canonical JSON holding the config
# and base64 of each tensor's little-endian float64 bytes. Round-trips
# losslessly; identical models encode to identical bytes.


def _encode_array(a: np.ndarray) -> dict:
    le = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(le.tobytes()).decode("ascii")}


def _decode_array(record: dict) -> np.ndarray:
    raw = base64.b64decode(record["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(record["shape"]).astype(np.float64)


def encode_params(params: ParamSet) -> dict:
    return {name: _encode_array(p) for name, p in params.items()}


def decode_params(record: dict) -> ParamSet:
    return {name: _decode_array(entry) for name, entry in record.items()}


def model_record(model: TxModel | RxModel) -> dict:
    record = {
        "format": "chanfree-model",
        "version": MODEL_FORMAT_VERSION,
        "m": model.m,
        "n": model.n,
        "params": encode_params(model.params),
    }
    if isinstance(model, RxModel):
        record["kind"] = "rx"
        record["variant"] = model.variant
        record["est_width"] = model.est_width
    else:
        record["kind"] = "tx"
    return record


def encode_model(model: TxModel | RxModel) -> bytes:
    return json.dumps(model_record(model), sort_keys=True, separators=(",", ":")).encode("ascii")


def model_from_record(record: dict) -> TxModel | RxModel:
    if record.get("format") != "chanfree-model":
        raise ValueError("not a chanfree model record")
    if record.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {record.get('version')}")
    params = decode_params(record["params"])
    if record["kind"] == "tx":
        return TxModel(m=record["m"], n=record["n"], params=params)
    return RxModel(
        m=record["m"],
        n=record["n"],
        variant=record["variant"],
        params=params,
        est_width=record["est_width"],
    )


def decode_model(blob: bytes) -> TxModel | RxModel:
    return model_from_record(json.loads(blob.decode("ascii")))
