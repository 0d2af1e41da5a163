"""Built-in oracle suite behind the `selftest` CLI subcommand.

Each check pits an analytic backward pass against the central-difference
oracle, or verifies a structural invariant, on small randomized instances.
"""

from __future__ import annotations

import numpy as np

from . import nn
from .baseband import (
    RngStream,
    complex_to_real,
    normalize_energy,
    normalize_energy_backward,
    real_to_complex,
)
from .channels import AwgnAdapter, RayleighAdapter
from .gradcheck import array_mismatch, grads_close
from .policy import PolicyConfig, PolicySample, log_policy_grad_wrt_mean, policy_sample
from .transceiver import RxModel, TxModel, ce_per_example, rx_backward, rx_forward, tx_backward, tx_forward


def _scalar_weights(rng: RngStream, shape) -> np.ndarray:
    return rng.normal(1.0, shape)


def check_dense_gradients(seed: int = 0) -> bool:
    rng = RngStream(seed)
    for act in nn.ACTIVATIONS:
        weight = nn.glorot_uniform(rng, 3, 5)
        bias = rng.normal(0.5, 3)
        inputs = rng.normal(1.0, (4, 5))
        probe = _scalar_weights(rng, (4, 3))

        def objective(params):
            out, _ = nn.dense_forward(params["W"], params["b"], params["r"], act)
            return float((out * probe).sum())

        params = {"W": weight, "b": bias, "r": inputs}
        out, cache = nn.dense_forward(weight, bias, inputs, act)
        d_w, d_b, d_r = nn.dense_backward(cache, probe)
        numeric = nn.finite_diff_grad(objective, params)
        if not grads_close({"W": d_w, "b": d_b, "r": d_r}, numeric):
            return False
    return True


def check_embedding_matches_dense(seed: int = 1) -> bool:
    rng = RngStream(seed)
    m, out_dim, batch = 6, 4, 8
    weight = nn.glorot_uniform(rng, out_dim, m)
    bias = rng.normal(0.5, out_dim)
    ids = rng.integers(0, m, batch)
    probe = _scalar_weights(rng, (batch, out_dim))
    one_hot = np.eye(m)[ids]
    for act in ("linear", "elu"):
        out_e, cache_e = nn.embedding_forward(weight, bias, ids, act)
        out_d, cache_d = nn.dense_forward(weight, bias, one_hot, act)
        if not np.allclose(out_e, out_d, atol=1e-14):
            return False
        d_w_e, d_b_e = nn.embedding_backward(cache_e, probe)
        d_w_d, d_b_d, _ = nn.dense_backward(cache_d, probe)
        if not (np.allclose(d_w_e, d_w_d, atol=1e-12) and np.allclose(d_b_e, d_b_d, atol=1e-12)):
            return False
    return True


def check_softmax_ce_gradient(seed: int = 2) -> bool:
    rng = RngStream(seed)
    logits = rng.normal(1.5, (5, 7))
    labels = rng.integers(0, 7, 5)

    def objective(params):
        probs = nn.softmax(params["z"])
        return float(ce_per_example(probs, labels).sum())

    probs = nn.softmax(logits)
    analytic = nn.softmax_ce_backward(probs, labels)
    numeric = nn.finite_diff_grad(objective, {"z": logits})
    return grads_close({"z": analytic}, numeric)


def check_normalization_gradient(seed: int = 3) -> bool:
    rng = RngStream(seed)
    reals = rng.normal(1.0, (3, 8))
    probe = _scalar_weights(rng, (3, 8))

    def objective(params):
        normalized, _ = normalize_energy(real_to_complex(params["r"]))
        return float((complex_to_real(normalized) * probe).sum())

    _, cache = normalize_energy(real_to_complex(reals))
    analytic = normalize_energy_backward(cache, probe)
    numeric = nn.finite_diff_grad(objective, {"r": reals})
    return grads_close({"r": analytic}, numeric)


def check_tx_gradient(seed: int = 4) -> bool:
    rng = RngStream(seed)
    tx = TxModel.init(4, 2, rng)
    msgs = rng.integers(0, 4, 6)
    probe = _scalar_weights(rng, (6, 4))

    def objective(params):
        model = TxModel(m=tx.m, n=tx.n, params=params)
        symbols, _ = tx_forward(model, msgs)
        return float((complex_to_real(symbols) * probe).sum())

    _, cache = tx_forward(tx, msgs)
    analytic = tx_backward(tx, cache, probe)
    numeric = nn.finite_diff_grad(objective, tx.params)
    return grads_close(analytic, numeric)


def check_rx_gradient(variant: str, seed: int = 5) -> bool:
    rng = RngStream(seed)
    m, n = 4, 2
    rx = RxModel.init(m, n, variant, rng, est_width=6)
    if variant == "rbf":
        # move the estimate head off its zero init so no row sits in the
        # guarded-division clamp or on a ReLU kink (checked separately)
        rx.params["est2.b"] = np.array([0.8, -0.5])
        rx.params["h1.b"] = rng.normal(0.1, m)
    received = rng.cnormal((5, n), 1.0)
    msgs = rng.integers(0, m, 5)

    def objective(params):
        model = RxModel(m=m, n=n, variant=variant, params=params, est_width=6)
        probs, _ = rx_forward(model, received)
        return float(ce_per_example(probs, msgs).sum())

    probs, cache = rx_forward(rx, received)
    d_logits = nn.softmax_ce_backward(probs, msgs)
    analytic, d_received = rx_backward(rx, cache, d_logits)
    numeric = nn.finite_diff_grad(objective, rx.params)
    if not grads_close(analytic, numeric):
        return False

    def input_objective(params):
        probs2, _ = rx_forward(rx, real_to_complex(params["y"]))
        return float(ce_per_example(probs2, msgs).sum())

    numeric_in = nn.finite_diff_grad(input_objective, {"y": complex_to_real(received)})
    return grads_close({"y": d_received}, numeric_in)


def check_policy_log_gradient(seed: int = 6) -> bool:
    """Score factor vs finite differences of the log-density w.r.t. the mean."""
    rng = RngStream(seed)
    cfg = PolicyConfig(0.02)
    x = rng.cnormal((3, 2), 1.0)
    sample = policy_sample(x, cfg, rng)
    root = np.sqrt(1.0 - cfg.variance)

    def log_density(params):
        mean = real_to_complex(params["x"])
        residual = sample.x_p - root * mean
        return float(-(np.abs(residual) ** 2).sum() / cfg.variance)

    # d log pi / d x = root * (d log pi / d mean); the helper returns the
    # mean-side factor already multiplied by root (chain through scaling)
    numeric = nn.finite_diff_grad(log_density, {"x": complex_to_real(x)})
    analytic = log_policy_grad_wrt_mean(PolicySample(x, sample.x_p, None), cfg)
    bad = array_mismatch(analytic, numeric["x"], rel=1e-6, absolute=1e-8)
    return bad is None


def check_adapter_gradients(seed: int = 7) -> bool:
    rng = RngStream(seed)
    x = rng.cnormal((4, 3), 1.0)
    probe = _scalar_weights(rng, (4, 6))

    awgn = AwgnAdapter(0.3)
    if not np.array_equal(awgn.backward(None, probe), probe):
        return False

    rbf = RayleighAdapter(0.0)
    y, gain = rbf.transmit_diff(x, rng.derive(1))

    def objective(params):
        out = gain[:, None] * real_to_complex(params["x"])
        return float((complex_to_real(out) * probe).sum())

    analytic = rbf.backward(gain, probe)
    numeric = nn.finite_diff_grad(objective, {"x": complex_to_real(x)})
    return grads_close({"x": analytic}, numeric)


def check_energy_invariant(seed: int = 8) -> bool:
    rng = RngStream(seed)
    tx = TxModel.init(16, 4, rng)
    msgs = rng.integers(0, 16, 64)
    symbols, _ = tx_forward(tx, msgs)
    energy = (np.abs(symbols) ** 2).sum(axis=1)
    return bool(np.allclose(energy, tx.n, rtol=1e-12, atol=0))


CHECKS = [
    ("dense layer gradients (all activations)", check_dense_gradients),
    ("embedding layer matches dense on one-hot", check_embedding_matches_dense),
    ("softmax cross-entropy gradient", check_softmax_ce_gradient),
    ("energy normalization gradient", check_normalization_gradient),
    ("transmitter end-to-end gradient", check_tx_gradient),
    ("receiver gradient (awgn variant)", lambda: check_rx_gradient("awgn")),
    ("receiver gradient (rbf variant, through division)", lambda: check_rx_gradient("rbf")),
    ("exploration log-density gradient", check_policy_log_gradient),
    ("channel adapter gradients", check_adapter_gradients),
    ("transmit energy invariant", check_energy_invariant),
]


def run_selftest(verbose: bool = True) -> bool:
    ok = True
    for name, check in CHECKS:
        passed = bool(check())
        ok = ok and passed
        if verbose:
            print(f"{'ok  ' if passed else 'FAIL'} {name}")
    return ok
