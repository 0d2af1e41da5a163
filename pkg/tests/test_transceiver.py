"""Transmitter/receiver networks, loss, decisions, serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chanfree import nn
from chanfree.baseband import RngStream, complex_to_real, real_to_complex
from chanfree.gradcheck import assert_grads_close
from chanfree.transceiver import (
    EPS_DIV,
    PROB_CLIP,
    RxCache,
    RxModel,
    TxModel,
    _divider_backward,
    ce_per_example,
    decode_model,
    encode_model,
    hard_decision,
    rx_backward,
    rx_forward,
    tx_backward,
    tx_forward,
)


def make_tx(m=4, n=2, seed=0):
    return TxModel.init(m, n, RngStream(seed))


def make_rx(variant, m=4, n=2, seed=1, est_width=6, generic_point=True):
    rng = RngStream(seed)
    rx = RxModel.init(m, n, variant, rng, est_width)
    if generic_point and variant == "rbf":
        # keep the oracle instance away from the division clamp and kinks
        rx.params["est2.b"] = np.array([0.9, -0.4])
        rx.params["h1.b"] = rng.normal(0.1, m)
    return rx


class TestTxForward:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_energy_invariant_any_params(self, seed):
        tx = make_tx(seed=seed)
        msgs = RngStream(seed).integers(0, 4, 16)
        symbols, _ = tx_forward(tx, msgs)
        energy = (np.abs(symbols) ** 2).sum(axis=1)
        np.testing.assert_allclose(energy, tx.n, rtol=1e-12)

    def test_identical_messages_identical_rows(self):
        tx = make_tx()
        symbols, _ = tx_forward(tx, np.array([2, 2, 2]))
        assert np.array_equal(symbols[0], symbols[1])
        assert np.array_equal(symbols[1], symbols[2])

    def test_invalid_message_raises(self):
        with pytest.raises(ValueError):
            tx_forward(make_tx(), np.array([4]))

    @pytest.mark.parametrize("seed", range(3))
    def test_gradient_matches_finite_differences(self, seed):
        tx = make_tx(seed=seed)
        rng = RngStream(seed + 100)
        msgs = rng.integers(0, 4, 5)
        probe = rng.normal(1.0, (5, 4))

        def objective(params):
            model = TxModel(m=tx.m, n=tx.n, params=params)
            symbols, _ = tx_forward(model, msgs)
            return float((complex_to_real(symbols) * probe).sum())

        _, cache = tx_forward(tx, msgs)
        analytic = tx_backward(tx, cache, probe)
        numeric = nn.finite_diff_grad(objective, tx.params)
        assert_grads_close(analytic, numeric)


class TestTxBackward:
    def test_zero_upstream(self):
        tx = make_tx()
        _, cache = tx_forward(tx, np.array([0, 1]))
        grads = tx_backward(tx, cache, np.zeros((2, 4)))
        assert all(not g.any() for g in grads.values())

    def test_linearity(self):
        tx = make_tx()
        rng = RngStream(9)
        _, cache = tx_forward(tx, np.array([0, 1, 2]))
        d1 = rng.normal(1.0, (3, 4))
        d2 = rng.normal(1.0, (3, 4))
        lhs = tx_backward(tx, cache, 2.0 * d1 - 3.0 * d2)
        g1 = tx_backward(tx, cache, d1)
        g2 = tx_backward(tx, cache, d2)
        for key in lhs:
            np.testing.assert_allclose(lhs[key], 2.0 * g1[key] - 3.0 * g2[key], atol=1e-10)


class TestRxForward:
    @pytest.mark.parametrize("variant", ["awgn", "rbf"])
    def test_rows_on_simplex(self, variant):
        rx = make_rx(variant)
        y = RngStream(3).cnormal((10, 2), 1.0)
        probs, _ = rx_forward(rx, y)
        assert (probs >= 0).all()
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_unit_estimate_reproduces_awgn_tail(self):
        # force h_hat = 1 + 0j by zeroing the estimator path
        rx = make_rx("rbf", generic_point=False)
        rx.params["est1.W"] = np.zeros_like(rx.params["est1.W"])
        rx.params["est1.b"] = np.zeros_like(rx.params["est1.b"])
        rx.params["est2.W"] = np.zeros_like(rx.params["est2.W"])
        rx.params["est2.b"] = np.array([1.0, 0.0])
        awgn = RxModel(m=rx.m, n=rx.n, variant="awgn", params={
            "h1.W": rx.params["h1.W"], "h1.b": rx.params["h1.b"],
            "out.W": rx.params["out.W"], "out.b": rx.params["out.b"],
        })
        y = RngStream(4).cnormal((6, 2), 1.0)
        probs_rbf, _ = rx_forward(rx, y)
        probs_awgn, _ = rx_forward(awgn, y)
        np.testing.assert_allclose(probs_rbf, probs_awgn, atol=1e-12)

    def test_wrong_symbol_count_raises(self):
        with pytest.raises(nn.DimensionError):
            rx_forward(make_rx("awgn"), np.zeros((2, 3), dtype=complex))

    @pytest.mark.parametrize("variant", ["awgn", "rbf"])
    @pytest.mark.parametrize("seed", range(3))
    def test_parameter_gradients(self, variant, seed):
        rx = make_rx(variant, seed=seed)
        rng = RngStream(seed + 50)
        y = rng.cnormal((5, 2), 1.0)
        msgs = rng.integers(0, 4, 5)

        def objective(params):
            model = RxModel(m=4, n=2, variant=variant, params=params, est_width=6)
            probs, _ = rx_forward(model, y)
            return float(ce_per_example(probs, msgs).sum())

        probs, cache = rx_forward(rx, y)
        analytic, _ = rx_backward(rx, cache, nn.softmax_ce_backward(probs, msgs))
        numeric = nn.finite_diff_grad(objective, rx.params)
        assert_grads_close(analytic, numeric)

    @pytest.mark.parametrize("variant", ["awgn", "rbf"])
    def test_input_gradient(self, variant):
        rx = make_rx(variant, seed=8)
        rng = RngStream(21)
        y = rng.cnormal((4, 2), 1.0)
        msgs = rng.integers(0, 4, 4)
        probs, cache = rx_forward(rx, y)
        _, d_received = rx_backward(rx, cache, nn.softmax_ce_backward(probs, msgs))

        def objective(params):
            probs2, _ = rx_forward(rx, real_to_complex(params["y"]))
            return float(ce_per_example(probs2, msgs).sum())

        numeric = nn.finite_diff_grad(objective, {"y": complex_to_real(y)})
        assert_grads_close({"y": d_received}, numeric)


class TestDividerBackward:
    def _cache_for(self, y, h):
        mag2 = np.abs(h) ** 2
        denom = np.maximum(mag2, EPS_DIV)
        return RxCache("rbf", None, None, y, h, denom, mag2 < EPS_DIV, None, None)

    @pytest.mark.parametrize("scale,label", [(1.0, "generic"), (1e-4, "clamped")])
    def test_matches_finite_differences(self, scale, label):
        # linear probe downstream keeps finite differences exact in the
        # clamped region, where the map is linear in h
        rng = RngStream(31)
        y = rng.cnormal((3, 2), 1.0)
        h = scale * rng.cnormal(3, 1.0)
        probe = rng.normal(1.0, (3, 4))
        cache = self._cache_for(y, h)
        d_y, d_h = _divider_backward(cache, probe)

        def objective(params):
            hh = params["h"][:, 0] + 1j * params["h"][:, 1]
            denom = np.maximum(np.abs(hh) ** 2, EPS_DIV)
            q = real_to_complex(params["yr"]) * np.conj(hh)[:, None] / denom[:, None]
            return float((complex_to_real(q) * probe).sum())

        params = {"h": np.stack([h.real, h.imag], axis=1), "yr": complex_to_real(y)}
        numeric = nn.finite_diff_grad(objective, params)
        assert_grads_close({"h": d_h, "yr": d_y}, numeric)


class TestCePerExample:
    def test_certain_correct_prediction(self):
        probs = np.array([[0.0, 1.0]])
        assert ce_per_example(probs, np.array([1]))[0] == 0.0

    def test_uniform_256(self):
        probs = np.full((1, 256), 1.0 / 256)
        assert ce_per_example(probs, np.array([17]))[0] == pytest.approx(math.log(256), rel=1e-12)

    def test_clipping_floor(self):
        probs = np.array([[1.0, 0.0]])
        loss = ce_per_example(probs, np.array([1]))[0]
        assert loss == pytest.approx(-math.log(PROB_CLIP), rel=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_nonnegative(self, seed):
        rng = RngStream(seed)
        probs = nn.softmax(rng.normal(3.0, (6, 5)))
        msgs = rng.integers(0, 5, 6)
        assert (ce_per_example(probs, msgs) >= 0).all()

    def test_invalid_label(self):
        with pytest.raises(ValueError):
            ce_per_example(np.array([[1.0]]), np.array([1]))


class TestHardDecision:
    def test_argmax(self):
        assert hard_decision(np.array([[0.1, 0.7, 0.2]]))[0] == 1

    def test_one_hot(self):
        assert hard_decision(np.eye(5)[[3]])[0] == 3

    def test_tie_breaks_low_index(self):
        assert hard_decision(np.array([[0.5, 0.5]]))[0] == 0

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_invariant_under_increasing_transform(self, seed):
        probs = nn.softmax(RngStream(seed).normal(2.0, (4, 6)))
        monotone = np.exp(3.0 * probs) + probs
        np.testing.assert_array_equal(hard_decision(probs), hard_decision(monotone))


class TestSerialization:
    @pytest.mark.parametrize("model_fn", [
        lambda: make_tx(seed=11),
        lambda: make_rx("awgn", seed=12),
        lambda: make_rx("rbf", seed=13),
    ])
    def test_round_trip_lossless(self, model_fn):
        model = model_fn()
        blob = encode_model(model)
        restored = decode_model(blob)
        assert type(restored) is type(model)
        assert restored.params.keys() == model.params.keys()
        for key in model.params:
            assert np.array_equal(restored.params[key], model.params[key])

    def test_byte_stable(self):
        model = make_tx(seed=14)
        blob1 = encode_model(model)
        blob2 = encode_model(decode_model(blob1))
        assert blob1 == blob2

    def test_rejects_foreign_blob(self):
        with pytest.raises(ValueError):
            decode_model(b'{"format": "something-else"}')
