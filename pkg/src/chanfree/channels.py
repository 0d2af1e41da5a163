"""Black-box channels and the differentiable adapters for the supervised
baseline.

A black-box channel exposes exactly one operation, transmit(x, rng); fading
gains and noise never leave it. The adapters exist only for the supervised
path and backpropagate through one sampled realization, treating gain and
noise as constants of that realization.
"""

from __future__ import annotations

import numpy as np

from .baseband import RngStream, complex_to_real, real_to_complex, sample_cgaussian

CHANNEL_KINDS = ("awgn", "rbf", "quantizer")


def awgn_transmit(x: np.ndarray, noise_var: float, rng: RngStream) -> np.ndarray:
    """y = x + n, n i.i.d. CN(0, noise_var) per symbol."""
    if noise_var < 0:
        raise ValueError(f"noise variance must be nonnegative, got {noise_var}")
    return x + rng.cnormal(x.shape, noise_var)


def _fading_gains(rows: int, block_messages: int, rng: RngStream) -> np.ndarray:
    """One CN(0,1) gain per coherence block of consecutive rows.

    block_messages = 1 gives an independent gain per message; 0 means the
    whole transmission shares a single gain (one coherence block per call).
    """
    if block_messages < 0:
        raise ValueError(f"block_messages must be nonnegative, got {block_messages}")
    if block_messages in (0, rows) or block_messages > rows:
        return np.repeat(rng.cnormal(1, 1.0), rows)
    blocks = -(-rows // block_messages)
    return np.repeat(rng.cnormal(blocks, 1.0), block_messages)[:rows]


def rbf_transmit(
    x: np.ndarray,
    noise_var: float,
    rng: RngStream,
    block_messages: int = 1,
    _pinned_gain: np.ndarray | None = None,
) -> np.ndarray:
    """Rayleigh block fading: y = h * x + n, gains per coherence block.

    By default every message (row of n symbols) is its own block with an
    independent h ~ CN(0,1). Gains are drawn before the noise so fixed-seed
    runs replay exactly. _pinned_gain is a test-only seam; the channel
    classes never expose it.
    """
    if noise_var < 0:
        raise ValueError(f"noise variance must be nonnegative, got {noise_var}")
    gain = _fading_gains(x.shape[0], block_messages, rng) if _pinned_gain is None else _pinned_gain
    return gain[:, None] * x + rng.cnormal(x.shape, noise_var)


def quantizer_transmit(x: np.ndarray, noise_var: float, rng: RngStream) -> np.ndarray:
    """Noise, then per-component sign quantization to {(+-1 +-1j)/sqrt(2)}.

    Deliberately non-differentiable; preserves unit average symbol energy.
    """
    if noise_var < 0:
        raise ValueError(f"noise variance must be nonnegative, got {noise_var}")
    noisy = x + rng.cnormal(x.shape, noise_var)
    re = np.where(noisy.real >= 0.0, 1.0, -1.0)
    im = np.where(noisy.imag >= 0.0, 1.0, -1.0)
    return (re + 1j * im) / np.sqrt(2.0)


class AwgnChannel:
    def __init__(self, noise_var: float):
        self.noise_var = noise_var

    def transmit(self, x: np.ndarray, rng: RngStream) -> np.ndarray:
        return awgn_transmit(x, self.noise_var, rng)


class RayleighBlockFadingChannel:
    def __init__(self, noise_var: float):
        self.noise_var = noise_var

    def transmit(self, x: np.ndarray, rng: RngStream) -> np.ndarray:
        return rbf_transmit(x, self.noise_var, rng)


class QuantizerChannel:
    def __init__(self, noise_var: float):
        self.noise_var = noise_var

    def transmit(self, x: np.ndarray, rng: RngStream) -> np.ndarray:
        return quantizer_transmit(x, self.noise_var, rng)


def make_channel(kind: str, noise_var: float):
    if kind == "awgn":
        return AwgnChannel(noise_var)
    if kind == "rbf":
        return RayleighBlockFadingChannel(noise_var)
    if kind == "quantizer":
        return QuantizerChannel(noise_var)
    raise ValueError(f"channel kind must be one of {CHANNEL_KINDS}, got {kind!r}")


class AwgnAdapter:
    """Differentiable view of the AWGN channel for the supervised baseline."""

    def __init__(self, noise_var: float):
        self.noise_var = noise_var

    def transmit_diff(self, x: np.ndarray, rng: RngStream):
        return awgn_transmit(x, self.noise_var, rng), None

    def backward(self, cache, upstream_real: np.ndarray) -> np.ndarray:
        # additive noise is a constant of the realization
        return upstream_real


class RayleighAdapter:
    """Differentiable view of the block-fading channel (gain held fixed)."""

    def __init__(self, noise_var: float):
        self.noise_var = noise_var

    def transmit_diff(self, x: np.ndarray, rng: RngStream):
        gain = rng.cnormal(x.shape[0], 1.0)
        y = gain[:, None] * x + rng.cnormal(x.shape, self.noise_var)
        return y, gain

    def backward(self, gain: np.ndarray, upstream_real: np.ndarray) -> np.ndarray:
        # transpose of the per-symbol rotation-scaling by h is rotation by conj(h)
        g = real_to_complex(upstream_real)
        return complex_to_real(g * np.conj(gain)[:, None])


def make_adapter(kind: str, noise_var: float):
    if kind == "awgn":
        return AwgnAdapter(noise_var)
    if kind == "rbf":
        return RayleighAdapter(noise_var)
    if kind == "quantizer":
        raise ValueError("the quantizer channel is non-differentiable and has no adapter")
    raise ValueError(f"channel kind must be one of {CHANNEL_KINDS}, got {kind!r}")
