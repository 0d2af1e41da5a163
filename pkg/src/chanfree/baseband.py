"""Complex baseband semantics: packing, energy normalization, SNR, noise.

Complex symbols are numpy complex128 arrays of shape (batch, n); their real
stacked view is (batch, 2n) with even columns holding real parts and odd
columns imaginary parts. CN(0, v) means independent N(0, v/2) real and
imaginary parts.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .nn import DimensionError


class DegenerateInputError(ValueError):
    """A row with (near-)zero energy cannot be normalized."""


class RngStream:
    """Deterministic, splittable random stream.

    A stream is addressed by (seed, path); equal addresses yield identical
    sequences on every platform (numpy PCG64 under a SeedSequence). derive()
    creates an independent child stream without consuming parent state, so
    stream layout does not depend on execution order.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def derive(self, *path: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(path))

    def integers(self, low: int, high: int, size: int | tuple[int, ...]) -> np.ndarray:
        return self._gen.integers(low, high, size=size, dtype=np.int64)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, scale: float, size) -> np.ndarray:
        return self._gen.normal(0.0, scale, size)

    def cnormal(self, size, variance: float) -> np.ndarray:
        """CN(0, variance) samples: real/imag parts each N(0, variance/2)."""
        if variance < 0:
            raise ValueError(f"variance must be nonnegative, got {variance}")
        shape = (size,) if isinstance(size, int) else tuple(size)
        parts = self._gen.normal(0.0, np.sqrt(variance / 2.0), shape + (2,))
        return parts[..., 0] + 1j * parts[..., 1]

    def state(self) -> dict:
        return {"seed": self.seed, "path": list(self.path), "bitgen": self._gen.bit_generator.state}

    @classmethod
    def from_state(cls, record: dict) -> "RngStream":
        stream = cls(record["seed"], tuple(record["path"]))
        stream._gen.bit_generator.state = record["bitgen"]
        return stream


def sample_cgaussian(count: int, variance: float, rng: RngStream) -> np.ndarray:
    """i.i.d. CN(0, variance) vector of the given length."""
    return rng.cnormal(count, variance)


def real_to_complex(reals: np.ndarray) -> np.ndarray:
    """Pack consecutive real pairs (even, odd) into (real, imag) of one symbol."""
    if reals.ndim != 2 or reals.shape[1] % 2 != 0:
        raise DimensionError(
            f"expected (batch, 2n) reals with even inner dimension, got {reals.shape}"
        )
    return reals[:, 0::2] + 1j * reals[:, 1::2]


def complex_to_real(symbols: np.ndarray) -> np.ndarray:
    """Inverse of real_to_complex; bit-exact round trip."""
    batch, n = symbols.shape
    out = np.empty((batch, 2 * n))
    out[:, 0::2] = symbols.real
    out[:, 1::2] = symbols.imag
    return out


class NormCache(NamedTuple):
    reals: np.ndarray
    energy: np.ndarray
    scale: np.ndarray


def normalize_energy(symbols: np.ndarray) -> tuple[np.ndarray, NormCache]:
    """Scale each row x so that ||x||^2 = n (unit average energy per symbol)."""
    n = symbols.shape[1]
    reals = complex_to_real(symbols)
    energy = (reals * reals).sum(axis=1)
    if (energy <= 1e-20).any():
        raise DegenerateInputError("cannot normalize a (near-)zero-energy row")
    scale = np.sqrt(n / energy)
    return symbols * scale[:, None], NormCache(reals, energy, scale)


def normalize_energy_backward(cache: NormCache, upstream: np.ndarray) -> np.ndarray:
    """Gradient through the per-row scaling, in stacked-real coordinates."""
    if upstream.shape != cache.reals.shape:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match forward input {cache.reals.shape}"
        )
    inner = (cache.reals * upstream).sum(axis=1) / cache.energy
    return cache.scale[:, None] * (upstream - cache.reals * inner[:, None])


def snr_db_to_noise_variance(snr_db: float) -> float:
    """Noise variance for unit average symbol energy: 10^(-snr_db/10)."""
    return 10.0 ** (-snr_db / 10.0)
