"""Rayleigh flat-fading channel and AWGN sampling with reproducible
counter-based random streams.

Streams are numpy Philox generators keyed by (seed, stream_id): the same pair
always reproduces the same draw sequence, and distinct stream_ids are
independent, so parallel consumers need no coordination. SNR is defined as
average received SNR per receive antenna under unit per-antenna symbol
energy: sigma2 = nt / 10^(snr_db/10).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import numerics

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ChannelModel:
    """Flat Rayleigh fading dimensions and antenna correlation (rho 0 = i.i.d.)."""

    nt: int
    nr: int
    rho_tx: float = 0.0
    rho_rx: float = 0.0

    def __post_init__(self):
        if self.nt < 1 or self.nr < 1:
            raise ValueError("antenna counts must be positive")
        if self.nr < self.nt:
            raise ValueError(f"need nr >= nt, got nr={self.nr} < nt={self.nt}")
        for rho in (self.rho_tx, self.rho_rx):
            if not 0.0 <= rho < 1.0:
                raise ValueError(f"correlation rho must be in [0, 1), got {rho}")

    @property
    def is_iid(self) -> bool:
        return self.rho_tx == 0.0 and self.rho_rx == 0.0


@dataclass(frozen=True)
class NoiseSpec:
    """Total complex noise variance per receive antenna (0 = noiseless mode)."""

    sigma2: float

    def __post_init__(self):
        if not self.sigma2 >= 0.0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")


class RngStream:
    """Reproducible random stream identified by (seed, stream_id)."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = seed
        self.stream_id = stream_id
        key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))


_local = threading.local()


def _borrowed_generator(seed: int, stream_id: int) -> np.random.Generator:
    """Thread-local generator rekeyed to (seed, stream_id).

    Produces the exact draw sequence of RngStream(seed, stream_id).generator
    without paying Philox construction cost; valid only until the next call
    on the same thread.
    """
    pair = getattr(_local, "pair", None)
    if pair is None:
        bg = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
        pair = _local.pair = (bg, np.random.Generator(bg))
    bg, gen = pair
    bg.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": np.zeros(4, dtype=np.uint64),
            "key": np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64),
        },
        "buffer": np.zeros(4, dtype=np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }
    return gen


def _complex_normal(g: np.random.Generator, shape) -> np.ndarray:
    """CN(0,1) samples: independent N(0, 1/2) real and imaginary parts."""
    ri = g.standard_normal(tuple(shape) + (2,))
    return np.sqrt(0.5) * ri.view(np.complex128)[..., 0]


def sample_complex_gaussian(rng: RngStream) -> complex:
    """One CN(0,1) draw."""
    return complex(_complex_normal(rng.generator, ()))


def sample_iid_channel(model: ChannelModel, rng: RngStream) -> np.ndarray:
    """nr x nt matrix of independent CN(0,1) gains."""
    return _complex_normal(rng.generator, (model.nr, model.nt))


def correlation_matrix(n: int, rho: float) -> np.ndarray:
    """Exponential correlation matrix: entry (i, j) = rho^|i-j|."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    idx = np.arange(n)
    return (rho ** np.abs(idx[:, None] - idx[None, :])).astype(np.complex128)


@lru_cache(maxsize=64)
def _correlation_factor(n: int, rho: float) -> np.ndarray:
    L = numerics.cholesky(correlation_matrix(n, rho))
    L.setflags(write=False)
    return L


def sample_correlated_channel(model: ChannelModel, rng: RngStream) -> np.ndarray:
    """Kronecker-correlated channel L_rx @ H_w @ L_tx^H with H_w i.i.d. CN(0,1).

    Per-entry marginals stay CN(0,1); E[H H^H] / nt equals the receive-side
    correlation matrix.
    """
    hw = _complex_normal(rng.generator, (model.nr, model.nt))
    if model.is_iid:
        return hw
    l_rx = _correlation_factor(model.nr, model.rho_rx)
    l_tx = _correlation_factor(model.nt, model.rho_tx)
    return l_rx @ hw @ l_tx.conj().T


def sample_channel(model: ChannelModel, rng: RngStream) -> np.ndarray:
    """Draw per the model's correlation setting (i.i.d. fast path for rho = 0)."""
    if model.is_iid:
        return sample_iid_channel(model, rng)
    return sample_correlated_channel(model, rng)


def noise_variance_for_snr(snr_db: float, nt: int) -> NoiseSpec:
    """Per-receive-antenna noise variance for the given average received SNR.

    sigma2 = nt / 10^(snr_db/10); snr_db = +inf yields sigma2 = 0 (noiseless).
    """
    if nt < 1:
        raise ValueError("nt must be >= 1")
    return NoiseSpec(sigma2=nt / 10.0 ** (snr_db / 10.0))


def add_awgn(s, noise: NoiseSpec, rng: RngStream) -> np.ndarray:
    """Add independent CN(0, sigma2) noise per element; exact passthrough at sigma2 = 0."""
    s = np.asarray(s, dtype=np.complex128)
    return s + np.sqrt(noise.sigma2) * _complex_normal(rng.generator, s.shape)
