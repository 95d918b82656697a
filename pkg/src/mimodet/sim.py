"""Monte Carlo SER estimation across an SNR sweep.

Every configured detector sees the same (x, H, y) realization per channel
use (common random numbers), each channel use draws from its own Philox
stream keyed by (seed, use_index), and early-stop checks happen only at
fixed 1024-use batch boundaries — so results are bit-identical regardless of
thread count or scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import (
    ChannelModel,
    NoiseSpec,
    _borrowed_generator,
    _complex_normal,
    noise_variance_for_snr,
    sample_correlated_channel,
)
from .detect import DetectorSpec, run_detector
from .modem import MODULATION_NAMES, constellation_by_name
from .numerics import SingularMatrixError

BATCH_SIZE = 1024
WILSON_Z95 = 1.96

# Sub-stream id for resampled draws: use_index + attempt << 56.
_ATTEMPT_SHIFT = 56
_MAX_ATTEMPTS = 64


class ConfigError(ValueError):
    """Invalid simulation configuration."""


@dataclass(frozen=True)
class SimulationConfig:
    """Complete description of one SER sweep; hashable and reproducible."""

    nt: int
    nr: int
    modulation: str
    detectors: tuple[DetectorSpec, ...]
    snr_grid_db: tuple[float, ...]
    rho: float = 0.0
    max_channel_uses: int = 10000
    min_errors: int = 200  # 0 disables early stopping
    seed: int = 0
    threads: int = 1
    freeze_h: str | None = None

    def __post_init__(self):
        if self.nt < 1:
            raise ConfigError(f"nt must be >= 1, got {self.nt}")
        if self.nr < self.nt:
            raise ConfigError(f"need nr >= nt, got nr={self.nr} < nt={self.nt}")
        if self.modulation not in MODULATION_NAMES:
            raise ConfigError(f"unknown modulation {self.modulation!r}")
        if not self.detectors:
            raise ConfigError("detectors must be a nonempty list")
        if not all(isinstance(d, DetectorSpec) for d in self.detectors):
            raise ConfigError("detectors must be DetectorSpec instances")
        if any(b <= a for a, b in zip(self.snr_grid_db, self.snr_grid_db[1:])):
            raise ConfigError("snr_grid_db must be strictly increasing")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError(f"rho must be in [0, 1), got {self.rho}")
        if self.max_channel_uses < 1:
            raise ConfigError(f"max_channel_uses must be >= 1, got {self.max_channel_uses}")
        if self.max_channel_uses >= 1 << _ATTEMPT_SHIFT:
            raise ConfigError(f"max_channel_uses must be below 2^{_ATTEMPT_SHIFT}")
        if self.min_errors < 0:
            raise ConfigError(f"min_errors must be >= 0, got {self.min_errors}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.freeze_h not in (None, "identity"):
            raise ConfigError(f"freeze_h must be 'identity' or unset, got {self.freeze_h!r}")
        order = MODULATION_NAMES[self.modulation][0]
        for spec in self.detectors:
            if spec.algorithm == "ml" and order**self.nt > spec.ml_candidate_guard:
                raise ConfigError(
                    f"ml candidate space {order}^{self.nt} = {order**self.nt} "
                    f"exceeds guard {spec.ml_candidate_guard}"
                )


@dataclass(frozen=True)
class SerPoint:
    """SER estimate for one (SNR, detector) pair with a Wilson 95% interval."""

    snr_db: float
    detector: str
    channel_uses: int
    symbol_errors: int
    ser: float
    ci95_lo: float
    ci95_hi: float


@dataclass(frozen=True)
class SerCurve:
    """All SerPoints of one sweep plus the resampled-draw diagnostics tally."""

    config: SimulationConfig
    points: tuple[SerPoint, ...]
    resampled_draws: int = 0


@dataclass(frozen=True)
class _Session:
    constellation: object
    model: ChannelModel
    frozen_h: np.ndarray | None


@lru_cache(maxsize=16)
def _session(cfg: SimulationConfig) -> _Session:
    c = constellation_by_name(cfg.modulation)
    model = ChannelModel(nt=cfg.nt, nr=cfg.nr, rho_tx=cfg.rho, rho_rx=cfg.rho)
    frozen = None
    if cfg.freeze_h == "identity":
        frozen = np.eye(cfg.nr, cfg.nt, dtype=np.complex128)
        frozen.setflags(write=False)
    return _Session(constellation=c, model=model, frozen_h=frozen)


def wilson_interval(errors: int, n: int, z: float = WILSON_Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion at quantile z."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= errors <= n:
        raise ValueError(f"need 0 <= errors <= n, got errors={errors}, n={n}")
    p = errors / n
    z2n = z * z / n
    denom = 1.0 + z2n
    center = (p + z2n / 2.0) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2n / (4.0 * n)) / denom
    # the boundary cases are analytically exact; don't leave them to rounding
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == n else min(1.0, center + half)
    return lo, hi


def _channel_use(cfg: SimulationConfig, sess: _Session, noise: NoiseSpec, use_index: int):
    """One channel use on the borrowed per-use stream; returns (counts, resamples)."""
    c = sess.constellation
    scale = math.sqrt(noise.sigma2)
    for attempt in range(_MAX_ATTEMPTS):
        g = _borrowed_generator(cfg.seed, use_index + (attempt << _ATTEMPT_SHIFT))
        x = g.integers(0, c.order, size=cfg.nt)
        if sess.frozen_h is not None:
            h = sess.frozen_h
        elif sess.model.is_iid:
            h = _complex_normal(g, (cfg.nr, cfg.nt))
        else:
            h = sample_correlated_channel(sess.model, _Borrowed(g))
        y = h @ c.points[x] + scale * _complex_normal(g, (cfg.nr,))
        counts = np.zeros(len(cfg.detectors), dtype=np.int64)
        try:
            for i, spec in enumerate(cfg.detectors):
                result = run_detector(spec, y, h, noise, c)
                counts[i] = np.count_nonzero(result.estimate != x)
        except SingularMatrixError:
            continue
        return counts, attempt
    raise RuntimeError(f"channel draw at use {use_index} stayed rank-deficient after {_MAX_ATTEMPTS} attempts")


class _Borrowed:
    """Adapter giving a bare Generator the RngStream .generator surface."""

    __slots__ = ("generator",)

    def __init__(self, generator):
        self.generator = generator


def run_channel_use(cfg: SimulationConfig, snr_db: float, use_index: int):
    """One channel use: draw symbols, channel and noise from the stream keyed
    by (seed, use_index), run every configured detector on the same
    (x, H, y) triple.

    Returns (per-detector wrong-symbol counts, resampled-draw count). A
    rank-deficient channel draw is retried on the next sub-stream.
    """
    return _channel_use(cfg, _session(cfg), noise_variance_for_snr(snr_db, cfg.nt), use_index)


def _run_range(cfg: SimulationConfig, snr_db: float, start: int, count: int):
    sess = _session(cfg)
    noise = noise_variance_for_snr(snr_db, cfg.nt)
    errors = np.zeros(len(cfg.detectors), dtype=np.int64)
    resamples = 0
    for u in range(start, start + count):
        counts, att = _channel_use(cfg, sess, noise, u)
        errors += counts
        resamples += att
    return errors, resamples


def estimate_ser(cfg: SimulationConfig) -> SerCurve:
    """Run the configured sweep: per SNR point, channel uses accumulate until
    every detector has min_errors symbol errors (checked at batch boundaries)
    or max_channel_uses is reached."""
    n_det = len(cfg.detectors)
    points: list[SerPoint] = []
    total_resamples = 0
    executor = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        for snr_db in cfg.snr_grid_db:
            errors = np.zeros(n_det, dtype=np.int64)
            uses = 0
            while uses < cfg.max_channel_uses:
                batch = min(BATCH_SIZE, cfg.max_channel_uses - uses)
                if executor is None:
                    got, res = _run_range(cfg, snr_db, uses, batch)
                    errors += got
                    total_resamples += res
                else:
                    bounds = np.linspace(uses, uses + batch, cfg.threads + 1).astype(int)
                    jobs = [
                        executor.submit(_run_range, cfg, snr_db, int(a), int(b - a))
                        for a, b in zip(bounds[:-1], bounds[1:])
                        if b > a
                    ]
                    for job in jobs:
                        got, res = job.result()
                        errors += got
                        total_resamples += res
                uses += batch
                if cfg.min_errors and bool(np.all(errors >= cfg.min_errors)):
                    break
            n = cfg.nt * uses
            for i, spec in enumerate(cfg.detectors):
                lo, hi = wilson_interval(int(errors[i]), n)
                points.append(
                    SerPoint(
                        snr_db=snr_db,
                        detector=spec.algorithm,
                        channel_uses=uses,
                        symbol_errors=int(errors[i]),
                        ser=int(errors[i]) / n,
                        ci95_lo=lo,
                        ci95_hi=hi,
                    )
                )
    finally:
        if executor is not None:
            executor.shutdown()
    return SerCurve(config=cfg, points=tuple(points), resampled_draws=total_resamples)
