import numpy as np


def rayleigh(rng: np.random.Generator, nr: int, nt: int) -> np.ndarray:
    """i.i.d. CN(0,1) test channel, independent of the library's samplers."""
    return np.sqrt(0.5) * (rng.standard_normal((nr, nt)) + 1j * rng.standard_normal((nr, nt)))


def awgn(rng: np.random.Generator, n: int, sigma2: float) -> np.ndarray:
    return np.sqrt(sigma2 / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def metric(y: np.ndarray, h: np.ndarray, x: np.ndarray) -> float:
    """Independent evaluation of the ML objective ||y - Hx||^2."""
    e = y - h @ x
    return float(np.sum(e.real**2 + e.imag**2))
