"""Gray-coded square QAM constellations, symbol mapping and hard slicing.

Supported orders are 4, 16 and 64; QPSK is an alias for the 4-QAM point set.
Points sit on the odd-integer grid scaled to unit average symbol energy, and
point k = i*sqrt(M) + q pairs the i-th in-phase level with the q-th
quadrature level (levels in increasing order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64)

# Unscaled mean grid energy per order: 2 * mean({1, 3, ..}^2).
_GRID_ENERGY = {4: 2.0, 16: 10.0, 64: 42.0}

MODULATION_NAMES = {"4qam": (4, "qam"), "qpsk": (4, "qpsk"), "16qam": (16, "qam"), "64qam": (64, "qam")}


@dataclass(frozen=True)
class Constellation:
    """Ordered set of M unit-average-energy points with Gray bit labels."""

    order: int
    kind: str  # "qam" or the "qpsk" alias (identical points for M=4)
    points: np.ndarray = field(repr=False)  # (M,) complex128
    bit_labels: tuple[str, ...] = field(repr=False)
    pam_levels: np.ndarray = field(repr=False)  # (sqrt(M),) scaled per-axis levels

    @property
    def side(self) -> int:
        return int(math.isqrt(self.order))

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    def __hash__(self):
        return hash((self.order, self.kind))

    def __eq__(self, other):
        return isinstance(other, Constellation) and (self.order, self.kind) == (other.order, other.kind)


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def build_constellation(m: int, kind: str = "qam") -> Constellation:
    """Build the Gray-labelled square constellation of order m in {4, 16, 64}."""
    if m not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported constellation order {m}; supported: {SUPPORTED_ORDERS}")
    if kind not in ("qam", "qpsk") or (kind == "qpsk" and m != 4):
        raise ValueError(f"unsupported constellation kind {kind!r} for order {m}")
    side = math.isqrt(m)
    pam = (2.0 * np.arange(side) - (side - 1)) / math.sqrt(_GRID_ENERGY[m])
    points = (pam[:, None] + 1j * pam[None, :]).reshape(-1)
    axis_bits = (side - 1).bit_length()
    labels = tuple(
        format(_gray(i), f"0{axis_bits}b") + format(_gray(q), f"0{axis_bits}b")
        for i in range(side)
        for q in range(side)
    )
    points.setflags(write=False)
    pam.setflags(write=False)
    return Constellation(order=m, kind=kind, points=points, bit_labels=labels, pam_levels=pam)


def constellation_by_name(name: str) -> Constellation:
    """Build a constellation from its CLI name (4qam, qpsk, 16qam, 64qam)."""
    try:
        m, kind = MODULATION_NAMES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown modulation {name!r}; choose from {sorted(MODULATION_NAMES)}") from None
    return build_constellation(m, kind)


def modulate(indices, c: Constellation) -> np.ndarray:
    """Map symbol indices to constellation points."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= c.order):
        raise ValueError(f"symbol index out of range for order {c.order}")
    return c.points[idx]


def slice_symbol(z: complex, c: Constellation) -> int:
    """Nearest constellation point by squared distance; ties go to the smallest index."""
    d = c.points - z
    return int(np.argmin(d.real * d.real + d.imag * d.imag))


def slice_array(z, c: Constellation) -> np.ndarray:
    """Vectorized slice_symbol over a vector of soft values."""
    d = np.asarray(z, dtype=np.complex128)[:, None] - c.points[None, :]
    return np.argmin(d.real * d.real + d.imag * d.imag, axis=1)


def demodulate(indices, c: Constellation) -> np.ndarray:
    """Concatenated Gray bit labels of the given indices as a uint8 array."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= c.order):
        raise ValueError(f"symbol index out of range for order {c.order}")
    bits = np.frombuffer("".join(c.bit_labels[k] for k in idx).encode(), dtype=np.uint8) - ord("0")
    return bits.astype(np.uint8)
