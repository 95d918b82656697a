"""MIMO symbol detectors: ZF, MMSE, exhaustive ML, ML-exact sphere decoding,
and V-BLAST ordered successive interference cancellation (ZF or MMSE nulling).

All detectors are pure functions returning hard per-antenna symbol indices;
heavy inner loops live in mimodet.kernels (compiled backend when available).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .channel import NoiseSpec
from .modem import Constellation, slice_array

DEFAULT_ML_GUARD = 10**6

DETECTOR_NAMES = ("zf", "mmse", "ml", "sphere", "vblast-zf", "vblast-mmse")


class GuardExceededError(ValueError):
    """ML candidate space larger than the configured guard."""


@dataclass(frozen=True)
class DetectorSpec:
    """Detector algorithm name plus parameters."""

    algorithm: str
    ml_candidate_guard: int = DEFAULT_ML_GUARD

    def __post_init__(self):
        if self.algorithm not in DETECTOR_NAMES:
            raise ValueError(f"unknown detector {self.algorithm!r}; choose from {DETECTOR_NAMES}")
        if self.ml_candidate_guard < 1:
            raise ValueError("ml_candidate_guard must be >= 1")


@dataclass(frozen=True)
class DetectionTrace:
    """V-BLAST audit record: detection order (0-based antenna indices) and the
    pre-slicing soft value of each layer in detection order."""

    order: np.ndarray
    per_layer_soft: np.ndarray


@dataclass(frozen=True)
class DetectionResult:
    """Hard symbol-index estimate per transmit antenna, with optional extras."""

    estimate: np.ndarray
    trace: Optional[DetectionTrace] = None
    node_visits: Optional[int] = field(default=None)  # sphere: candidates fully evaluated


def _prep(y, H) -> tuple[np.ndarray, np.ndarray]:
    y = np.ascontiguousarray(y, dtype=np.complex128)
    H = np.ascontiguousarray(H, dtype=np.complex128)
    if H.ndim != 2 or y.ndim != 1:
        raise ValueError("H must be 2-D and y 1-D")
    nr, nt = H.shape
    if y.shape[0] != nr:
        raise ValueError(f"y has length {y.shape[0]}, expected {nr}")
    if nr < nt:
        raise ValueError(f"need nr >= nt, got {nr}x{nt}")
    return y, H


def detect_zf(y, H, c: Constellation) -> DetectionResult:
    """Zero-forcing: slice the pseudoinverse output per layer."""
    y, H = _prep(y, H)
    soft = kernels.linear_soft(y, H, 0.0)
    return DetectionResult(estimate=slice_array(soft, c))


def detect_mmse(y, H, noise: NoiseSpec, c: Constellation) -> DetectionResult:
    """Linear MMSE: slice (H^H H + sigma2 I)^-1 H^H y per layer (unit symbol energy)."""
    y, H = _prep(y, H)
    soft = kernels.linear_soft(y, H, noise.sigma2)
    return DetectionResult(estimate=slice_array(soft, c))


def detect_ml(y, H, c: Constellation, guard: int = DEFAULT_ML_GUARD) -> DetectionResult:
    """Exhaustive maximum likelihood over all M^nt candidate vectors.

    Candidates are enumerated in odometer order with strict-less-than
    replacement, so metric ties resolve to the lexicographically smallest
    index sequence.
    """
    y, H = _prep(y, H)
    nt = H.shape[1]
    space = c.order**nt
    if space > guard:
        raise GuardExceededError(
            f"ml candidate space {c.order}^{nt} = {space} exceeds guard {guard}"
        )
    if space >= 1 << 62:  # enumeration counter must fit in int64
        raise GuardExceededError(f"ml candidate space {c.order}^{nt} = {space} is not enumerable")
    return DetectionResult(estimate=kernels.ml_search(y, H, c.points))


def detect_sphere(y, H, c: Constellation) -> DetectionResult:
    """Sphere decoder: exact ML solution with the same tie-break as detect_ml.

    node_visits reports how many complete candidates had their metric
    evaluated (never more than M^nt).
    """
    y, H = _prep(y, H)
    est, visits = kernels.sphere_search(y, H, c.pam_levels, c.side)
    return DetectionResult(estimate=est, node_visits=visits)


def detect_vblast(y, H, noise: NoiseSpec, c: Constellation, criterion: str = "zf") -> DetectionResult:
    """V-BLAST ordered SIC under the zf or mmse nulling criterion.

    Each stage nulls the undetected layers, picks the strongest one (minimum
    pseudoinverse-row-norm for zf, minimum error-covariance diagonal for
    mmse; ties toward the smallest antenna index), slices it and subtracts
    its contribution from the running residual.
    """
    if criterion not in ("zf", "mmse"):
        raise ValueError(f"criterion must be 'zf' or 'mmse', got {criterion!r}")
    y, H = _prep(y, H)
    use_mmse = criterion == "mmse"
    sigma2 = noise.sigma2 if use_mmse else 0.0
    est, order, soft = kernels.vblast(y, H, sigma2, c.points, use_mmse)
    return DetectionResult(estimate=est, trace=DetectionTrace(order=order, per_layer_soft=soft))


def run_detector(spec: DetectorSpec, y, H, noise: NoiseSpec, c: Constellation) -> DetectionResult:
    """Dispatch on the spec's algorithm name."""
    alg = spec.algorithm
    if alg == "zf":
        return detect_zf(y, H, c)
    if alg == "mmse":
        return detect_mmse(y, H, noise, c)
    if alg == "ml":
        return detect_ml(y, H, c, guard=spec.ml_candidate_guard)
    if alg == "sphere":
        return detect_sphere(y, H, c)
    if alg == "vblast-zf":
        return detect_vblast(y, H, noise, c, criterion="zf")
    return detect_vblast(y, H, noise, c, criterion="mmse")
