"""MIMO symbol detection and Monte Carlo SER simulation.

Detectors: zero forcing, linear MMSE, exhaustive ML, ML-exact sphere
decoding, and V-BLAST ordered successive interference cancellation, over
i.i.d. or Kronecker-correlated Rayleigh flat fading with Gray-coded QAM.
"""

from .channel import (
    ChannelModel,
    NoiseSpec,
    RngStream,
    add_awgn,
    correlation_matrix,
    noise_variance_for_snr,
    sample_complex_gaussian,
    sample_correlated_channel,
    sample_iid_channel,
)
from .detect import (
    DetectionResult,
    DetectionTrace,
    DetectorSpec,
    GuardExceededError,
    detect_ml,
    detect_mmse,
    detect_sphere,
    detect_vblast,
    detect_zf,
    run_detector,
)
from .kernels import backend
from .modem import Constellation, build_constellation, constellation_by_name, demodulate, modulate, slice_symbol
from .numerics import (
    NotPositiveDefiniteError,
    RankDeficientError,
    SingularMatrixError,
    cholesky,
    hermitian,
    mat_mul,
    pseudo_inverse,
    solve,
)
from .sim import SerCurve, SerPoint, SimulationConfig, estimate_ser, run_channel_use, wilson_interval

__version__ = "0.1.0"
