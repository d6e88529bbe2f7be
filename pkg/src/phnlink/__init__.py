"""Link-level MIMO-OFDM simulator with joint data detection and
multi-oscillator phase-noise tracking."""

import os as _os

# The hot path is thousands of independent 64x64 solves; multi-threaded BLAS
# spin-waits dominate at that size, so parallelism stays at the trial level.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")
try:
    from threadpoolctl import threadpool_limits as _threadpool_limits

    _threadpool_limits(limits=1, user_api="blas")
except ImportError:  # pragma: no cover
    pass

__version__ = "0.1.0"

from .channel import ChannelRealization, PowerDelayProfile
from .detector import (
    DetectionResult,
    DetectorConfig,
    EkfState,
    complexity_counts,
    detect_no_tracking,
    detect_perfect_phn,
    detect_pilot_cpe,
    iterative_detect,
)
from .phase_noise import PhnTrajectory
from .phy import OfdmConfig, PilotLayout

__all__ = [
    "ChannelRealization",
    "PowerDelayProfile",
    "DetectionResult",
    "DetectorConfig",
    "EkfState",
    "complexity_counts",
    "detect_no_tracking",
    "detect_perfect_phn",
    "detect_pilot_cpe",
    "iterative_detect",
    "PhnTrajectory",
    "OfdmConfig",
    "PilotLayout",
    "__version__",
]
