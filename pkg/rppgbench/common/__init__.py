__author__ = "rppgbench developers"
__copyright__ = "Copyright 2024, rppgbench developers"
__license__ = "MIT"

import hashlib
import json
import math
from datetime import datetime, timezone
from typing import Any, Mapping, Tuple

import numpy as np

__version__ = "0.4.0"

# Default physiological passband in Hz (40 to 180 bpm).
DEFAULT_BAND: Tuple[float, float] = (0.66, 3.0)
DEFAULT_EVAL_TIME_LENGTHS: Tuple[float, ...] = (3.0, 5.0, 10.0, 20.0, 30.0)
DEFAULT_FILTER_ORDER = 2
DEFAULT_DETREND_LAMBDA = 100.0
DEFAULT_WINDOW_SECONDS = 1.6
DEFAULT_SSR_STRIDE = 20
# Shortest traces the decomposition methods accept, in seconds.
MIN_ICA_SECONDS = 5.0
MIN_DECOMPOSITION_SECONDS = 2.0
DEFAULT_PBV_SIGNATURE: Tuple[float, float, float] = (0.33, 0.78, 0.53)
DEFAULT_SNR_BAND_BPM: Tuple[float, float] = (40.0, 240.0)
DEFAULT_SNR_DELTA_BPM = 6.0
DEFAULT_MAX_LAG_S = 3.0
ALIGNMENT_RELIABILITY_THRESHOLD = 0.3
# Correlation peaks this close to the best one count as equally good lags.
ALIGNMENT_PEAK_TOLERANCE = 0.05
DISCREPANCY_THRESHOLD_BPM = 5.0
CLOCK_TOLERANCE_S = 1.0
# Gram and covariance matrices are regularized with this multiple of I.
GRAM_EPSILON = 1e-9
# Smallest/largest eigenvalue ratio below which a covariance is rank deficient.
RANK_TOLERANCE = 1e-10
EPSILON = 1e-12

UNRELIABLE = "UNRELIABLE"
FAILED = "FAILED"


def hz_to_bpm(freq):
    return 60.0 * freq


def min_fft_length(fs: float, n: int) -> int:
    """Smallest FFT length that resolves 1 bpm at the given sampling rate."""
    return max(int(n), int(math.ceil(60.0 * fs)))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Mapping):
        return dict(obj)
    return str(obj)


def config_hash(config: Mapping) -> str:
    """Stable sha256 hex digest of a configuration mapping."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def lexicographic_sign(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so that its first non-negligible entry is positive."""
    vectors = np.array(vectors, dtype=float, copy=True)
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        nonzero = np.flatnonzero(np.abs(col) > EPSILON)
        if nonzero.size and col[nonzero[0]] < 0:
            vectors[:, j] = -col
    return vectors
