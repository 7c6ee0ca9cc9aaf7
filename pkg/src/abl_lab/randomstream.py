"""Counter-based random streams keyed by ``(seed, trial_index)``.

Each uniform variate is a pure function of ``(seed, trial_index, counter)``,
so trial ``i`` draws the same numbers no matter which worker runs it or in
what order. The hash is three rounds of the SplitMix64 finaliser; it is not
cryptographic, only well mixed.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TRIAL_SALT = np.uint64(0xD1B54A32D192ED03)
_COUNTER_SALT = np.uint64(0x8CB92BA72F3D8DD7)
_INV_2_53 = 1.0 / (1 << 53)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def _u64(x) -> np.ndarray:
    if np.isscalar(x):
        return np.array(int(x) & _MASK, dtype=np.uint64)
    arr = np.asarray(x)
    if arr.dtype == np.uint64:
        return arr
    if np.issubdtype(arr.dtype, np.integer):
        # two's-complement reinterpretation == masking to 64 bits
        return arr.astype(np.int64).view(np.uint64) if arr.dtype != np.int64 else arr.view(np.uint64)
    return np.array([int(v) & _MASK for v in arr.ravel()], dtype=np.uint64).reshape(arr.shape)


def uniforms(seed: int, trial_index, counter) -> np.ndarray:
    """Uniform variates in the open interval (0, 1), broadcast over the arguments."""
    s = _u64(seed)
    t = _u64(trial_index)
    c = _u64(counter)
    with np.errstate(over="ignore"):
        k = _mix64(s + _GAMMA)
        k = _mix64(k ^ (t * _TRIAL_SALT + _GAMMA))
        h = _mix64(k ^ (c * _COUNTER_SALT + _GAMMA))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


class RandomStream:
    """Sequential view of the substream for one trial.

    >>> s = RandomStream(7, 0)
    >>> u = s.uniform()
    >>> 0.0 < u < 1.0
    True
    """

    def __init__(self, seed: int, trial_index: int = 0, counter: int = 0):
        self.seed = int(seed) & _MASK
        self.trial_index = int(trial_index) & _MASK
        self.counter = int(counter)

    def uniform(self) -> float:
        u = float(uniforms(self.seed, self.trial_index, self.counter))
        self.counter += 1
        return u

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, trial_index={self.trial_index}, counter={self.counter})"


def stream(seed: int, trial_index: int) -> RandomStream:
    """Independent substream ``trial_index`` of ``seed``."""
    return RandomStream(seed, trial_index)
