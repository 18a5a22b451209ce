"""Small numeric utilities shared by every model.

Dense matrices are plain float64 numpy arrays in row-major order. The
random-number streams are counter-based (Philox keyed by seed and stream
id), so any number of independent streams derive deterministically from
one root seed and reproduce across runs and platforms.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Sequence

import numpy as np

from .backend import sigmoid as _sigmoid_kernel


class DimensionError(ValueError):
    """Raised when array shapes do not line up."""


def as_matrix(a, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Validates and returns a C-contiguous float64 matrix.

    Raises DimensionError on shape mismatch and ValueError on non-finite
    entries.
    """
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got ndim={m.ndim}")
    if rows is not None and m.shape[0] != rows:
        raise DimensionError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionError(f"expected {cols} cols, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    return m


def affine(w: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Returns W x + b, checking that shapes are consistent."""
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 2 or x.ndim != 1 or b.ndim != 1:
        raise DimensionError("affine expects matrix w and vectors b, x")
    if w.shape[1] != x.shape[0]:
        raise DimensionError(f"w has {w.shape[1]} cols but x has {x.shape[0]} entries")
    if w.shape[0] != b.shape[0]:
        raise DimensionError(f"w has {w.shape[0]} rows but b has {b.shape[0]} entries")
    return w @ x + b


def sigmoid(x):
    """Stable logistic function; scalar in, scalar out (arrays pass through)."""
    arr = np.asarray(x, dtype=np.float64)
    out = _sigmoid_kernel(arr.reshape(-1)).reshape(arr.shape)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def logit(p):
    """Inverse of sigmoid on (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    out = np.log(p) - np.log1p(-p)
    return float(out) if out.ndim == 0 else out


def finite_diff_gradient(
    f: Callable[[np.ndarray], float], x: Sequence[float], h: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a vector.

    Raises ValueError if any probed function value is non-finite.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"non-finite function value near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def _mix_to_uint64(*parts: int | str) -> int:
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """A named, replayable random stream.

    Streams with equal (seed, stream_id) produce identical draw sequences;
    child streams derive deterministically via `derive`. Backed by the
    counter-based Philox generator keyed with (seed, stream_id).
    """

    def __init__(self, seed: int, stream_id: int | str = 0):
        self.seed = int(seed)
        self.stream_id = stream_id
        key = np.array(
            [self.seed % (1 << 64), _mix_to_uint64(stream_id)], dtype=np.uint64
        )
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def derive(self, label: int | str) -> "RngStream":
        """A child stream; same (seed, parent, label) always gives the same child."""
        return RngStream(self.seed, _mix_to_uint64(self.stream_id, label))

    def uniform(self, size=None, low: float = 0.0, high: float = 1.0):
        return self._gen.uniform(low, high, size=size)

    def normal(self, size=None, scale: float = 1.0):
        return self._gen.normal(0.0, scale, size=size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def bernoulli(self, p: float, size=None) -> np.ndarray:
        return self._gen.random(size=size) < p
