"""Numpy implementations of the hot numeric kernels.

This is the pure-Python fallback for the compiled core in ``_kernels``.
Both backends expose the same eight functions with identical semantics;
see ``rankforge.backend`` for how one of them is selected at import time.

All kernels take and return float64 arrays. Pairwise kernels treat ranks
as integers with larger = better.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _as2d(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched affine map: returns x @ w.T + b for x of shape (B, d_in)."""
    return _as2d(x) @ _as2d(w).T + np.asarray(b, dtype=np.float64)


def linear_backward(
    x: np.ndarray, w: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a batched affine map: (dx, dw, db) given upstream dy."""
    x = _as2d(x)
    w = _as2d(w)
    dy = _as2d(dy)
    dx = dy @ w
    dw = dy.T @ x
    db = dy.sum(axis=0)
    return dx, dw, db


def relu_forward(a: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(a, dtype=np.float64), 0.0)


def relu_backward(dh: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Backward of relu evaluated at pre-activation a; zero at the kink."""
    return np.asarray(dh, dtype=np.float64) * (np.asarray(a) > 0.0)


def sigmoid(a: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, safe for |a| up to ~1e308."""
    a = np.asarray(a, dtype=np.float64)
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def bce_logits(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Summed binary cross-entropy on logits, plus its gradient.

    Uses the stable form max(l, 0) - l*t + log1p(exp(-|l|)). Returns the
    SUM over all entries; callers apply their own batch normalization.
    """
    l = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    loss = float(np.sum(np.maximum(l, 0.0) - l * t + np.log1p(np.exp(-np.abs(l)))))
    dl = sigmoid(l) - t
    return loss, dl


def pairwise_logistic(
    scores: np.ndarray, ranks: np.ndarray
) -> tuple[float, np.ndarray]:
    """Pairwise logistic (RankNet-style) loss over all ordered pairs.

    For each ordered pair (i, j), i != j, the target is 1 if ranks[i] >
    ranks[j], 0 if smaller, 0.5 on ties, and the pair contributes
    BCE(sigmoid(scores[i] - scores[j]), target). Returns the mean pair
    loss and its gradient w.r.t. scores. A batch of one yields (0, zeros).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(ranks)
    n = s.shape[0]
    if n < 2:
        return 0.0, np.zeros_like(s)
    diff = s[:, None] - s[None, :]
    p = 0.5 * (np.sign(y[:, None] - y[None, :]) + 1.0)
    off = ~np.eye(n, dtype=bool)
    z = diff[off]
    t = p[off]
    npairs = z.shape[0]
    loss = float(
        np.sum(np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))) / npairs
    )
    g = (sigmoid(diff) - p) * off / npairs
    ds = g.sum(axis=1) - g.sum(axis=0)
    return loss, ds


def pairwise_hinge(
    scores: np.ndarray, ranks: np.ndarray, margin: float
) -> tuple[float, np.ndarray]:
    """Margin ranking loss over ordered pairs with ranks[i] > ranks[j].

    Each such pair contributes max(0, margin - (scores[i] - scores[j])).
    The subgradient at the kink is taken as 0 (strict inequality). Returns
    the mean over contributing pairs and the gradient w.r.t. scores.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(ranks)
    n = s.shape[0]
    ds = np.zeros_like(s)
    if n < 2:
        return 0.0, ds
    better = y[:, None] > y[None, :]
    npairs = int(better.sum())
    if npairs == 0:
        return 0.0, ds
    gap = margin - (s[:, None] - s[None, :])
    active = better & (gap > 0.0)
    loss = float(gap[active].sum() / npairs)
    ai = active / npairs
    ds = ai.sum(axis=0) - ai.sum(axis=1)
    return loss, ds
