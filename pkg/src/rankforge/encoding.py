"""Bin geometry for coarse-to-fine ranking.

Ranks 1..n are split into m bins of width tau = n/m. A rank is encoded as
m-1 threshold bits (bit j set iff the rank clears threshold j*tau), the
coarse score is the left bound of the predicted bin, and a learned offset
bounded by tau refines the score inside the bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import sigmoid as _sigmoid
from .numerics import DimensionError


@dataclass(frozen=True)
class EncodingConfig:
    n: int
    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.n < self.m:
            raise ValueError(f"n={self.n} must be >= m={self.m}")

    @property
    def tau(self) -> float:
        return self.n / self.m


def encode_ordinal(y: int, cfg: EncodingConfig) -> np.ndarray:
    """Threshold bits of rank y: bit j = 1 iff y >= j*tau, j = 1..m-1.

    The comparison is exact (y*m >= j*n in integers), so no float rounding
    can flip a threshold.
    """
    if not 1 <= y <= cfg.n:
        raise ValueError(f"rank {y} outside 1..{cfg.n}")
    j = np.arange(1, cfg.m)
    return (y * cfg.m >= j * cfg.n).astype(np.float64)


def encode_ordinal_batch(ys, cfg: EncodingConfig) -> np.ndarray:
    ys = np.asarray(ys, dtype=np.int64)
    if ys.size and (ys.min() < 1 or ys.max() > cfg.n):
        bad = ys[(ys < 1) | (ys > cfg.n)][0]
        raise ValueError(f"rank {bad} outside 1..{cfg.n}")
    j = np.arange(1, cfg.m)
    return (ys[:, None] * cfg.m >= j[None, :] * cfg.n).astype(np.float64)


def pairwise_target(y_i: int, y_j: int) -> float:
    """1 if y_i ranks above y_j, 0 if below, 0.5 on a tie."""
    if y_i > y_j:
        return 1.0
    if y_i < y_j:
        return 0.0
    return 0.5


def coarse_score(l: np.ndarray, cfg: EncodingConfig, mode: str = "hard"):
    """Coarse score from threshold logits.

    hard: tau * (number of logits whose probability exceeds 0.5) — the
    left bound of the predicted bin, used at inference. soft: tau * sum of
    threshold probabilities — the differentiable surrogate used in
    training. Accepts a single logit vector or a (B, m-1) batch.
    """
    l = np.asarray(l, dtype=np.float64)
    squeeze = l.ndim == 1
    lb = l[None, :] if squeeze else l
    if lb.shape[1] != cfg.m - 1:
        raise DimensionError(f"expected {cfg.m - 1} logits, got {lb.shape[1]}")
    if mode == "hard":
        s = cfg.tau * (lb > 0.0).sum(axis=1).astype(np.float64)
    elif mode == "soft":
        s = cfg.tau * _sigmoid(lb).sum(axis=1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return float(s[0]) if squeeze else s


def final_score(s_bar, s_tilde, cfg: EncodingConfig):
    """Combined score s = s_bar + tau * sigmoid(s_tilde).

    The offset contribution lies strictly inside (0, tau), so the coarse
    bin order is refined, never overturned by more than one bin. Reported
    externally as s/n so published scores lie in (0, 1].
    """
    s_bar = np.asarray(s_bar, dtype=np.float64)
    s_tilde = np.asarray(s_tilde, dtype=np.float64)
    out = s_bar + cfg.tau * _sigmoid(s_tilde.reshape(-1)).reshape(s_tilde.shape)
    return float(out) if out.ndim == 0 else out


def normalize_score(s, cfg: EncodingConfig):
    """Score mapped to the published (0, 1] scale."""
    return np.asarray(s, dtype=np.float64) / cfg.n
