"""Rank-quality metrics: Spearman, Kendall, Pearson, pairwise accuracy,
and NDCG@k.

Truth is a tie-free rank vector (larger = better); predictions are scores
of any scale. Prediction ties use the standard conventions: average ranks
for Spearman, tau-b for Kendall, half credit for pairwise accuracy, and
input-order stability for the NDCG sort.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


def _check_inputs(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(truth, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if t.shape != p.shape or t.ndim != 1:
        raise MetricError(f"shape mismatch: truth {t.shape}, pred {p.shape}")
    if t.shape[0] < 2:
        raise MetricError("need at least 2 items")
    if len(np.unique(t)) != t.shape[0]:
        raise MetricError("truth ranks must be tie-free")
    return t, p


def average_ranks(values) -> np.ndarray:
    """Ranks 1..n with ties assigned the average of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.shape[0], dtype=np.float64)
    i = 0
    while i < v.shape[0]:
        j = i
        while j + 1 < v.shape[0] and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(truth, pred) -> float:
    """1 - 6*sum(d^2)/(n(n^2-1)), d = rank difference, pred ties averaged."""
    t, p = _check_inputs(truth, pred)
    n = t.shape[0]
    d = average_ranks(t) - average_ranks(p)
    return 1.0 - 6.0 * float(d @ d) / (n * (n * n - 1.0))


def _pair_counts(t: np.ndarray, p: np.ndarray) -> tuple[int, int, int]:
    """(concordant, discordant, pred-tied) over unordered pairs."""
    dt = np.sign(t[:, None] - t[None, :])
    dp = np.sign(p[:, None] - p[None, :])
    upper = np.triu(np.ones_like(dt, dtype=bool), k=1)
    prod = dt * dp
    concordant = int(np.sum((prod > 0) & upper))
    discordant = int(np.sum((prod < 0) & upper))
    tied = int(np.sum((dp == 0) & upper))
    return concordant, discordant, tied


def kendall_tau(truth, pred) -> float:
    """(C - D) / C(n,2), with the tau-b correction when pred has ties."""
    t, p = _check_inputs(truth, pred)
    n = t.shape[0]
    c, d, tied = _pair_counts(t, p)
    total = n * (n - 1) // 2
    if tied == 0:
        return (c - d) / total
    if tied == total:
        raise MetricError("all predictions tied; tau-b undefined")
    return (c - d) / np.sqrt(float(total) * float(total - tied))


def pairwise_accuracy(truth, pred) -> float:
    """Fraction of unordered pairs ordered as in truth; pred ties score 0.5.

    On tie-free predictions this is computed as (1 + kendall)/2 from the
    same pair counts, so the identity with kendall_tau holds bit-exactly.
    """
    t, p = _check_inputs(truth, pred)
    c, d, tied = _pair_counts(t, p)
    total = c + d + tied
    if tied == 0:
        return (1.0 + (c - d) / total) / 2.0
    return (c + 0.5 * tied) / total


def pearson(truth_scores, pred_scores) -> float:
    """Product-moment correlation; raises on zero variance."""
    t = np.asarray(truth_scores, dtype=np.float64)
    p = np.asarray(pred_scores, dtype=np.float64)
    if t.shape != p.shape or t.ndim != 1 or t.shape[0] < 2:
        raise MetricError(f"bad shapes: {t.shape}, {p.shape}")
    tc = t - t.mean()
    pc = p - p.mean()
    denom = np.sqrt(float(tc @ tc)) * np.sqrt(float(pc @ pc))
    if denom == 0.0:
        raise MetricError("zero variance input")
    return float(tc @ pc) / denom


def ndcg_at_k(truth, pred_scores, k: int) -> float:
    """NDCG@k with linear gains rel = y/n.

    Items are sorted by predicted score descending, ties broken by input
    position (stable). The ideal ordering sorts by true rank descending.
    """
    t, p = _check_inputs(truth, pred_scores)
    n = t.shape[0]
    if not 1 <= k <= n:
        raise MetricError(f"k={k} outside 1..{n}")
    rel = t / n
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    pred_order = np.argsort(-p, kind="stable")
    ideal_order = np.argsort(-t, kind="stable")
    dcg = float(rel[pred_order[:k]] @ discounts)
    idcg = float(rel[ideal_order[:k]] @ discounts)
    return dcg / idcg


@dataclass
class MetricReport:
    """The evaluation row for one trained model on one test split."""

    method: str
    fold: int
    spc: float
    pacc: float
    prc: float
    ktc: float
    ndcg: dict[int, float] = field(default_factory=dict)

    CSV_HEADER = "method,fold,spc,pacc,prc,ktc,ndcg@3,ndcg@5"

    def csv_row(self) -> str:
        return ",".join(
            [
                self.method,
                str(self.fold),
                repr(self.spc),
                repr(self.pacc),
                repr(self.prc),
                repr(self.ktc),
                repr(self.ndcg.get(3, float("nan"))),
                repr(self.ndcg.get(5, float("nan"))),
            ]
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "method": self.method,
                "fold": self.fold,
                "spc": self.spc,
                "pacc": self.pacc,
                "prc": self.prc,
                "ktc": self.ktc,
                "ndcg": {str(k): v for k, v in self.ndcg.items()},
            }
        )


def evaluate(method: str, fold: int, truth_ranks, pred_scores, ndcg_cutoffs=(3, 5)) -> MetricReport:
    """All five metrics for one prediction; truth scores are percentiles y/n."""
    t = np.asarray(truth_ranks, dtype=np.float64)
    p = np.asarray(pred_scores, dtype=np.float64)
    n = t.shape[0]
    cutoffs = [k for k in ndcg_cutoffs if 1 <= k <= n]
    return MetricReport(
        method=method,
        fold=fold,
        spc=spearman(t, p),
        pacc=pairwise_accuracy(t, p),
        prc=pearson(t / n, p),
        ktc=kendall_tau(t, p),
        ndcg={k: ndcg_at_k(t, p, k) for k in cutoffs},
    )
