"""Ranked datasets: data model, JSONL on-disk format, synthetic generator,
and k-fold splitting.

A dataset holds items with a feature vector and a tie-free integer rank in
1..n, larger = better. Synthetic items carry the latent quality that
produced their rank, so recovery experiments can score against ground
truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import RngStream

FORMAT_NAME = "rankforge-dataset"
FORMAT_VERSION = 1

PROVENANCES = ("synthetic", "ingested", "annotation-export")


class DatasetError(ValueError):
    """Raised on malformed dataset files or invariant violations."""


@dataclass(frozen=True)
class RankedItem:
    id: str
    features: np.ndarray
    rank: int
    latent_quality: float | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "features", np.ascontiguousarray(self.features, dtype=np.float64)
        )
        if not np.all(np.isfinite(self.features)):
            raise DatasetError(f"item {self.id!r}: non-finite feature")


@dataclass
class RankedDataset:
    items: list[RankedItem]
    feature_dim: int
    provenance: str = "ingested"

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise DatasetError(f"unknown provenance {self.provenance!r}")
        n = len(self.items)
        seen: dict[int, str] = {}
        for it in self.items:
            if it.features.shape != (self.feature_dim,):
                raise DatasetError(
                    f"item {it.id!r}: feature length {it.features.shape[0]} != "
                    f"feature_dim {self.feature_dim}"
                )
            if not 1 <= it.rank <= n:
                raise DatasetError(f"item {it.id!r}: rank {it.rank} outside 1..{n}")
            if it.rank in seen:
                raise DatasetError(
                    f"duplicate rank {it.rank} for items {seen[it.rank]!r} and {it.id!r}"
                )
            seen[it.rank] = it.id

    def __len__(self) -> int:
        return len(self.items)

    @property
    def n(self) -> int:
        return len(self.items)

    def ranks(self) -> np.ndarray:
        return np.array([it.rank for it in self.items], dtype=np.int64)

    def features_matrix(self) -> np.ndarray:
        return np.stack([it.features for it in self.items]) if self.items else np.zeros((0, self.feature_dim))

    def latent_ranks(self) -> np.ndarray:
        """Dense ranks of latent quality (1 = worst); requires synthetic truth."""
        qs = [it.latent_quality for it in self.items]
        if any(q is None for q in qs):
            raise DatasetError("dataset has items without latent_quality")
        order = np.argsort(np.asarray(qs, dtype=np.float64), kind="stable")
        ranks = np.empty(len(qs), dtype=np.int64)
        ranks[order] = np.arange(1, len(qs) + 1)
        return ranks

    def by_id(self, item_id: str) -> RankedItem:
        for it in self.items:
            if it.id == item_id:
                return it
        raise KeyError(item_id)


@dataclass(frozen=True)
class SyntheticConfig:
    n: int
    d: int
    informative_dim: int | None = None  # None = all d dimensions carry signal
    feature_noise_sigma: float = 0.0
    nonlinearity: str = "linear"
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise DatasetError("n must be >= 2")
        if self.d < 1:
            raise DatasetError("d must be >= 1")
        if self.informative_dim is None:
            object.__setattr__(self, "informative_dim", self.d)
        if not 1 <= self.informative_dim <= self.d:
            raise DatasetError("informative_dim must satisfy 1 <= k <= d")
        if self.feature_noise_sigma < 0:
            raise DatasetError("feature_noise_sigma must be >= 0")
        if self.nonlinearity not in ("linear", "polynomial"):
            raise DatasetError(f"unknown nonlinearity {self.nonlinearity!r}")


def _quality_basis(q: np.ndarray, nonlinearity: str) -> np.ndarray:
    if nonlinearity == "linear":
        return q[:, None]
    return np.stack([q, q**2, q**3], axis=1)


def generate_synthetic(cfg: SyntheticConfig) -> RankedDataset:
    """Synthesizes a ranked dataset from a latent quality per item.

    Latent quality is uniform on [0, 1] with exact ties redrawn. Features
    are a seeded random map of the quality basis, nonzero only on the
    first informative_dim coordinates, plus isotropic noise everywhere.
    Rank is the dense rank of quality (smallest quality -> rank 1).
    """
    root = RngStream(cfg.seed, "synthetic")
    q_rng = root.derive("quality")
    q = q_rng.uniform(size=cfg.n)
    while len(np.unique(q)) < cfg.n:
        _, first = np.unique(q, return_index=True)
        dup = np.setdiff1d(np.arange(cfg.n), first)
        q[dup] = q_rng.uniform(size=dup.shape[0])

    basis = _quality_basis(q, cfg.nonlinearity)
    p = basis.shape[1]
    amap = root.derive("map").normal(size=(cfg.d, p))
    amap[cfg.informative_dim :, :] = 0.0
    feats = basis @ amap.T
    if cfg.feature_noise_sigma > 0:
        feats = feats + root.derive("noise").normal(
            size=(cfg.n, cfg.d), scale=cfg.feature_noise_sigma
        )

    order = np.argsort(q, kind="stable")
    ranks = np.empty(cfg.n, dtype=np.int64)
    ranks[order] = np.arange(1, cfg.n + 1)

    items = [
        RankedItem(
            id=f"item-{i:04d}",
            features=feats[i],
            rank=int(ranks[i]),
            latent_quality=float(q[i]),
        )
        for i in range(cfg.n)
    ]
    return RankedDataset(items=items, feature_dim=cfg.d, provenance="synthetic")


def save(ds: RankedDataset, path: str | Path) -> None:
    """Writes the JSONL dataset format (header line, then one item per line)."""
    path = Path(path)
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "feature_dim": ds.feature_dim,
        "n": len(ds),
    }
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for it in ds.items:
            rec = {
                "id": it.id,
                "features": it.features.tolist(),
                "rank": it.rank,
                "latent_quality": it.latent_quality,
            }
            fh.write(json.dumps(rec) + "\n")


def load(path: str | Path) -> RankedDataset:
    """Reads the JSONL dataset format; errors name the offending line."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise DatasetError(f"{path}: no items")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}:1: malformed header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise DatasetError(f"{path}:1: not a {FORMAT_NAME} file")
    if header.get("version") != FORMAT_VERSION:
        raise DatasetError(f"{path}:1: unsupported version {header.get('version')!r}")
    feature_dim = header.get("feature_dim")
    if not isinstance(feature_dim, int) or feature_dim < 1:
        raise DatasetError(f"{path}:1: bad feature_dim {feature_dim!r}")
    if len(lines) == 1:
        raise DatasetError(f"{path}: no items")

    items: list[RankedItem] = []
    ranks_seen: dict[int, tuple[str, int]] = {}
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: malformed record: {exc}") from exc
        try:
            item = RankedItem(
                id=str(rec["id"]),
                features=np.asarray(rec["features"], dtype=np.float64),
                rank=int(rec["rank"]),
                latent_quality=(
                    None if rec.get("latent_quality") is None else float(rec["latent_quality"])
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"{path}:{lineno}: malformed record: {exc}") from exc
        if item.features.shape != (feature_dim,):
            raise DatasetError(
                f"{path}:{lineno}: feature length {item.features.shape[0]} != "
                f"header feature_dim {feature_dim}"
            )
        if item.rank in ranks_seen:
            other_id, other_line = ranks_seen[item.rank]
            raise DatasetError(
                f"{path}:{lineno}: duplicate rank {item.rank} "
                f"(items {other_id!r} at line {other_line} and {item.id!r})"
            )
        ranks_seen[item.rank] = (item.id, lineno)
        items.append(item)

    n = header.get("n")
    if isinstance(n, int) and n != len(items):
        raise DatasetError(f"{path}: header declares n={n} but found {len(items)} items")
    try:
        return RankedDataset(items=items, feature_dim=feature_dim)
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from exc


def densify_ranks(items: list[RankedItem]) -> list[RankedItem]:
    """Relabels ranks to 1..len(items), preserving the original order."""
    order = np.argsort([it.rank for it in items], kind="stable")
    new_rank = np.empty(len(items), dtype=np.int64)
    new_rank[order] = np.arange(1, len(items) + 1)
    return [
        RankedItem(it.id, it.features, int(new_rank[i]), it.latent_quality)
        for i, it in enumerate(items)
    ]


def subset(ds: RankedDataset, idx) -> RankedDataset:
    """Dataset restricted to idx, with ranks re-densified to 1..|idx|."""
    chosen = [ds.items[i] for i in idx]
    return RankedDataset(
        items=densify_ranks(chosen), feature_dim=ds.feature_dim, provenance=ds.provenance
    )


def kfold_split(
    ds: RankedDataset, k: int, seed: int
) -> list[tuple[RankedDataset, RankedDataset]]:
    """Seeded k-fold partition into (train, test) datasets.

    Folds are disjoint, cover everything, and differ in size by at most
    one. Both sides of every pair carry re-densified ranks.
    """
    n = len(ds)
    if k < 2:
        raise DatasetError("k must be >= 2")
    if k > n:
        raise DatasetError(f"k={k} exceeds dataset size {n}")
    perm = RngStream(seed, "kfold").permutation(n)
    folds = [perm[i::k] for i in range(k)]
    pairs = []
    for i in range(k):
        test_idx = np.sort(folds[i])
        train_idx = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        pairs.append((subset(ds, train_idx), subset(ds, test_idx)))
    return pairs


def percentile_rank(y: int, n: int) -> float:
    """Rank y in 1..n mapped to (0, 1] as y/n."""
    if not 1 <= y <= n:
        raise DatasetError(f"rank {y} outside 1..{n}")
    return y / n
