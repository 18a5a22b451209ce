"""Comparison methods sharing one scorer architecture.

A plain three-layer scorer (d -> 512 -> 128 -> 1) trained with one of:
pairwise logistic loss (ranknet), margin loss (hinge), top-1 listwise
softmax cross-entropy on minibatch or full-training-set lists (listnet),
or L1 regression of the percentile rank (regression). The optimizer loop,
validation protocol, checkpoint format, and logs mirror the main model's
so comparisons stay fair.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import backend as K
from .data import RankedDataset, subset
from .metrics import spearman
from .model import (
    SgdState,
    TrainConfig,
    TrainingError,
    _read_checkpoint,
    _write_checkpoint,
)
from .numerics import DimensionError, RngStream

BASELINE_METHODS = ("ranknet", "hinge", "listnet-local", "listnet-global", "regression")


@dataclass
class ScorerParams:
    """Three affine layers with rectifier nonlinearities and a scalar output."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    dropout_p: float = 0.5

    ARRAY_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")
    DECAYED = ("w1", "w2", "w3")

    @property
    def feature_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> tuple[int, int]:
        return (self.w1.shape[0], self.w2.shape[0])

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in self.ARRAY_NAMES}

    def copy(self) -> "ScorerParams":
        return replace(self, **{n: getattr(self, n).copy() for n in self.ARRAY_NAMES})

    def flatten(self) -> np.ndarray:
        return np.concatenate([getattr(self, n).ravel() for n in self.ARRAY_NAMES])

    def unflatten(self, vec: np.ndarray) -> "ScorerParams":
        out = {}
        pos = 0
        for n in self.ARRAY_NAMES:
            a = getattr(self, n)
            out[n] = np.asarray(vec[pos : pos + a.size], dtype=np.float64).reshape(a.shape)
            pos += a.size
        return replace(self, **out)


def init_scorer(
    feature_dim: int,
    rng: RngStream,
    hidden: tuple[int, int] = (512, 128),
    dropout_p: float = 0.5,
) -> ScorerParams:
    h1, h2 = hidden

    def u(r, shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return r.uniform(size=shape, low=-bound, high=bound)

    return ScorerParams(
        w1=u(rng.derive("w1"), (h1, feature_dim), feature_dim),
        b1=np.zeros(h1),
        w2=u(rng.derive("w2"), (h2, h1), h1),
        b2=np.zeros(h2),
        w3=u(rng.derive("w3"), (h2,), h2),
        b3=np.zeros(1),
        dropout_p=dropout_p,
    )


def scorer_forward(
    params: ScorerParams,
    x: np.ndarray,
    mode: str = "eval",
    masks: tuple[np.ndarray, np.ndarray] | None = None,
    mask_rng: RngStream | None = None,
) -> dict:
    """Batched forward; returns scores and the backward cache."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.feature_dim:
        raise DimensionError(
            f"expected features of dim {params.feature_dim}, got shape {x.shape}"
        )
    use_dropout = mode in ("train", "mc") and params.dropout_p > 0.0
    b = x.shape[0]
    h1n, h2n = params.hidden

    a1 = K.linear_forward(x, params.w1, params.b1)
    h1 = K.relu_forward(a1)
    if use_dropout:
        if masks is None:
            if mask_rng is None:
                raise ValueError("dropout requires masks or a mask_rng")
            from .model import make_dropout_masks

            masks = make_dropout_masks((b, h1n), (b, h2n), params.dropout_p, mask_rng)
        m1, m2 = masks
    else:
        m1 = m2 = None
    h1d = h1 * m1 if m1 is not None else h1
    a2 = K.linear_forward(h1d, params.w2, params.b2)
    h2 = K.relu_forward(a2)
    h2d = h2 * m2 if m2 is not None else h2
    s = h2d @ params.w3 + params.b3[0]
    return {"x": x, "a1": a1, "h1d": h1d, "a2": a2, "h2d": h2d, "m1": m1, "m2": m2, "s": s}


def _backprop_scores(params: ScorerParams, cache: dict, ds: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of all scorer parameters given dLoss/dscores."""
    dw3 = cache["h2d"].T @ ds
    db3 = np.array([ds.sum()])
    dh2d = ds[:, None] * params.w3[None, :]
    dh2 = dh2d * cache["m2"] if cache["m2"] is not None else dh2d
    da2 = K.relu_backward(dh2, cache["a2"])
    dh1d, dw2, db2 = K.linear_backward(cache["h1d"], params.w2, da2)
    dh1 = dh1d * cache["m1"] if cache["m1"] is not None else dh1d
    da1 = K.relu_backward(dh1, cache["a1"])
    _, dw1, db1 = K.linear_backward(cache["x"], params.w1, da1)
    return {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2, "w3": dw3, "b3": db3}


def ranknet_loss(scores, ranks) -> float:
    """Pairwise logistic loss over all ordered in-batch pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[0] < 2:
        warnings.warn("pairwise loss over a batch of one is defined as 0")
        return 0.0
    loss, _ = K.pairwise_logistic(scores, np.asarray(ranks))
    return loss


def hinge_loss(scores, ranks, margin: float = 1.0) -> float:
    """Mean margin violation over pairs where the first item ranks higher."""
    loss, _ = K.pairwise_hinge(
        np.asarray(scores, dtype=np.float64), np.asarray(ranks), margin
    )
    return loss


def _softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()


def listnet_loss(scores, target_ranks, n_total: int | None = None) -> float:
    """Top-1 listwise loss: cross-entropy between the softmax of target
    utilities (percentile ranks y/n) and the softmax of predicted scores."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(target_ranks, dtype=np.float64)
    if s.shape[0] < 2:
        raise ValueError("listnet needs a list of at least 2")
    n = n_total if n_total is not None else s.shape[0]
    t = _softmax(y / n)
    log_q = (s - s.max()) - np.log(np.exp(s - s.max()).sum())
    return float(-(t @ log_q))


def _listnet_grad(scores: np.ndarray, target_ranks: np.ndarray, n_total: int) -> np.ndarray:
    t = _softmax(np.asarray(target_ranks, dtype=np.float64) / n_total)
    q = _softmax(np.asarray(scores, dtype=np.float64))
    return q - t


def l1_regression_loss(scores, ranks, n: int) -> float:
    """Mean absolute error against the percentile rank y/n."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(ranks, dtype=np.float64)
    return float(np.mean(np.abs(s - y / n)))


def _l1_grad(scores: np.ndarray, ranks: np.ndarray, n: int) -> np.ndarray:
    r = np.asarray(scores, dtype=np.float64) - np.asarray(ranks, dtype=np.float64) / n
    return np.sign(r) / r.shape[0]


def baseline_loss_and_grads(
    method: str,
    params: ScorerParams,
    x: np.ndarray,
    ranks: np.ndarray,
    n_total: int,
    cfg: TrainConfig,
    masks=None,
    mask_rng: RngStream | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and parameter gradients for one baseline batch/list."""
    cache = scorer_forward(params, x, mode="train", masks=masks, mask_rng=mask_rng)
    s = cache["s"]
    ranks = np.asarray(ranks)
    if method == "ranknet":
        if s.shape[0] < 2:
            warnings.warn("pairwise loss over a batch of one is defined as 0")
            loss, ds = 0.0, np.zeros_like(s)
        else:
            loss, ds = K.pairwise_logistic(s, ranks)
    elif method == "hinge":
        loss, ds = K.pairwise_hinge(s, ranks, cfg.margin)
    elif method in ("listnet-local", "listnet-global"):
        loss = listnet_loss(s, ranks, n_total)
        ds = _listnet_grad(s, ranks, n_total)
    elif method == "regression":
        loss = l1_regression_loss(s, ranks, n_total)
        ds = _l1_grad(s, ranks, n_total)
    else:
        raise ValueError(f"unknown baseline method {method!r}")
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite {method} loss on batch of {s.shape[0]}")
    return loss, _backprop_scores(params, cache, ds)


def baseline_total_loss(
    method: str, params: ScorerParams, x: np.ndarray, ranks, n_total: int, cfg: TrainConfig
) -> float:
    """Loss alone (no dropout); the finite-difference oracle probes this."""
    s = scorer_forward(params, x, mode="eval")["s"]
    ranks = np.asarray(ranks)
    if method == "ranknet":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return ranknet_loss(s, ranks)
    if method == "hinge":
        return hinge_loss(s, ranks, cfg.margin)
    if method in ("listnet-local", "listnet-global"):
        return listnet_loss(s, ranks, n_total)
    if method == "regression":
        return l1_regression_loss(s, ranks, n_total)
    raise ValueError(f"unknown baseline method {method!r}")


def predict_baseline_scores(params: ScorerParams, dataset: RankedDataset) -> list[tuple[str, float]]:
    s = scorer_forward(params, dataset.features_matrix(), mode="eval")["s"]
    return [(it.id, float(s[i])) for i, it in enumerate(dataset.items)]


def _sgd_update(params: ScorerParams, state: SgdState, grads, cfg: TrainConfig) -> None:
    for name, g in grads.items():
        p = getattr(params, name)
        if cfg.weight_decay and name in params.DECAYED:
            g = g + cfg.weight_decay * p
        v = state.velocity[name]
        v *= cfg.momentum
        v += g
        p -= state.lr * v


def train_baseline(
    method: str, dataset: RankedDataset, cfg: TrainConfig
) -> tuple[ScorerParams, list[dict]]:
    """Same optimizer loop and validation protocol as the main model.

    listnet-global takes one full-training-list step per epoch; every
    other method iterates shuffled minibatches.
    """
    if method not in BASELINE_METHODS:
        raise ValueError(f"unknown baseline method {method!r}")
    n = len(dataset)
    root = RngStream(cfg.seed, f"train-{method}")
    perm = root.derive("val-split").permutation(n)
    n_val = int(round(cfg.val_fraction * n))
    n_val = max(0, min(n_val, n - 2))
    if n_val < 2:
        n_val = 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    train_ds = subset(dataset, np.sort(train_idx))
    val_ds = subset(dataset, np.sort(val_idx)) if n_val >= 2 else None

    n_train = len(train_ds)
    params = init_scorer(
        train_ds.feature_dim, root.derive("init"), hidden=cfg.hidden, dropout_p=cfg.dropout_p
    )
    state = SgdState.fresh(params, cfg.lr_init)
    batching = root.derive("batching")
    dropout_rng = root.derive("dropout")
    x_all = train_ds.features_matrix()
    y_all = train_ds.ranks()

    log: list[dict] = []
    best_spc = -np.inf
    best_params = params.copy()
    stale = 0
    for epoch in range(cfg.epochs):
        if method == "listnet-global":
            batches = [np.arange(n_train)]
        else:
            order = batching.permutation(n_train)
            batches = [
                order[i : i + cfg.batch_size] for i in range(0, n_train, cfg.batch_size)
            ]
        loss_sum = 0.0
        for idx in batches:
            try:
                loss, grads = baseline_loss_and_grads(
                    method, params, x_all[idx], y_all[idx], n_train, cfg,
                    mask_rng=dropout_rng,
                )
            except TrainingError as exc:
                ids = [train_ds.items[i].id for i in idx[:4]]
                raise TrainingError(f"{exc}; batch starts with ids {ids}") from exc
            _sgd_update(params, state, grads, cfg)
            loss_sum += loss

        entry = {
            "epoch": epoch,
            "loss_total": loss_sum / len(batches),
            "lr": state.lr,
            "lr_decayed": False,
        }
        if val_ds is not None:
            s = scorer_forward(params, val_ds.features_matrix(), mode="eval")["s"]
            spc = spearman(val_ds.ranks(), s)
            entry["val_spc"] = spc
            if spc > best_spc:
                best_spc = spc
                best_params = params.copy()
                stale = 0
            else:
                stale += 1
                if stale >= cfg.plateau_epochs:
                    state.lr *= cfg.lr_decay
                    entry["lr_decayed"] = True
                    stale = 0
        log.append(entry)

    if val_ds is None:
        best_params = params
    return best_params, log


def tune_baseline(
    method: str,
    dataset: RankedDataset,
    cfg: TrainConfig,
    lrs=(1e-2, 1e-3),
    margins=(0.5, 1.0),
) -> tuple[ScorerParams, list[dict], TrainConfig]:
    """Small documented grid (lr, and margin for hinge) selected on the
    training log's best validation Spearman."""
    grid = [(lr, mg) for lr in lrs for mg in (margins if method == "hinge" else (cfg.margin,))]
    best = None
    for lr, mg in grid:
        trial_cfg = replace(cfg, lr_init=lr, margin=mg)
        params, log = train_baseline(method, dataset, trial_cfg)
        spc = max((e.get("val_spc", -np.inf) for e in log), default=-np.inf)
        if best is None or spc > best[0]:
            best = (spc, params, log, trial_cfg)
    assert best is not None
    return best[1], best[2], best[3]


def save_scorer_checkpoint(path, params: ScorerParams, cfg: TrainConfig, method: str) -> None:
    header = {
        "method": method,
        "feature_dim": params.feature_dim,
        "hidden": list(params.hidden),
        "dropout_p": params.dropout_p,
        "seed": cfg.seed,
        "cfg": cfg.to_dict(),
    }
    _write_checkpoint(path, header, params.arrays())


def load_scorer_checkpoint(path) -> tuple[ScorerParams, dict]:
    header, arrays = _read_checkpoint(path)
    if header.get("method") not in BASELINE_METHODS:
        raise ValueError(f"{path}: not a baseline checkpoint ({header.get('method')!r})")
    return ScorerParams(dropout_p=header["dropout_p"], **arrays), header
