"""The coarse-to-fine ranking network and its training loop.

A shared two-layer trunk feeds two heads. The ordinal head predicts the
m-1 threshold bits of the rank bin through one shared weight vector with
per-threshold biases, which structurally orders the threshold
probabilities like the biases. The offset head reads the trunk output
concatenated with the threshold logits and produces a bounded within-bin
refinement. Training optimizes summed binary cross-entropy on the
threshold bits plus a pairwise logistic loss on the combined scores, with
hand-derived gradients throughout (no autodiff).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import backend as K
from .data import RankedDataset, subset
from .encoding import EncodingConfig, encode_ordinal_batch, normalize_score
from .metrics import spearman
from .numerics import DimensionError, RngStream

CHECKPOINT_FORMAT = "rankforge-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 30
    momentum: float = 0.9
    batch_size: int = 32
    weight_decay: float = 1e-4
    lr_init: float = 1e-2
    lr_decay: float = 0.1
    plateau_epochs: int = 10
    m: int = 10
    seed: int = 0
    dropout_p: float = 0.5
    val_fraction: float = 0.1
    hidden: tuple[int, int] = (512, 128)
    margin: float = 1.0

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "momentum": self.momentum,
            "batch_size": self.batch_size,
            "weight_decay": self.weight_decay,
            "lr_init": self.lr_init,
            "lr_decay": self.lr_decay,
            "plateau_epochs": self.plateau_epochs,
            "m": self.m,
            "seed": self.seed,
            "dropout_p": self.dropout_p,
            "val_fraction": self.val_fraction,
            "hidden": list(self.hidden),
            "margin": self.margin,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


@dataclass
class OrbNetParams:
    """Trunk weights plus the ordinal and offset heads.

    Parameter array order is fixed (see ARRAY_NAMES); checkpoints and the
    flatten/unflatten helpers rely on it.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w_ord: np.ndarray
    b_ord: np.ndarray
    w_off: np.ndarray
    b_off: np.ndarray
    enc: EncodingConfig
    dropout_p: float = 0.5

    ARRAY_NAMES = ("w1", "b1", "w2", "b2", "w_ord", "b_ord", "w_off", "b_off")
    DECAYED = ("w1", "w2", "w_ord", "w_off")

    @property
    def feature_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> tuple[int, int]:
        return (self.w1.shape[0], self.w2.shape[0])

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.ARRAY_NAMES}

    def copy(self) -> "OrbNetParams":
        return replace(self, **{n: getattr(self, n).copy() for n in self.ARRAY_NAMES})

    def flatten(self) -> np.ndarray:
        return np.concatenate([getattr(self, n).ravel() for n in self.ARRAY_NAMES])

    def unflatten(self, vec: np.ndarray) -> "OrbNetParams":
        out = {}
        pos = 0
        for n in self.ARRAY_NAMES:
            a = getattr(self, n)
            out[n] = np.asarray(vec[pos : pos + a.size], dtype=np.float64).reshape(a.shape)
            pos += a.size
        if pos != vec.size:
            raise DimensionError(f"expected {pos} entries, got {vec.size}")
        return replace(self, **out)


def init_params(
    feature_dim: int,
    enc: EncodingConfig,
    rng: RngStream,
    hidden: tuple[int, int] = (512, 128),
    dropout_p: float = 0.5,
) -> OrbNetParams:
    """Fan-in-scaled uniform weights, zero biases, and ordinal biases
    linearly spaced descending so training starts from a consistent
    ordinal state."""
    h1, h2 = hidden
    n_thresh = enc.m - 1

    def u(r, shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return r.uniform(size=shape, low=-bound, high=bound)

    return OrbNetParams(
        w1=u(rng.derive("w1"), (h1, feature_dim), feature_dim),
        b1=np.zeros(h1),
        w2=u(rng.derive("w2"), (h2, h1), h1),
        b2=np.zeros(h2),
        w_ord=u(rng.derive("w_ord"), (h2,), h2),
        b_ord=np.linspace(1.0, -1.0, n_thresh),
        w_off=u(rng.derive("w_off"), (h2 + n_thresh,), h2 + n_thresh),
        b_off=np.zeros(1),
        enc=enc,
        dropout_p=dropout_p,
    )


@dataclass(frozen=True)
class ScoreTriple:
    """Per-item outputs: threshold logits, coarse score, raw offset, and
    the combined score s = s_bar + tau*sigmoid(s_tilde)."""

    l: np.ndarray
    s_bar: float
    s_tilde: float
    s: float


def make_dropout_masks(
    shape_h1: tuple[int, int], shape_h2: tuple[int, int], p: float, rng: RngStream
) -> tuple[np.ndarray, np.ndarray]:
    """Inverted-dropout masks with values in {0, 1/(1-p)}."""
    keep = 1.0 - p
    m1 = rng.bernoulli(keep, size=shape_h1).astype(np.float64) / keep
    m2 = rng.bernoulli(keep, size=shape_h2).astype(np.float64) / keep
    return m1, m2


def forward_batch(
    params: OrbNetParams,
    x: np.ndarray,
    mode: str = "eval",
    masks: tuple[np.ndarray, np.ndarray] | None = None,
    mask_rng: RngStream | None = None,
) -> dict:
    """Batched forward pass; returns a cache dict for the backward pass.

    mode "train" scores with the soft (differentiable) coarse sum and
    applies dropout; "eval" scores with the hard bin left bound and no
    dropout; "mc" scores hard but keeps dropout active for stochastic
    inference passes. Explicit masks override mask_rng.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.feature_dim:
        raise DimensionError(
            f"expected features of dim {params.feature_dim}, got shape {x.shape}"
        )
    if mode not in ("train", "eval", "mc"):
        raise ValueError(f"unknown mode {mode!r}")
    use_dropout = mode in ("train", "mc") and params.dropout_p > 0.0
    soft = mode == "train"
    b = x.shape[0]
    h1n, h2n = params.hidden

    a1 = K.linear_forward(x, params.w1, params.b1)
    h1 = K.relu_forward(a1)
    if use_dropout:
        if masks is None:
            if mask_rng is None:
                raise ValueError("dropout requires masks or a mask_rng")
            masks = make_dropout_masks((b, h1n), (b, h2n), params.dropout_p, mask_rng)
        m1, m2 = masks
    else:
        m1 = m2 = None
    h1d = h1 * m1 if m1 is not None else h1

    a2 = K.linear_forward(h1d, params.w2, params.b2)
    h2 = K.relu_forward(a2)
    h2d = h2 * m2 if m2 is not None else h2

    u = h2d @ params.w_ord
    logits = u[:, None] + params.b_ord[None, :]
    probs = K.sigmoid(logits)
    tau = params.enc.tau
    if soft:
        s_bar = tau * probs.sum(axis=1)
    else:
        s_bar = tau * (logits > 0.0).sum(axis=1).astype(np.float64)

    z_in = np.concatenate([h2d, logits], axis=1)
    z = z_in @ params.w_off + params.b_off[0]
    sig_z = K.sigmoid(z)
    s = s_bar + tau * sig_z

    return {
        "x": x, "a1": a1, "h1d": h1d, "a2": a2, "h2d": h2d,
        "m1": m1, "m2": m2,
        "logits": logits, "probs": probs, "z": z, "sig_z": sig_z,
        "s_bar": s_bar, "s": s, "soft": soft,
    }


def forward(
    params: OrbNetParams,
    f: np.ndarray,
    mode: str = "eval",
    mask_rng: RngStream | None = None,
) -> ScoreTriple:
    """Single-item forward pass."""
    cache = forward_batch(params, np.asarray(f, dtype=np.float64)[None, :], mode, mask_rng=mask_rng)
    return ScoreTriple(
        l=cache["logits"][0].copy(),
        s_bar=float(cache["s_bar"][0]),
        s_tilde=float(cache["z"][0]),
        s=float(cache["s"][0]),
    )


def loss_coarse(logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean over the batch of the per-item summed threshold BCE."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if logits.shape != targets.shape:
        raise DimensionError(f"logits {logits.shape} vs targets {targets.shape}")
    total, _ = K.bce_logits(logits, targets)
    return total / logits.shape[0]


def loss_fine(scores: np.ndarray, ranks: np.ndarray) -> float:
    """Pairwise logistic loss over all ordered in-batch pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[0] < 2:
        warnings.warn("pairwise loss over a batch of one is defined as 0")
        return 0.0
    loss, _ = K.pairwise_logistic(scores, np.asarray(ranks))
    return loss


def compute_loss_and_grads(
    params: OrbNetParams,
    x: np.ndarray,
    ranks: np.ndarray,
    masks: tuple[np.ndarray, np.ndarray] | None = None,
    mask_rng: RngStream | None = None,
) -> tuple[dict, dict[str, np.ndarray]]:
    """Total training loss (coarse + fine) and hand-derived gradients.

    Returns ({"total", "coarse", "fine"}, grads keyed like ARRAY_NAMES).
    """
    ranks = np.asarray(ranks, dtype=np.int64)
    b = x.shape[0]
    cache = forward_batch(params, x, mode="train", masks=masks, mask_rng=mask_rng)
    logits, probs = cache["logits"], cache["probs"]
    tau = params.enc.tau
    targets = encode_ordinal_batch(ranks, params.enc)

    bce_total, bce_dl = K.bce_logits(logits, targets)
    l_coarse = bce_total / b

    # The pairwise loss sees scores on the published (0, 1] scale; raw
    # combined scores span (0, n] and would saturate the pair sigmoid.
    n = params.enc.n
    if b >= 2:
        l_fine, ds_norm = K.pairwise_logistic(cache["s"] / n, ranks)
        ds = ds_norm / n
    else:
        warnings.warn("pairwise loss over a batch of one is defined as 0")
        l_fine, ds = 0.0, np.zeros(b)

    total = l_coarse + l_fine
    if not np.isfinite(total):
        raise TrainingError(f"non-finite loss on batch of {b} items")

    # Backward. ds -> dz (offset), and three paths into the logits:
    # coarse BCE, the soft coarse sum, and the offset head's logit input.
    dz = ds * tau * cache["sig_z"] * (1.0 - cache["sig_z"])
    h2n = params.hidden[1]
    dzin = dz[:, None] * params.w_off[None, :]
    dh2d_off, dl_off = dzin[:, :h2n], dzin[:, h2n:]
    z_in = np.concatenate([cache["h2d"], logits], axis=1)
    dw_off = z_in.T @ dz
    db_off = np.array([dz.sum()])

    dl = bce_dl / b + ds[:, None] * tau * probs * (1.0 - probs) + dl_off
    du = dl.sum(axis=1)
    db_ord = dl.sum(axis=0)
    dw_ord = cache["h2d"].T @ du
    dh2d = dh2d_off + du[:, None] * params.w_ord[None, :]

    dh2 = dh2d * cache["m2"] if cache["m2"] is not None else dh2d
    da2 = K.relu_backward(dh2, cache["a2"])
    dh1d, dw2, db2 = K.linear_backward(cache["h1d"], params.w2, da2)
    dh1 = dh1d * cache["m1"] if cache["m1"] is not None else dh1d
    da1 = K.relu_backward(dh1, cache["a1"])
    _, dw1, db1 = K.linear_backward(cache["x"], params.w1, da1)

    losses = {"total": total, "coarse": l_coarse, "fine": l_fine}
    grads = {
        "w1": dw1, "b1": db1, "w2": dw2, "b2": db2,
        "w_ord": dw_ord, "b_ord": db_ord, "w_off": dw_off, "b_off": db_off,
    }
    return losses, grads


def total_loss(
    params: OrbNetParams,
    x: np.ndarray,
    ranks: np.ndarray,
    masks: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Training loss alone; the finite-difference oracle probes this."""
    ranks = np.asarray(ranks, dtype=np.int64)
    cache = forward_batch(params, x, mode="train", masks=masks)
    targets = encode_ordinal_batch(ranks, params.enc)
    l_c = loss_coarse(cache["logits"], targets)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        l_f = loss_fine(cache["s"] / params.enc.n, ranks)
    return l_c + l_f


@dataclass
class SgdState:
    """Momentum buffers, one per parameter array."""

    velocity: dict[str, np.ndarray]
    lr: float

    @classmethod
    def fresh(cls, params: OrbNetParams, lr: float) -> "SgdState":
        return cls(
            velocity={n: np.zeros_like(a) for n, a in params.arrays().items()}, lr=lr
        )


def sgd_update(
    params, state: SgdState, grads: dict[str, np.ndarray], cfg: TrainConfig
) -> None:
    """In-place SGD with momentum; L2 decay on weights, not biases."""
    for name, g in grads.items():
        p = getattr(params, name)
        if cfg.weight_decay and name in params.DECAYED:
            g = g + cfg.weight_decay * p
        v = state.velocity[name]
        v *= cfg.momentum
        v += g
        p -= state.lr * v


def train_step(
    params: OrbNetParams,
    batch: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    rng: RngStream,
    state: SgdState | None = None,
) -> tuple[OrbNetParams, dict]:
    """One SGD-with-momentum step on a (features, ranks) batch.

    Returns updated parameters and the loss components. When no optimizer
    state is passed, a fresh zero-velocity state is used (single-step
    semantics for tests).
    """
    x, ranks = batch
    params = params.copy()
    if state is None:
        state = SgdState.fresh(params, cfg.lr_init)
    try:
        losses, grads = compute_loss_and_grads(params, x, ranks, mask_rng=rng)
    except TrainingError as exc:
        raise TrainingError(f"{exc}; first ids unavailable at this level") from exc
    sgd_update(params, state, grads, cfg)
    return params, losses


def _epoch_batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def val_spearman(params: OrbNetParams, ds: RankedDataset) -> float:
    scores = predict_scores_array(params, ds.features_matrix())
    return spearman(ds.ranks(), scores)


def train(dataset: RankedDataset, cfg: TrainConfig) -> tuple[OrbNetParams, list[dict]]:
    """Full training loop with a held-out validation split.

    Shuffled mini-batches, SGD with momentum, L2 decay, and learning-rate
    decay after `plateau_epochs` epochs without validation-Spearman
    improvement. Returns the best-validation parameters and the per-epoch
    log (loss components, validation Spearman, lr, decay events).
    """
    n = len(dataset)
    root = RngStream(cfg.seed, "train")
    perm = root.derive("val-split").permutation(n)
    n_val = int(round(cfg.val_fraction * n))
    n_val = max(0, min(n_val, n - 2))
    if n_val < 2:
        n_val = 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    train_ds = subset(dataset, np.sort(train_idx))
    val_ds = subset(dataset, np.sort(val_idx)) if n_val >= 2 else None

    n_train = len(train_ds)
    if cfg.m > n_train:
        raise TrainingError(f"m={cfg.m} exceeds training-set size {n_train}")
    enc = EncodingConfig(n=n_train, m=cfg.m)
    params = init_params(
        train_ds.feature_dim, enc, root.derive("init"),
        hidden=cfg.hidden, dropout_p=cfg.dropout_p,
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
        order = batching.permutation(n_train)
        sums = {"total": 0.0, "coarse": 0.0, "fine": 0.0}
        nb = 0
        for idx in _epoch_batches(n_train, cfg.batch_size, order):
            try:
                losses, grads = compute_loss_and_grads(
                    params, x_all[idx], y_all[idx], mask_rng=dropout_rng
                )
            except TrainingError as exc:
                ids = [train_ds.items[i].id for i in idx[:4]]
                raise TrainingError(f"{exc}; batch starts with ids {ids}") from exc
            sgd_update(params, state, grads, cfg)
            for k in sums:
                sums[k] += losses[k]
            nb += 1

        entry = {
            "epoch": epoch,
            "loss_total": sums["total"] / nb,
            "loss_coarse": sums["coarse"] / nb,
            "loss_fine": sums["fine"] / nb,
            "lr": state.lr,
            "lr_decayed": False,
        }
        if val_ds is not None:
            spc = val_spearman(params, val_ds)
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


def predict_scores_array(params: OrbNetParams, x: np.ndarray) -> np.ndarray:
    """Eval-mode combined scores (unnormalized) for a feature matrix."""
    return forward_batch(params, x, mode="eval")["s"]


def predict_scores(params: OrbNetParams, dataset: RankedDataset) -> list[tuple[str, float]]:
    """Per-item normalized scores s/n in (0, 1], in dataset order."""
    s = predict_scores_array(params, dataset.features_matrix())
    norm = normalize_score(s, params.enc)
    return [(it.id, float(norm[i])) for i, it in enumerate(dataset.items)]


def rank_by_score(scored: list[tuple[str, float]]) -> list[str]:
    """Item ids sorted by descending score, ties broken by id."""
    return [i for i, _ in sorted(scored, key=lambda t: (-t[1], t[0]))]


# ---------------------------------------------------------------------------
# Checkpoints: one JSON header line, then flat little-endian float64 arrays
# in declared order.


def _write_checkpoint(path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    header = dict(header)
    header["format"] = CHECKPOINT_FORMAT
    header["version"] = CHECKPOINT_VERSION
    header["arrays"] = [
        {"name": n, "shape": list(a.shape)} for n, a in arrays.items()
    ]
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.readline()
        header = json.loads(raw.decode("utf-8"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
        arrays = {}
        for spec_ in header["arrays"]:
            shape = tuple(spec_["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path}: truncated array {spec_['name']!r}")
            arrays[spec_["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after declared arrays")
    return header, arrays


def save_checkpoint(
    path, params: OrbNetParams, cfg: TrainConfig, method: str = "orbnet"
) -> None:
    header = {
        "method": method,
        "feature_dim": params.feature_dim,
        "hidden": list(params.hidden),
        "m": params.enc.m,
        "enc_n": params.enc.n,
        "tau": params.enc.tau,
        "dropout_p": params.dropout_p,
        "seed": cfg.seed,
        "cfg": cfg.to_dict(),
    }
    _write_checkpoint(path, header, params.arrays())


def load_checkpoint(path) -> tuple[OrbNetParams, dict]:
    header, arrays = _read_checkpoint(path)
    if header.get("method") != "orbnet":
        raise ValueError(
            f"{path}: checkpoint holds method {header.get('method')!r}, not orbnet"
        )
    enc = EncodingConfig(n=header["enc_n"], m=header["m"])
    params = OrbNetParams(
        enc=enc, dropout_p=header["dropout_p"], **arrays
    )
    return params, header
