"""Experiment harness behind the CLI: cross-validation, seed-variance,
uncertainty profiles, and annotation-noise sweeps.

Every artifact file starts with a `# config: {...}` comment embedding the
fully resolved configuration and seed, so any row is reproducible from
the file alone. All writes are deterministic byte-for-byte for a given
configuration and backend.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import annotation, baselines, data, metrics, model, uncertainty
from .numerics import _mix_to_uint64

METHODS = ("orbnet",) + baselines.BASELINE_METHODS


def derive_seed(seed: int, *parts) -> int:
    """Stable 31-bit sub-seed for a named experiment branch."""
    return _mix_to_uint64(seed, *parts) % (2**31)


def train_method(method: str, train_ds, cfg: model.TrainConfig):
    """Dispatches to the right trainer; returns (params, log, predict_fn)."""
    if method == "orbnet":
        params, log = model.train(train_ds, cfg)
        return params, log, lambda ds: [s for _, s in model.predict_scores(params, ds)]
    if method in baselines.BASELINE_METHODS:
        params, log = baselines.train_baseline(method, train_ds, cfg)
        return params, log, lambda ds: [
            s for _, s in baselines.predict_baseline_scores(params, ds)
        ]
    raise ValueError(f"unknown method {method!r}")


def _config_comment(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True)


def write_report_csv(path, config: dict, rows: list[metrics.MetricReport]) -> None:
    lines = [_config_comment(config), metrics.MetricReport.CSV_HEADER]
    lines += [r.csv_row() for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def summarize(rows: list[metrics.MetricReport]) -> dict[str, dict[str, float]]:
    out = {}
    for name in ("spc", "pacc", "prc", "ktc"):
        vals = np.array([getattr(r, name) for r in rows])
        out[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    for k in (3, 5):
        vals = np.array([r.ndcg.get(k, np.nan) for r in rows])
        out[f"ndcg@{k}"] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def write_summary_csv(path, config: dict, method: str, summary: dict) -> None:
    cols = ["spc", "pacc", "prc", "ktc", "ndcg@3", "ndcg@5"]
    lines = [_config_comment(config), "method,stat," + ",".join(cols)]
    for stat in ("mean", "std"):
        lines.append(
            f"{method},{stat}," + ",".join(repr(summary[c][stat]) for c in cols)
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_cv(
    dataset: data.RankedDataset,
    method: str,
    k: int,
    cfg: model.TrainConfig,
    out_dir: Path | None = None,
    config_extra: dict | None = None,
) -> tuple[list[metrics.MetricReport], dict]:
    """k-fold cross-validation; per-fold metric rows plus mean/std summary."""
    pairs = data.kfold_split(dataset, k, cfg.seed)
    rows = []
    for fold, (train_ds, test_ds) in enumerate(pairs):
        fold_cfg = replace(cfg, seed=derive_seed(cfg.seed, "fold", fold))
        _, _, predict = train_method(method, train_ds, fold_cfg)
        scores = predict(test_ds)
        rows.append(metrics.evaluate(method, fold, test_ds.ranks(), scores))
    summary = summarize(rows)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        config = {
            "command": "cv",
            "method": method,
            "k": k,
            "cfg": cfg.to_dict(),
            **(config_extra or {}),
        }
        write_report_csv(out_dir / "cv_folds.csv", config, rows)
        write_summary_csv(out_dir / "cv_summary.csv", config, method, summary)
    return rows, summary


def run_variance(
    dataset: data.RankedDataset,
    method: str,
    k: int,
    cfg: model.TrainConfig,
    n_seeds: int = 10,
    out_dir: Path | None = None,
    config_extra: dict | None = None,
) -> dict:
    """Cross-validation across seeds; mean/std of Spearman over all models."""
    all_spc = []
    per_seed = []
    for s in range(n_seeds):
        seed_cfg = replace(cfg, seed=derive_seed(cfg.seed, "variance-seed", s))
        rows, _ = run_cv(dataset, method, k, seed_cfg)
        spcs = [r.spc for r in rows]
        all_spc.extend(spcs)
        per_seed.append((seed_cfg.seed, spcs))
    arr = np.array(all_spc)
    result = {
        "models": len(all_spc),
        "spc_mean": float(arr.mean()),
        "spc_std": float(arr.std()),
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        config = {
            "command": "variance",
            "method": method,
            "k": k,
            "n_seeds": n_seeds,
            "cfg": cfg.to_dict(),
            **(config_extra or {}),
        }
        lines = [_config_comment(config), "seed,fold,spc"]
        for seed, spcs in per_seed:
            for fold, v in enumerate(spcs):
                lines.append(f"{seed},{fold},{v!r}")
        lines.append(f"# summary: {json.dumps(result, sort_keys=True)}")
        (out_dir / "variance.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return result


def default_anchor_positions(n: int) -> list[int]:
    """1-based positions from the best item downward, mirroring the
    standard anchor sweep (1st, 10th, ..., 50th, last), clipped to n."""
    base = [1, 10, 20, 30, 40, 50]
    positions = [p for p in base if p <= n]
    if n not in positions:
        positions.append(n)
    return positions


def run_uncertainty(
    dataset: data.RankedDataset,
    params: model.OrbNetParams,
    anchors: list[int],
    n_passes: int,
    p: float,
    seed: int,
    out_dir: Path | None = None,
    config_extra: dict | None = None,
) -> dict[int, list[tuple[str, int, float]]]:
    """Confidence profiles for anchors given as 1-based best-first positions."""
    by_rank_desc = sorted(dataset.items, key=lambda it: -it.rank)
    profiles = {}
    for pos in anchors:
        if not 1 <= pos <= len(by_rank_desc):
            raise ValueError(f"anchor position {pos} outside 1..{len(by_rank_desc)}")
        anchor_id = by_rank_desc[pos - 1].id
        profiles[pos] = uncertainty.confidence_profile(
            params, anchor_id, dataset, n_passes=n_passes, p=p, seed=seed
        )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        config = {
            "command": "uncertainty",
            "anchors": anchors,
            "n_passes": n_passes,
            "dropout_p": p,
            "seed": seed,
            **(config_extra or {}),
        }
        for pos, rows in profiles.items():
            path = out_dir / f"confidence_anchor_pos{pos:03d}.csv"
            lines = [_config_comment({**config, "anchor_position": pos})]
            lines.append("query_id,truth_rank,confidence")
            lines += [f"{q},{r},{c!r}" for q, r, c in rows]
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return profiles


def run_annotate_sim(
    dataset: data.RankedDataset,
    betas: list[float],
    n_subs: list[int],
    seed: int,
    out_path: Path | None = None,
    config_extra: dict | None = None,
) -> list[dict]:
    """Simulated annotation sweep over oracle sharpness and sub-list size."""
    latent = {}
    for it in dataset.items:
        if it.latent_quality is None:
            raise data.DatasetError(
                f"item {it.id!r} has no latent quality; annotate-sim needs "
                "synthetic (or latent-annotated) data"
            )
        latent[it.id] = it.latent_quality
    ids = [it.id for it in dataset.items]
    rows = []
    for beta in betas:
        for n_sub in n_subs:
            combo_seed = derive_seed(seed, "annotate", repr(beta), n_sub)
            oracle = annotation.NoisyOracle(beta=beta, latent=latent, seed=combo_seed)
            session = annotation.new_session(ids, n_sub=n_sub, seed=combo_seed)
            _, stats = annotation.simulate(session, oracle)
            rows.append(
                {
                    "beta": beta,
                    "n_sub": n_sub,
                    "comparisons": stats["comparisons"],
                    "spc": stats["spc"],
                }
            )
    if out_path is not None:
        config = {
            "command": "annotate-sim",
            "betas": [repr(b) for b in betas],
            "n_subs": n_subs,
            "seed": seed,
            **(config_extra or {}),
        }
        lines = [_config_comment(config), "beta,n_sub,comparisons,spc"]
        for r in rows:
            lines.append(f"{r['beta']!r},{r['n_sub']},{r['comparisons']},{r['spc']!r}")
        Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


def noisy_rank_dataset(
    dataset: data.RankedDataset, beta: float, n_sub: int, seed: int
) -> tuple[data.RankedDataset, dict]:
    """Dataset with ranks replaced by a simulated noisy annotation pass."""
    latent = {it.id: it.latent_quality for it in dataset.items}
    if any(v is None for v in latent.values()):
        raise data.DatasetError("noisy annotation needs latent quality")
    oracle = annotation.NoisyOracle(beta=beta, latent=latent, seed=seed)
    session = annotation.new_session(
        [it.id for it in dataset.items], n_sub=n_sub, seed=seed
    )
    _, stats = annotation.simulate(session, oracle)
    exported = session.export_ranking()
    items = [
        data.RankedItem(it.id, it.features, exported[it.id], it.latent_quality)
        for it in dataset.items
    ]
    noisy = data.RankedDataset(
        items=items, feature_dim=dataset.feature_dim, provenance="annotation-export"
    )
    return noisy, stats
