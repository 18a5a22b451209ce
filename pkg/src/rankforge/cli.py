"""Command-line entry point wiring every module into runnable experiments.

All randomness flows from --seed through named derived streams, so any
subcommand rerun with identical flags writes byte-identical artifacts
(per backend).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import baselines, data, experiments, metrics, model


def _parse_hidden(text: str) -> tuple[int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("hidden must be two comma-separated sizes")
    return (parts[0], parts[1])


def _parse_beta_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",")]


def _parse_int_list(text: str) -> list[int]:
    return [int(p) for p in text.split(",")]


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", default="orbnet", choices=experiments.METHODS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--m", type=int, default=10, help="ordinal bin count")
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--hidden", type=_parse_hidden, default=(512, 128))
    p.add_argument("--tune", action="store_true", help="baseline lr/margin grid search")


def _cfg_from_args(args) -> model.TrainConfig:
    return model.TrainConfig(
        epochs=args.epochs,
        m=args.m,
        seed=args.seed,
        dropout_p=args.dropout,
        batch_size=args.batch_size,
        lr_init=args.lr,
        hidden=args.hidden,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankforge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic ranked dataset")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--informative-dim", type=int, default=None)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--nonlinearity", default="linear", choices=["linear", "polynomial"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one model and save a checkpoint")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_train_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("cv", help="k-fold cross-validation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    _add_train_flags(p)

    p = sub.add_parser("variance", help="cross-validation across seeds")
    p.add_argument("--dataset", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.add_argument("--out", required=True, help="output directory")
    _add_train_flags(p)

    p = sub.add_parser("uncertainty", help="anchor/query confidence profiles")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", help="existing model; trains one when omitted")
    p.add_argument("--anchors", type=_parse_int_list, default=None,
                   help="1-based best-first anchor positions")
    p.add_argument("--n-passes", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    _add_train_flags(p)

    p = sub.add_parser("annotate-sim", help="simulated merge-sort annotation sweep")
    p.add_argument("--dataset", required=True)
    p.add_argument("--beta", type=_parse_beta_list, default=[0.0, 1.0, 2.0, 4.0, float("inf")])
    p.add_argument("--n-sub", type=_parse_int_list, default=[2, 3, 6, 8])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--listen", default="127.0.0.1:8008")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--image-source", default=None)

    return parser


def _cmd_generate(args) -> int:
    cfg = data.SyntheticConfig(
        n=args.n,
        d=args.d,
        informative_dim=args.informative_dim,
        feature_noise_sigma=args.sigma,
        nonlinearity=args.nonlinearity,
        seed=args.seed,
    )
    ds = data.generate_synthetic(cfg)
    data.save(ds, args.out)
    print(f"wrote {len(ds)} items to {args.out}")
    return 0


def _cmd_train(args) -> int:
    ds = data.load(args.dataset)
    cfg = _cfg_from_args(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.method == "orbnet":
        params, log = model.train(ds, cfg)
        model.save_checkpoint(out_dir / "model.ckpt", params, cfg, method="orbnet")
    elif args.tune:
        params, log, cfg = baselines.tune_baseline(args.method, ds, cfg)
        baselines.save_scorer_checkpoint(out_dir / "model.ckpt", params, cfg, args.method)
    else:
        params, log = baselines.train_baseline(args.method, ds, cfg)
        baselines.save_scorer_checkpoint(out_dir / "model.ckpt", params, cfg, args.method)
    (out_dir / "train_log.json").write_text(
        json.dumps({"method": args.method, "cfg": cfg.to_dict(), "log": log}, indent=1)
        + "\n",
        encoding="utf-8",
    )
    print(f"trained {args.method}; checkpoint in {out_dir}")
    return 0


def _load_any_checkpoint(path):
    header, _ = model._read_checkpoint(path)
    if header.get("method") == "orbnet":
        params, header = model.load_checkpoint(path)
        return params, header, lambda ds: [s for _, s in model.predict_scores(params, ds)]
    params, header = baselines.load_scorer_checkpoint(path)
    return params, header, lambda ds: [
        s for _, s in baselines.predict_baseline_scores(params, ds)
    ]


def _cmd_eval(args) -> int:
    ds = data.load(args.dataset)
    _, header, predict = _load_any_checkpoint(args.checkpoint)
    report = metrics.evaluate(header["method"], 0, ds.ranks(), predict(ds))
    config = {"command": "eval", "checkpoint": str(args.checkpoint), "dataset": str(args.dataset)}
    experiments.write_report_csv(args.out, config, [report])
    print(report.to_json())
    return 0


def _cmd_cv(args) -> int:
    ds = data.load(args.dataset)
    cfg = _cfg_from_args(args)
    rows, summary = experiments.run_cv(
        ds, args.method, args.k, cfg,
        out_dir=Path(args.out), config_extra={"dataset": str(args.dataset)},
    )
    print(
        f"{args.method}: spc {summary['spc']['mean']:.4f} ± {summary['spc']['std']:.4f} "
        f"over {len(rows)} folds"
    )
    return 0


def _cmd_variance(args) -> int:
    ds = data.load(args.dataset)
    cfg = _cfg_from_args(args)
    result = experiments.run_variance(
        ds, args.method, args.k, cfg, n_seeds=args.seeds,
        out_dir=Path(args.out), config_extra={"dataset": str(args.dataset)},
    )
    print(
        f"{args.method}: spc {result['spc_mean']:.4f} ± {result['spc_std']:.4f} "
        f"over {result['models']} models"
    )
    return 0


def _cmd_uncertainty(args) -> int:
    ds = data.load(args.dataset)
    cfg = _cfg_from_args(args)
    if args.checkpoint:
        params, header = model.load_checkpoint(args.checkpoint)
    else:
        params, _ = model.train(ds, cfg)
    anchors = args.anchors or experiments.default_anchor_positions(len(ds))
    experiments.run_uncertainty(
        ds, params, anchors, n_passes=args.n_passes, p=args.dropout, seed=args.seed,
        out_dir=Path(args.out), config_extra={"dataset": str(args.dataset)},
    )
    print(f"wrote {len(anchors)} confidence profiles to {args.out}")
    return 0


def _cmd_annotate_sim(args) -> int:
    ds = data.load(args.dataset)
    rows = experiments.run_annotate_sim(
        ds, args.beta, args.n_sub, args.seed,
        out_path=Path(args.out), config_extra={"dataset": str(args.dataset)},
    )
    print(f"wrote {len(rows)} sweep rows to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.listen.rpartition(":")
    app = create_app(Path(args.data_dir), args.image_source)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "cv": _cmd_cv,
    "variance": _cmd_variance,
    "uncertainty": _cmd_uncertainty,
    "annotate-sim": _cmd_annotate_sim,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (data.DatasetError, metrics.MetricError, model.TrainingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
