"""Command-line front end.

Subcommands: decompose (EEMD to CSV/SVG), train (fit the forecast model and
write a checkpoint), evaluate (forecasts plus metrics against a checkpoint),
predict (forecasts without actuals). Every command writes a manifest.json
recording the config snapshot, input digest and tool version; rerunning with
the same flags on the same input reproduces the numeric outputs byte for
byte.

Exit codes: 0 success, 1 runtime/numeric failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, lstm, pipeline
from .data import SplitSpec, load_csv, to_series
from .eemd import EemdConfig, eemd
from .emd import SiftConfig, write_imf_csv
from .svgplot import line_chart, stacked_chart

_FIELDS = ("timestamp", "open", "high", "low", "close", "volume")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return "sha256:" + digest.hexdigest()


def _write_manifest(out_dir: Path, command: str, config_snapshot: dict, input_path) -> None:
    manifest = {
        "command": command,
        "config_snapshot": config_snapshot,
        "input_digest": _sha256(input_path),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="OHLCV CSV file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--field", default="close", choices=_FIELDS[1:])
    p.add_argument("--interval", type=int, default=14400, help="bar interval in seconds")
    p.add_argument("--gap-policy", default="error", choices=["error", "forward-fill"])
    for f in _FIELDS:
        p.add_argument(f"--col-{f}", default=f, help=f"CSV column holding {f}")
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap (HHT_FORECAST_THREADS env var overrides)")


def _add_eemd_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--noise", type=float, default=0.2,
                   help="white-noise std as a fraction of the signal std")
    p.add_argument("--max-imfs", type=int, default=7)
    p.add_argument("--ensemble", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sd-threshold", type=float, default=0.2)
    p.add_argument("--max-sift", type=int, default=50)
    p.add_argument("--boundary", default="mirror", choices=["mirror", "clamp"])
    p.add_argument("--alignment", default="pad-with-zeros",
                   choices=["pad-with-zeros", "truncate-to-min"])


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lookback", type=int, default=3)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--epochs", type=int, default=120)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=25)
    p.add_argument("--clip-norm", type=float, default=None)
    p.add_argument("--strategy", default="joint", choices=["joint", "per-imf"])
    p.add_argument("--scaler", default="std", choices=["std", "paper-exact"])
    p.add_argument("--train-frac", type=float, default=0.70)
    p.add_argument("--val-frac", type=float, default=0.15)
    p.add_argument("--test-frac", type=float, default=0.15)


def _threads(args) -> int:
    env = os.environ.get("HHT_FORECAST_THREADS")
    if env:
        return max(1, int(env))
    return max(1, args.threads)


def _load_series(args):
    schema = {f: getattr(args, f"col_{f}") for f in _FIELDS}
    records = load_csv(args.input, schema)
    return to_series(records, args.field, args.interval,
                     args.gap_policy.replace("-", "_"))


def _eemd_config(args) -> EemdConfig:
    return EemdConfig(
        noise_amplitude=args.noise,
        ensemble_size=args.ensemble,
        seed=args.seed,
        sift=SiftConfig(max_imfs=args.max_imfs, max_sift_iterations=args.max_sift,
                        sd_threshold=args.sd_threshold, boundary_policy=args.boundary),
        alignment_policy=args.alignment.replace("-", "_"),
    )


def _pipeline_config(args) -> pipeline.PipelineConfig:
    return pipeline.PipelineConfig(
        eemd=_eemd_config(args),
        scaler_mode=args.scaler,
        split=SplitSpec(args.train_frac, args.val_frac, args.test_frac),
        lookback=args.lookback,
        horizon=args.horizon,
        hidden_size=args.hidden,
        train=lstm.TrainConfig(
            learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
            shuffle_seed=args.seed + 1, early_stop_patience=args.patience,
            clip_norm=args.clip_norm),
        strategy=args.strategy.replace("-", "_"),
        model_seed=args.seed + 2,
        threads=_threads(args),
    )


def _data_prep(args) -> dict:
    prep = {"field": args.field, "interval": args.interval,
            "gap_policy": args.gap_policy.replace("-", "_")}
    prep["columns"] = {f: getattr(args, f"col_{f}") for f in _FIELDS}
    return prep


def _write_forecast_csv(path, report: pipeline.ForecastReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("index,actual,predicted\n")
        for i, a, p in zip(report.index_map, report.actuals, report.predictions):
            fh.write(f"{int(i)},{a:.17g},{p:.17g}\n")


def cmd_decompose(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = _load_series(args)
    config = _eemd_config(args)
    result = eemd(series, config, threads=_threads(args))

    write_imf_csv(out_dir / "imfs.csv", result.imf_set, series.timestamps())
    rows = [("input", series.values)]
    rows += [(f"imf{imf.index}", imf.values) for imf in result.imf_set.imfs]
    rows += [("residue", result.imf_set.residue)]
    stacked_chart(out_dir / "imfs.svg", rows, title=f"EEMD of {series.name}")
    with open(out_dir / "eemd_config.json", "w", encoding="utf-8") as fh:
        json.dump({
            "seed": config.seed, "noise_amplitude": config.noise_amplitude,
            "ensemble_size": config.ensemble_size,
            "alignment_policy": config.alignment_policy,
            "boundary_policy": config.sift.boundary_policy,
            "max_imfs": config.sift.max_imfs,
            "trial_imf_counts": result.trial_imf_counts,
        }, fh, indent=2, sort_keys=True)
    snapshot = {"eemd": pipeline.config_to_dict(pipeline.PipelineConfig(eemd=config))["eemd"],
                "data": _data_prep(args)}
    _write_manifest(out_dir, "decompose", snapshot, args.input)
    print(f"wrote {out_dir / 'imfs.csv'} ({len(result.imf_set.imfs)} IMFs + residue)")
    return 0


def cmd_train(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = _load_series(args)
    config = _pipeline_config(args)
    result = pipeline.run_pipeline(series, config)

    pipeline.save_checkpoint(out_dir / "checkpoint.json", result,
                             data_prep=_data_prep(args), tool_version=__version__)
    with open(out_dir / "history.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("model,epoch,train_loss,val_loss\n")
        for m, history in enumerate(result.histories):
            for row in history:
                fh.write(f"{m},{row['epoch']},{row['train_loss']:.17g},"
                         f"{row['val_loss']:.17g}\n")
    snapshot = {"pipeline": pipeline.config_to_dict(config), "data": _data_prep(args)}
    _write_manifest(out_dir, "train", snapshot, args.input)
    for name, report in result.reports.items():
        print(f"{name}: rmse={report.metrics['rmse']:.6g} mae={report.metrics['mae']:.6g}")
    print(f"wrote {out_dir / 'checkpoint.json'}")
    return 0


def _load_checkpoint_for(args):
    ckpt = pipeline.load_checkpoint(args.checkpoint)
    config = ckpt["config"]
    if args.hidden is not None and args.hidden != config.hidden_size:
        raise ValueError(
            f"checkpoint was trained with hidden size {config.hidden_size}, "
            f"got --hidden {args.hidden}")
    if args.lookback is not None and args.lookback != config.lookback:
        raise ValueError(
            f"checkpoint was trained with lookback {config.lookback}, "
            f"got --lookback {args.lookback}")
    # Data-prep flags default to what the checkpoint recorded.
    prep = ckpt["data"]
    if prep:
        args.field = prep.get("field", args.field)
        args.interval = prep.get("interval", args.interval)
        for f, col in prep.get("columns", {}).items():
            setattr(args, f"col_{f}", col)
        args.gap_policy = prep.get("gap_policy", args.gap_policy).replace("_", "-")
    return ckpt, config


def cmd_evaluate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt, config = _load_checkpoint_for(args)
    series = _load_series(args)
    reports = pipeline.predict_with_models(
        series, config, ckpt["models"], ckpt["channel_scalers"], ckpt["price_scaler"])

    metrics = {}
    for name, report in reports.items():
        naive = series.values[report.index_map - config.horizon]
        metrics[name] = {
            "model": report.metrics,
            "persistence_baseline": pipeline.evaluate(naive, report.actuals),
        }
    test = reports["test"]
    _write_forecast_csv(out_dir / "forecast.csv", test)
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
    line_chart(out_dir / "forecast.svg",
               [("actual", test.actuals), ("predicted", test.predictions)],
               title=f"{series.name} forecast (test split)")
    snapshot = {"pipeline": pipeline.config_to_dict(config), "data": _data_prep(args),
                "checkpoint": str(args.checkpoint)}
    _write_manifest(out_dir, "evaluate", snapshot, args.input)
    print(f"test rmse={test.metrics['rmse']:.6g} "
          f"(persistence {metrics['test']['persistence_baseline']['rmse']:.6g})")
    return 0


def cmd_predict(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt, config = _load_checkpoint_for(args)
    series = _load_series(args)
    reports = pipeline.predict_with_models(
        series, config, ckpt["models"], ckpt["channel_scalers"], ckpt["price_scaler"],
        splits=("validation", "test"))
    with open(out_dir / "predictions.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("index,predicted\n")
        for name in ("validation", "test"):
            rep = reports[name]
            for i, p in zip(rep.index_map, rep.predictions):
                fh.write(f"{int(i)},{p:.17g}\n")
    snapshot = {"pipeline": pipeline.config_to_dict(config), "data": _data_prep(args),
                "checkpoint": str(args.checkpoint)}
    _write_manifest(out_dir, "predict", snapshot, args.input)
    print(f"wrote {out_dir / 'predictions.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hht-forecast",
        description="EEMD decomposition and LSTM next-bar price forecasting")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="write the IMF stack for an input series")
    _add_data_flags(p)
    _add_eemd_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", help="run the full pipeline and save a checkpoint")
    _add_data_flags(p)
    _add_eemd_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    for name, fn in (("evaluate", cmd_evaluate), ("predict", cmd_predict)):
        p = sub.add_parser(name, help=f"{name} forecasts from a saved checkpoint")
        _add_data_flags(p)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--hidden", type=int, default=None,
                       help="must match the checkpoint when given")
        p.add_argument("--lookback", type=int, default=None,
                       help="must match the checkpoint when given")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not Path(args.input).is_file():
        parser.exit(2, f"{parser.prog}: error: input file not found: {args.input}\n"
                       f"{parser.format_usage()}")
    try:
        return args.func(args)
    except Exception as exc:  # runtime/numeric failure -> exit 1
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
