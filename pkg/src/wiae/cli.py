"""Command-line front door: synth | train | forecast | evaluate.

Every command reads an optional JSON config, applies flag overrides
(flag > config > default), writes its artifacts plus a run manifest into
--out, and exits 0 on success, 1 on runtime failure (e.g. divergence), or
2 on validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timedelta
from pathlib import Path

from wiae import evaluation
from wiae.dataio import CsvSchema, RollingSchedule, SeriesFrame, load_csv, save_csv
from wiae.errors import DivergenceError, ValidationError, WiaeError
from wiae.forecasting import (
    ForecastRequest,
    generate_ensemble,
    point_mmae,
    point_mmse,
    quantile,
)
from wiae.manifest import write_manifest
from wiae.metrics import coverage_interval
from wiae.model import WiaeModel
from wiae.synthetic import Ar1Spec, MarkovChainSpec, gen_ar1, gen_markov
from wiae.training import TrainConfig, train

EPOCH = datetime(2023, 1, 1)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ValidationError(f"malformed config {path}: {err}")


def _resolve_seed(args, config, default=0):
    if args.seed is not None:
        return args.seed
    return int(config.get("seed", default))


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _float_list(text):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValidationError(f"malformed number list {text!r}")


def _json_dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- synth -----------------------------------------------------------------

def cmd_synth(args):
    t0 = time.perf_counter()
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    out = _out_dir(args)
    process = config.get("process")
    interval = timedelta(minutes=float(config.get("interval_minutes", 5)))

    if process == "ar1":
        spec = Ar1Spec(a=config["a"], sigma=config["sigma"], n=int(config["n"]), seed=seed)
        values = gen_ar1(spec)
    elif process == "markov":
        spec = MarkovChainSpec(
            states=tuple(config["states"]),
            transition=tuple(tuple(row) for row in config["transition"]),
            n=int(config["n"]),
            seed=seed,
        )
        values = gen_markov(spec)
    else:
        raise ValidationError(f"unknown process {process!r} (expected 'ar1' or 'markov')")

    frame = SeriesFrame(
        timestamps=[EPOCH + i * interval for i in range(values.size)],
        values=values,
        source=f"synth:{process}",
        interval=interval,
    )
    data_path = out / "data.csv"
    save_csv(frame, data_path)
    write_manifest(
        out, "synth",
        config={**config, "seed": seed},
        seed=seed,
        inputs=[args.config] if args.config else [],
        artifacts={"data_csv": data_path},
        timings={"total": time.perf_counter() - t0},
    )
    return EXIT_OK


# -- train -------------------------------------------------------------------

def cmd_train(args):
    t0 = time.perf_counter()
    config = _load_config(args.config)
    seed = _resolve_seed(args, config.get("train", {}))
    out = _out_dir(args)
    frame = load_csv(args.data, _schema_from(config))

    model_cfg = dict(config.get("model", {}))
    train_cfg = TrainConfig.from_dict({**config.get("train", {}), "seed": seed})
    model = WiaeModel(**{**model_cfg, "seed": int(model_cfg.get("seed", seed))})

    report_path = out / "report.csv"
    ckpt_path = out / "checkpoint.json"
    try:
        model, report = train(model, frame.values, train_cfg)
    except DivergenceError as err:
        if err.report is not None:
            err.report.to_csv(report_path)
        raise
    report.to_csv(report_path)
    model.save(ckpt_path)
    write_manifest(
        out, "train",
        config={"model": model_cfg, "train": train_cfg.to_dict()},
        seed=seed,
        inputs=[p for p in (args.data, args.config) if p],
        artifacts={"checkpoint": ckpt_path, "report_csv": report_path},
        timings={"total": time.perf_counter() - t0},
    )
    return EXIT_OK


def _schema_from(config):
    csv_cfg = config.get("csv", {})
    return CsvSchema(
        timestamp_col=csv_cfg.get("timestamp_col", "timestamp"),
        value_col=csv_cfg.get("value_col", "value"),
        timestamp_format=csv_cfg.get("timestamp_format"),
        gap_policy=csv_cfg.get("gap_policy", "reject"),
    )


# -- forecast ----------------------------------------------------------------

def cmd_forecast(args):
    t0 = time.perf_counter()
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    out = _out_dir(args)
    frame = load_csv(args.data, _schema_from(config))
    model = WiaeModel.load(args.checkpoint)

    request = ForecastRequest(
        history=frame.values,
        horizon=args.horizon if args.horizon is not None else int(config.get("horizon", 12)),
        ensemble=args.ensemble if args.ensemble is not None else int(config.get("ensemble", 1000)),
        seed=seed,
    )
    ens = generate_ensemble(model, request)

    quantiles = _float_list(args.quantiles) if args.quantiles else config.get("quantiles", [0.25, 0.5, 0.75])
    alphas = _float_list(args.alphas) if args.alphas else config.get("alphas", [0.5, 0.9])
    intervals = {}
    for a in alphas:
        # skip levels whose tails the ensemble cannot resolve
        if ens.k_samples * (1.0 - a) / 2.0 >= 1.0:
            iv = coverage_interval(ens, a)
            intervals[f"{a:g}"] = [iv.lower, iv.upper]
    blob = {
        "request": {
            "history_len": int(request.history.size),
            "horizon": request.horizon,
            "ensemble": request.ensemble,
            "seed": request.seed,
            "data": str(args.data),
            "checkpoint": str(args.checkpoint),
        },
        "mean": point_mmse(ens),
        "median": point_mmae(ens),
        "quantiles": {f"{q:g}": quantile(ens, q) for q in quantiles},
        "intervals": intervals,
    }
    if args.include_samples:
        blob["samples"] = ens.samples.tolist()
    forecast_path = out / "forecast.json"
    _json_dump(blob, forecast_path)
    write_manifest(
        out, "forecast",
        config={**config, "horizon": request.horizon, "ensemble": request.ensemble,
                "quantiles": quantiles, "alphas": alphas},
        seed=seed,
        inputs=[p for p in (args.data, args.checkpoint, args.config) if p],
        artifacts={"forecast_json": forecast_path},
        timings={"total": time.perf_counter() - t0},
    )
    return EXIT_OK


# -- evaluate ----------------------------------------------------------------

def cmd_evaluate(args):
    t0 = time.perf_counter()
    config = _load_config(args.config)
    seed = _resolve_seed(args, config)
    out = _out_dir(args)
    frame = load_csv(args.data, _schema_from(config))

    horizon = args.horizon if args.horizon is not None else int(config.get("horizon", 12))
    ensemble = args.ensemble if args.ensemble is not None else int(config.get("ensemble", 1000))
    alphas = _float_list(args.alphas) if args.alphas else config.get("alphas", [0.5, 0.9])
    stride = args.stride if args.stride is not None else int(config.get("stride", 1))
    max_targets = args.max_targets if args.max_targets is not None else config.get("max_targets")

    sources = [bool(args.checkpoint), bool(args.oracle_ar1), "schedule" in config]
    if sum(sources) != 1:
        raise ValidationError(
            "choose exactly one forecaster: --checkpoint, --oracle-ar1, or a "
            "'schedule' config section (rolling retraining)"
        )

    if args.oracle_ar1:
        a, sigma = _float_list(args.oracle_ar1)
        records = evaluation.ar1_oracle_records(
            a, sigma, frame.values, horizon,
            k=int(config.get("align_k", 0)), stride=stride, max_targets=max_targets,
        )
        per_split = None
        forecaster = {"oracle_ar1": {"a": a, "sigma": sigma}}
    elif args.checkpoint:
        model = WiaeModel.load(args.checkpoint)
        records = evaluation.model_records(
            model, frame.values, horizon, ensemble, seed,
            stride=stride, max_targets=max_targets,
        )
        per_split = None
        forecaster = {"checkpoint": str(args.checkpoint)}
    else:
        sched_cfg = config["schedule"]
        schedule = RollingSchedule(
            train_len=int(sched_cfg["train_len"]),
            period=int(sched_cfg["period"]),
            horizon=horizon,
            eval_span=sched_cfg.get("eval_span"),
        )
        train_cfg = TrainConfig.from_dict({**config.get("train", {}), "seed": seed})
        records, per_split = evaluation.rolling_records(
            frame.values, schedule, config.get("model", {}), train_cfg,
            ensemble, seed, stride=stride,
        )
        forecaster = {"schedule": sched_cfg}

    summary, rows = evaluation.summarize(records, alphas)

    metrics_path = out / "metrics.json"
    _json_dump({"forecaster": forecaster, "horizon": horizon, **summary}, metrics_path)

    csv_path = out / "metrics.csv"
    with open(csv_path, "w") as fh:
        fh.write("target_index,horizon,realized,forecast_mean,forecast_median,crps\n")
        for r in rows:
            fh.write(
                f"{r['target_index']},{r['horizon']},{r['realized']!r},"
                f"{r['forecast_mean']!r},{r['forecast_median']!r},{r['crps']!r}\n"
            )

    reliability_path = out / "reliability.csv"
    with open(reliability_path, "w") as fh:
        fh.write("alpha,empirical_coverage,cpe,acpe\n")
        for key in sorted(summary["coverage"], key=float):
            c = summary["coverage"][key]
            fh.write(f"{c['alpha']!r},{c['empirical']!r},{c['cpe']!r},{c['acpe']!r}\n")

    split_path = out / "crps_by_split.csv"
    with open(split_path, "w") as fh:
        fh.write("split,n_records,crps_avg\n")
        if per_split is None:
            fh.write(f"0,{summary['n_records']},{summary['crps_avg']!r}\n")
        else:
            for row in per_split:
                fh.write(f"{row['split']},{row['n_records']},{row['crps_avg']!r}\n")

    write_manifest(
        out, "evaluate",
        config={**config, "horizon": horizon, "ensemble": ensemble, "alphas": alphas,
                "stride": stride, "max_targets": max_targets, "forecaster": forecaster},
        seed=seed,
        inputs=[p for p in (args.data, args.checkpoint, args.config) if p],
        artifacts={"metrics_json": metrics_path, "metrics_csv": csv_path,
                   "reliability_csv": reliability_path, "crps_by_split_csv": split_path},
        timings={"total": time.perf_counter() - t0},
    )
    return EXIT_OK


# -- entry -------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="wiae",
        description="Innovations-autoencoder training and generative probabilistic forecasting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="pretrain an autoencoder on a series CSV")
    common(p)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("forecast", help="forecast the next horizon from a series CSV")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--ensemble", type=int, default=None)
    p.add_argument("--quantiles", default=None, help="comma-separated levels in (0,1)")
    p.add_argument("--alphas", default=None, help="comma-separated coverage levels")
    p.add_argument("--include-samples", action="store_true")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", help="backtest a forecaster over a series CSV")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--oracle-ar1", default=None, metavar="A,SIGMA",
                   help="score the analytic AR(1) conditional law instead of a model")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--ensemble", type=int, default=None)
    p.add_argument("--alphas", default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--max-targets", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except WiaeError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
