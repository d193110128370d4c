"""Command-line interface: synth, train, gridsearch, backtest, eval, gradcheck.

Every command is driven by a JSON run-config file plus a handful of flags,
and all randomness flows from the single configured seed (overridable via
the ``RELRANK_SEED`` environment variable), so re-running a command
reproduces its outputs byte for byte. Manifests carry no timestamps.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import backtest as bt
from . import ranker
from .diffcore import load_checkpoint, save_checkpoint
from .errors import ConfigError, DataError, NumericalError
from .marketdata import (
    MarketDataset,
    RelationTensor,
    build_dataset,
    load_prices,
    load_relations,
    synth_market,
    write_market,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

MODEL_KEYS = {
    "mode",
    "window",
    "hidden_units",
    "pairwise_weight",
    "graph_reg_weight",
    "epochs",
    "seed",
    "learning_rate",
    "normalized_loss",
    "softmax_divide_by_degree",
    "gcn_self_loops",
}
DATA_KEYS = {"prices_dir", "relations_file", "split", "split_fractions"}
RUN_KEYS = {"output_dir", "grids"}
ALL_KEYS = MODEL_KEYS | DATA_KEYS | RUN_KEYS


class RunConfig:
    """Validated run-config document: model settings plus data locations."""

    def __init__(self, raw: dict, base_dir: Path):
        unknown = set(raw) - ALL_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "prices_dir" not in raw:
            raise ConfigError("config requires 'prices_dir'")
        if ("split" in raw) == ("split_fractions" in raw):
            raise ConfigError("config requires exactly one of 'split', 'split_fractions'")
        self.raw = raw
        model_fields = {k: raw[k] for k in MODEL_KEYS if k in raw}
        seed_override = os.environ.get("RELRANK_SEED")
        if seed_override is not None:
            model_fields["seed"] = int(seed_override)
        self.model = ranker.RankModelConfig(**model_fields).validate()
        self.prices_dir = (base_dir / raw["prices_dir"]).resolve()
        self.relations_file = (
            (base_dir / raw["relations_file"]).resolve()
            if raw.get("relations_file")
            else None
        )
        self.split = tuple(raw["split"]) if "split" in raw else None
        self.fractions = (
            tuple(raw["split_fractions"]) if "split_fractions" in raw else None
        )
        self.output_dir = (
            (base_dir / raw["output_dir"]).resolve() if raw.get("output_dir") else None
        )
        self.grids = raw.get("grids")
        if not self.prices_dir.is_dir():
            raise DataError(f"prices_dir {self.prices_dir} is not a directory")
        if self.relations_file is not None and not self.relations_file.is_file():
            raise DataError(f"relations_file {self.relations_file} does not exist")
        if self.model.mode in ranker.RELATIONAL_MODES and self.relations_file is None:
            raise ConfigError(
                f"mode {self.model.mode!r} requires a 'relations_file'"
            )

    def load_data(self) -> tuple[MarketDataset, RelationTensor | None]:
        prices = load_prices(self.prices_dir)
        dataset = build_dataset(prices, boundaries=self.split, fractions=self.fractions)
        relations = None
        if self.relations_file is not None:
            relations = load_relations(self.relations_file, dataset.symbols)
        return dataset, relations


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return RunConfig(raw, path.parent)


def _require_output_dir(config: RunConfig, override: str | None) -> Path:
    if override:
        out = Path(override)
    elif config.output_dir is not None:
        out = config.output_dir
    else:
        raise ConfigError("no output directory: set 'output_dir' or pass --out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _history_payload(history: ranker.TrainHistory) -> dict:
    return {
        "epochs": [
            {
                "train_loss": float(e.train_loss),
                "val_mse": float(e.val_mse),
                "val_mrr": float(e.val_mrr),
                "val_irr": float(e.val_irr),
            }
            for e in history.epochs
        ],
        "selected_epoch": history.selected_epoch,
        "selection_rule": "max validation IRR, earliest epoch on ties",
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_synth(args) -> int:
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise DataError(f"output directory {out} is not empty (use --force)")
    market = synth_market(
        args.stocks,
        args.days,
        args.factors,
        args.density,
        args.noise,
        seed=args.seed,
    )
    write_market(out, market)
    print(f"wrote {args.stocks} price files + relations.json + factors.json to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_run_config(args.config)
    out = _require_output_dir(config, args.out)
    dataset, relations = config.load_data()
    params, history = ranker.train(dataset, relations, config.model)
    save_checkpoint(out / "checkpoint.rrck", params.arrays)
    manifest = {
        "config": asdict(config.model),
        "data": {
            "prices_dir": str(config.prices_dir),
            "relations_file": str(config.relations_file) if config.relations_file else None,
            "n_stocks": dataset.n_stocks,
            "n_labeled_days": dataset.n_labeled_days,
        },
        **_history_payload(history),
    }
    _write_json(out / "manifest.json", manifest)
    best = history.selected
    print(
        f"trained {config.model.mode}: selected epoch {history.selected_epoch} "
        f"(val mse {best.val_mse:.6g}, mrr {best.val_mrr:.4f}, irr {best.val_irr:.4f})"
    )
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    config = load_run_config(args.config)
    out = _require_output_dir(config, args.out)
    if not config.grids:
        raise ConfigError("gridsearch requires a 'grids' table in the config")
    dataset, relations = config.load_data()
    result = ranker.grid_search(
        dataset, relations, config.model, config.grids, workers=args.jobs
    )
    payload = {
        "best": asdict(result.best),
        "cells": [
            {
                "config": asdict(cell.config),
                "val_mse": float(cell.val_mse),
                "val_mrr": float(cell.val_mrr),
                "val_irr": float(cell.val_irr),
                "selected_epoch": cell.selected_epoch,
            }
            for cell in result.cells
        ],
        "selection_rule": "max validation IRR across cells, lexicographic ties",
    }
    _write_json(out / "gridsearch.json", payload)
    best_run = dict(config.raw)
    best_run.update(
        {k: v for k, v in asdict(result.best).items() if k in MODEL_KEYS}
    )
    _write_json(out / "best_config.json", best_run)
    print(f"grid search over {len(result.cells)} cells; best: {asdict(result.best)}")
    return EXIT_OK


def _check_model_matches(params: ranker.ModelParams, config: RunConfig, dataset, relations) -> None:
    rng = np.random.default_rng(0)
    n_types = relations.n_types if relations is not None else None
    expected = ranker.init_model_arrays(
        config.model, dataset.features.values.shape[2], n_types, rng
    )
    if sorted(expected) != sorted(params.arrays):
        raise DataError(
            "checkpoint does not match the configured mode: expected parameters "
            f"{sorted(expected)}, found {sorted(params.arrays)}"
        )
    for name, value in expected.items():
        if params.arrays[name].shape != value.shape:
            raise DataError(
                f"checkpoint parameter {name} has shape {params.arrays[name].shape}, "
                f"expected {value.shape}"
            )


def cmd_backtest(args) -> int:
    if args.k < 1:
        raise ConfigError(f"--k must be at least 1, got {args.k}")
    config = load_run_config(args.config)
    out = _require_output_dir(config, args.out)
    dataset, relations = config.load_data()
    params = ranker.ModelParams(config.model.mode, load_checkpoint(args.checkpoint))
    _check_model_matches(params, config, dataset, relations)
    ledger, report = bt.run_backtest(
        params, dataset, relations, config.model, args.k, oracle=args.oracle
    )
    dates = dataset.features.days
    day_labels = [dates[d] for d in ledger.day_ids]
    bt.write_ledger_csv(out / "ledger.csv", ledger, dates=day_labels)
    bt.write_curve_csv(out / "curve.csv", ledger, dates=day_labels)
    bt.write_report_json(out / "report.json", report)
    print(
        f"backtest top-{args.k}{' (oracle)' if args.oracle else ''}: "
        f"mse {report.mse:.6g}, mrr {report.mrr:.4f}, irr {report.irr:.4f}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    config = load_run_config(args.config)
    out = _require_output_dir(config, args.out)
    dataset, relations = config.load_data()
    params = ranker.ModelParams(config.model.mode, load_checkpoint(args.checkpoint))
    _check_model_matches(params, config, dataset, relations)
    statics = ranker.build_statics(config.model, relations)
    days = dataset.split.val_days if args.split == "val" else dataset.split.test_days
    report = ranker.evaluate_days(
        params, config.model, dataset, days, statics, top_k=args.k
    )
    bt.write_report_json(out / "report.json", report)
    print(
        f"eval on {args.split}: mse {report.mse:.6g}, "
        f"mrr {report.mrr:.4f}, irr {report.irr:.4f}"
    )
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    worst: dict[str, float] = {}
    failed = False
    for mode in ranker.MODES:
        mode_worst = 0.0
        for offset in range(args.seeds):
            report = ranker.full_model_gradient_check(
                mode,
                seed=args.seed + offset,
                n_stocks=args.stocks,
                window=args.window,
                hidden_units=args.hidden,
                n_types=args.types,
                corrupt=args.corrupt_gradient,
            )
            mode_worst = max(mode_worst, report.max_rel_err)
        worst[mode] = mode_worst
        status = "PASS" if mode_worst < args.tolerance else "FAIL"
        if status == "FAIL":
            failed = True
        print(f"mode {mode:9s} worst-rel-err {mode_worst:.3e} {status}")
    return EXIT_NUMERICAL if failed else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic market")
    synth.add_argument("--out", required=True)
    synth.add_argument("--stocks", type=_positive_int, required=True)
    synth.add_argument("--days", type=_positive_int, required=True)
    synth.add_argument("--factors", type=_positive_int, default=3)
    synth.add_argument("--density", type=float, default=0.05)
    synth.add_argument("--noise", type=float, default=0.01)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--force", action="store_true")
    synth.set_defaults(func=cmd_synth)

    train = sub.add_parser("train", help="train one configuration")
    train.add_argument("config")
    train.add_argument("--out", default=None)
    train.set_defaults(func=cmd_train)

    grid = sub.add_parser("gridsearch", help="sweep the configured grids")
    grid.add_argument("config")
    grid.add_argument("--out", default=None)
    grid.add_argument("--jobs", type=_positive_int, default=1)
    grid.set_defaults(func=cmd_gridsearch)

    back = sub.add_parser("backtest", help="simulate trading on the test split")
    back.add_argument("config")
    back.add_argument("--checkpoint", required=True)
    back.add_argument("--k", type=int, default=1)
    back.add_argument("--oracle", action="store_true")
    back.add_argument("--out", default=None)
    back.set_defaults(func=cmd_backtest)

    evaluate = sub.add_parser("eval", help="metrics on the validation or test split")
    evaluate.add_argument("config")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--split", choices=("val", "test"), default="test")
    evaluate.add_argument("--k", type=_positive_int, default=1)
    evaluate.add_argument("--out", default=None)
    evaluate.set_defaults(func=cmd_eval)

    grad = sub.add_parser("gradcheck", help="finite-difference check of all modes")
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--seeds", type=_positive_int, default=5)
    grad.add_argument("--stocks", type=_positive_int, default=4)
    grad.add_argument("--window", type=_positive_int, default=2)
    grad.add_argument("--hidden", type=_positive_int, default=3)
    grad.add_argument("--types", type=_positive_int, default=2)
    grad.add_argument("--tolerance", type=float, default=1e-4)
    grad.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    grad.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
