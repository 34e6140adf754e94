"""Command-line interface: ``wlda {simulate,fit,predict,experiment,explain}``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from wlda.dataset import CSVParseError, DatasetError, MissingSpec, load_csv, simulate_mcar, write_csv, write_mask_csv
from wlda.discriminant import WEIGHT_SCOPES, WldaModel, fit
from wlda.experiment import (
    DEFAULT_RATES,
    METHODS,
    RENDERERS,
    SCENARIOS,
    ConfigError,
    ExperimentConfig,
    explain_command,
    run_experiment,
    write_experiment_outputs,
)

EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def default_seed() -> int:
    raw = os.environ.get("WLDA_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"WLDA_SEED must be an integer, got {raw!r}") from None


def _csv_list(cast):
    def parse(text: str):
        try:
            return tuple(cast(t) for t in text.split(",") if t.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _add_data_args(p, label_required=False):
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--label", required=label_required, help="name of the class label column")
    p.add_argument("--missing-token", default="", help="cell value meaning 'missing' (empty cells always are)")


def _add_experiment_args(p):
    _add_data_args(p, label_required=True)
    p.add_argument("--rates", type=_csv_list(float), default=DEFAULT_RATES, help="comma-separated missing rates")
    p.add_argument("--methods", type=_csv_list(str), default=METHODS, help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--seed", type=int, default=None, help="base seed (default: $WLDA_SEED or 0)")
    p.add_argument("--k", type=int, default=5, help="neighbours for KNN imputation")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="soft-impute shrinkage (default: top singular value / 10)")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wlda", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="delete entries completely at random")
    _add_data_args(p)
    p.add_argument("--rates", type=_csv_list(float), required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-protect-first-row", dest="protect_row", action="store_false")
    p.add_argument("--no-protect-first-feature", dest="protect_feature", action="store_false")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fit", help="fit a WLDA model and write it as JSON")
    _add_data_args(p, label_required=True)
    p.add_argument("--weight-scope", choices=WEIGHT_SCOPES, default="train_only")
    p.add_argument("--test-data", help="CSV whose mask joins the missing-rate estimate (train_plus_test)")
    p.add_argument("--out", required=True, help="model JSON path")

    p = sub.add_parser("predict", help="predict classes with a saved model")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="predictions CSV path")

    p = sub.add_parser("experiment", help="repeated accuracy benchmark")
    _add_experiment_args(p)
    p.add_argument("--scenario", choices=SCENARIOS, default="train_only")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--weight-scope", choices=WEIGHT_SCOPES, default="train_only")
    p.add_argument("--format", choices=[*RENDERERS, "all"], default="all")

    p = sub.add_parser("explain", help="correlation, boundary and Shapley artifacts")
    _add_experiment_args(p)
    return parser


def _config(args, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        data=args.data,
        label=args.label,
        rates=args.rates,
        methods=args.methods,
        seed=default_seed() if args.seed is None else args.seed,
        k=args.k,
        lam=args.lam,
        missing_token=args.missing_token,
        **extra,
    )


def cmd_simulate(args) -> None:
    data = load_csv(args.data, args.label, args.missing_token)
    seed = default_seed() if args.seed is None else args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.data).stem
    for rate in args.rates:
        spec = MissingSpec(rate, args.protect_row, args.protect_feature, seed)
        masked = simulate_mcar(data, spec)
        write_csv(masked, out / f"{stem}_rate{rate:.2f}.csv", label_column=args.label or "label")
        write_mask_csv(masked.mask, out / f"{stem}_rate{rate:.2f}_mask.csv", masked.feature_names)
        print(f"rate {rate:.2f}: deleted {int((data.mask & ~masked.mask).sum())} entries")


def cmd_fit(args) -> None:
    train = load_csv(args.data, args.label, args.missing_token)
    test_masks = [load_csv(args.test_data, missing_token=args.missing_token).mask] if args.test_data else None
    if args.weight_scope == "train_plus_test" and test_masks is None:
        raise ConfigError("--weight-scope train_plus_test needs --test-data")
    model = fit(train, args.weight_scope, test_masks)
    Path(args.out).write_text(model.to_json() + "\n", encoding="utf-8")
    print(f"fitted {model.n_classes} classes on {train.n} samples; weights {np.round(model.profile.weights, 4).tolist()}")


def cmd_predict(args) -> None:
    model = WldaModel.from_json(Path(args.model).read_text(encoding="utf-8"))
    data = load_csv(args.data, args.label, args.missing_token)
    if list(data.feature_names) != list(model.params.feature_names):
        raise ConfigError(f"feature columns {list(data.feature_names)} do not match the model's {list(model.params.feature_names)}")
    ids = model.predict_dataset(data)
    names = model.params.class_names
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "predicted"])
        for i, g in enumerate(ids):
            writer.writerow([i + 1, names[g - 1]])
    if data.labels is not None:
        truth = np.array([data.class_names[g - 1] for g in data.labels])
        predicted = np.array([names[g - 1] for g in ids])
        print(f"accuracy {np.mean(truth == predicted):.4f} on {data.n} samples")


def cmd_experiment(args) -> None:
    config = _config(
        args,
        scenario=args.scenario,
        repeats=args.repeats,
        test_fraction=args.test_fraction,
        weight_scope=args.weight_scope,
    )
    report = run_experiment(config)
    formats = list(RENDERERS) if args.format == "all" else [args.format]
    for path in write_experiment_outputs(report, args.out, formats):
        print(path)
    failed = sum(len(c.failures) for c in report.cells)
    if failed:
        print(f"warning: {failed} method repeat(s) failed; see the report", file=sys.stderr)


def cmd_explain(args) -> None:
    out = explain_command(_config(args), args.out)
    print(out)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "experiment": cmd_experiment,
    "explain": cmd_explain,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except CSVParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, DatasetError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
