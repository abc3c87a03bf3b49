"""Command-line entry points: ``train``, ``audit``, ``synth`` and ``sweep``.

Every flag can also come from a ``key=value`` config file (``--config``);
flags given on the command line win. The ``manifest.txt`` written by
``train`` is itself a valid config file, so a run can be replayed with
``w2fair train --config <out>/manifest.txt --out-dir <elsewhere>``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
from pathlib import Path

from . import __version__
from .datagen import (
    BiasSpec,
    DatagenError,
    Preprocessor,
    assign_random_group,
    inject_bias_sr,
    inject_bias_st,
    load_csv_full,
    load_schema,
    parse_predicate,
    read_dataset,
    write_csv,
    write_index_list,
)
from .datamodel import DataError, OptimizerSpec, PenaltyKind, PenaltySpec, TrainConfig
from .metrics import DEFAULT_TAU, audit, passes
from .model import DEFAULT_HIDDEN, CheckpointError, Mlp, load_checkpoint, save_checkpoint
from .trainer import TrainingError, train

log = logging.getLogger("w2fair")

_BOOL_KEYS = {"auto_lambda", "coarse", "quiet", "no_standardize"}
_NOT_IN_MANIFEST = {"config", "out_dir", "command", "func", "quiet"}


class ConfigError(ValueError):
    pass


def read_config(path) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _hidden(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value config file; flags override its values")
    p.add_argument("--data", help="input CSV")
    p.add_argument("--schema", default="native", help="'native', 'adult', or a JSON schema file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--quiet", action="store_true")


def _add_training(p: argparse.ArgumentParser, default_penalty="none"):
    p.add_argument("--penalty", choices=[k.value for k in PenaltyKind], default=default_penalty)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--auto-lambda", action="store_true")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("--grid-size", type=int, default=100)
    p.add_argument("--subsample-cap", type=int, default=0, help="0 means 10 x grid size")
    p.add_argument("--resample-per", choices=["batch", "epoch"], default="batch")
    p.add_argument("--coarse", action="store_true", help="nearest-knot coupling instead of interpolation")
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--hidden", type=_hidden, default=",".join(map(str, DEFAULT_HIDDEN)))
    p.add_argument("--warm-epochs", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--acc-floor", type=float, default=0.75)
    p.add_argument("--di-floor", type=float, default=0.85)
    p.add_argument("--split", type=float, default=0.75)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="w2fair", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"w2fair {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model")
    _add_common(p)
    _add_training(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("audit", help="fairness report; exit 0 iff DI >= tau")
    _add_common(p)
    p.add_argument("--checkpoint", required=False)
    p.add_argument("--preprocess", help="preprocess.json written by train")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("synth", help="inject label bias into a dataset")
    _add_common(p)
    p.add_argument("--protocol", choices=["sr", "st"], default="sr")
    p.add_argument("--fraction", type=float, default=0.65)
    p.add_argument("--predicate", default="all", help="e.g. 'x0 > 0'")
    p.add_argument("--assign-group", type=float, default=None, help="redraw S ~ Bernoulli(p) first")
    p.add_argument("--coarse-epochs", type=int, default=2)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="train one model per lambda")
    _add_common(p)
    _add_training(p, default_penalty="pred-w2")
    p.add_argument("--lambdas", type=_floats, default="0")
    p.set_defaults(func=cmd_sweep)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        cfg = {k: _parse_bool(v) if k in _BOOL_KEYS else v for k, v in cfg.items()}
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_from_args(args, lam=None) -> TrainConfig:
    penalty = PenaltySpec(
        kind=args.penalty,
        lam=args.lam if lam is None else lam,
        auto_tune=args.auto_lambda,
        grid_size=args.grid_size,
        subsample_cap=args.subsample_cap or None,
        coarse=args.coarse,
    )
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        optimizer=OptimizerSpec(args.optimizer, args.lr),
        seed=args.seed,
        penalty=penalty,
        warm_epochs=args.warm_epochs,
        alpha_init=args.alpha,
        acc_floor=args.acc_floor,
        di_floor=args.di_floor,
        resample_per=args.resample_per,
    )


def _manifest_value(v) -> str:
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _write_manifest(args, path, history=None):
    lines = [f"# w2fair run manifest, version={__version__}"]
    if args.data:
        lines.append(f"# data_sha256={_sha256(args.data)}")
    if args.schema not in (None, "native", "adult"):
        lines.append(f"# schema_sha256={_sha256(args.schema)}")
    if history is not None:
        lines.append("# lambda_trajectory=" + ",".join(repr(x) for x in history.lambdas))
    for key, value in sorted(vars(args).items()):
        if key in _NOT_IN_MANIFEST or value is None:
            continue
        if key == "data":
            value = str(Path(value).resolve())
        lines.append(f"{key}={_manifest_value(value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_split(args):
    if not args.data:
        raise ConfigError("--data is required")
    schema = load_schema(args.schema)
    return load_csv_full(args.data, schema, args.split, args.seed, standardize=not args.no_standardize)


def cmd_train(args) -> int:
    train_set, test_set, prep = _load_split(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = _config_from_args(args)
    model = Mlp.init(train_set.p, args.hidden, rng=args.seed)
    model, history = train(train_set, config, model, test_set)
    save_checkpoint(model, out / "model.ckpt")
    (out / "history.csv").write_text(history.to_csv(), encoding="utf-8")
    (out / "preprocess.json").write_text(prep.to_json(), encoding="utf-8")
    final = history.records[-1]
    report = final.test or final.train
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    _write_manifest(args, out / "manifest.txt", history)
    print(report.to_text(), end="")
    return 0


def cmd_audit(args) -> int:
    if not args.checkpoint or not args.data:
        raise ConfigError("--checkpoint and --data are required")
    model = load_checkpoint(args.checkpoint)
    if args.preprocess:
        prep = Preprocessor.from_json(Path(args.preprocess).read_text(encoding="utf-8"))
        data = read_dataset(args.data, prep.schema, prep)
    else:
        data = read_dataset(args.data, load_schema(args.schema))
    report, ok = audit(model, data, args.tau)
    print(report.to_text(), end="")
    print(f"tau={args.tau!r}\npassed={'true' if ok else 'false'}")
    return 0 if ok else 1


def cmd_synth(args) -> int:
    if not args.data:
        raise ConfigError("--data is required")
    data = read_dataset(args.data, load_schema(args.schema))
    if args.assign_group is not None:
        data = assign_random_group(data, args.assign_group, args.seed)
    spec = BiasSpec(args.protocol, args.fraction, parse_predicate(args.predicate), args.coarse_epochs)
    if spec.protocol.value == "sr":
        biased, flipped = inject_bias_sr(data, spec, args.seed)
    else:
        biased, flipped = inject_bias_st(data, spec, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(biased, out / "biased.csv")
    write_index_list(flipped, out / "flipped.csv")
    print(f"flipped {len(flipped)} of {biased.n} rows")
    return 0


SWEEP_HEADER = ["lambda", "di", "mse", "gp0", "gp1", "gp0_gp1", "accuracy"]


def cmd_sweep(args) -> int:
    train_set, test_set, _ = _load_split(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        fh.flush()
        for lam in sorted(args.lambdas):
            config = _config_from_args(args, lam=lam)
            model = Mlp.init(train_set.p, args.hidden, rng=args.seed)
            _, history = train(train_set, config, model, test_set)
            rep = history.records[-1].test or history.records[-1].train
            writer.writerow([repr(v) for v in (lam, rep.di, rep.mse, rep.gp0, rep.gp1, rep.gp_ratio, rep.accuracy)])
            fh.flush()
            log.info("lambda=%g di=%.4f acc=%.4f", lam, rep.di, rep.accuracy)
    _write_manifest(args, out / "manifest.txt")
    return 0


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"w2fair: error: {exc}", file=sys.stderr)
        return 2
    if not logging.getLogger().handlers:
        logging.basicConfig(stream=sys.stderr, level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatagenError, DataError, CheckpointError, TrainingError, ValueError, OSError) as exc:
        print(f"w2fair: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
