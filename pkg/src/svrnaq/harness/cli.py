"""Command line entry point: ``svrnaq run|compare|gradcheck|presets``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..data import NormalizationError, ParseError, SchemaError
from ..optim import DivergenceError
from . import runner
from .config import ConfigError, apply, list_presets, load_config

# CLI flag -> config key
_OVERRIDES = {
    "optimizer": "optimizer",
    "mu": "mu",
    "batch": "batch_size",
    "memory": "memory",
    "epochs": "epochs",
    "seed": "seed",
    "out": "out",
    "dataset": "dataset",
    "alpha0": "alpha0",
}


def _add_common(p):
    p.add_argument("--config", required=True, help="config file or preset name")
    p.add_argument("--optimizer")
    p.add_argument("--mu", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--memory", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--dataset", help="CSV path or synthetic-quadratic / synthetic-regression")
    p.add_argument("--alpha0", type=float)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. --set mu.olnaq=0.95")


def _resolve(args):
    cfg = load_config(args.config)
    pairs = [(key, getattr(args, flag)) for flag, key in _OVERRIDES.items() if getattr(args, flag) is not None]
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append(tuple(item.split("=", 1)))
    return apply(cfg, pairs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svrnaq", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train one optimizer and write a metrics CSV")
    _add_common(p)

    p = sub.add_parser("compare", help="run several optimizers on the same data and seed")
    _add_common(p)
    p.add_argument("--optimizers", required=True, help="comma-separated optimizer names")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("gradcheck", help="check backprop against finite differences")
    _add_common(p)
    p.add_argument("--tol", type=float, default=1e-6)

    sub.add_parser("presets", help="list available presets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "presets":
            print("\n".join(list_presets()))
            return 0
        cfg = _resolve(args)
        if args.command == "run":
            records = runner.run(cfg)
            if records:
                last = records[-1]
                print(f"{cfg.optimizer}: {len(records) - 1} epochs, train_loss={last.train_loss:.6g}, "
                      f"test={last.test_rmse_or_error:.6g} -> {cfg.out}")
            return 0
        if args.command == "compare":
            names = [n.strip() for n in args.optimizers.split(",") if n.strip()]
            results, merged = runner.compare(cfg, names, workers=args.workers)
            failed = [o for o, recs in results.items() if recs is None]
            for o, recs in results.items():
                status = "diverged" if recs is None else f"final train_loss={recs[-1].train_loss:.6g}" if recs else "no epochs"
                print(f"{o:8s} {status}")
            print(f"merged table -> {merged}")
            return 1 if failed else 0
        if args.command == "gradcheck":
            report = runner.gradcheck(cfg, args.tol)
            print(json.dumps(report.as_dict(), indent=2))
            if not report.passed:
                print(f"gradcheck failed: worst coordinate {report.worst_index} ({report.worst_coordinate})",
                      file=sys.stderr)
                return 1
            return 0
    except (ConfigError, SchemaError, ParseError, NormalizationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
