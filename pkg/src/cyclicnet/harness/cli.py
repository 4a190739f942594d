"""Command line entry point.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 verification failure.
"""

import argparse
import json
import sys
from dataclasses import asdict

import numpy as np

from cyclicnet import group as G
from cyclicnet.estimator import NumericalError
from cyclicnet.harness import run as runner
from cyclicnet.harness.config import ConfigError, load_config, parse_model
from cyclicnet.harness.data import SyntheticTaskSpec, generate_dataset, save_dataset
from cyclicnet.oracle import INVARIANT, MODES, SAME_EQUIVARIANT, check_model_equivariance
from cyclicnet.tensor import load_tensor

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_train(args):
    run = load_config(args.config)
    est = runner.train(run, args.out)
    last = {row["split"]: row for row in est.history_}
    _print_json({"out": args.out, "final": last})
    return EXIT_OK


def cmd_eval(args):
    est = runner.load_estimator(args.checkpoint)
    _print_json(runner.evaluate(est, args.data, tta=args.tta))
    return EXIT_OK


def _with_group(layers, kind):
    out = []
    for cfg in layers:
        cfg = dict(cfg)
        if cfg["kind"] in ("slice", "pool", "stack", "roll"):
            cfg["group"] = kind
        out.append(cfg)
    return out


def cmd_verify(args):
    run = load_config(args.config)
    spec = run.model
    if args.group:
        spec = parse_model({**spec.to_dict(), "layers": _with_group(spec.layers, args.group)})
    kind = spec.group or G.C4
    net = spec.build(np.random.default_rng(run.train.seed))
    _, h, w = net.output_shape
    mode = args.mode or (INVARIANT if (h, w) == (1, 1) else SAME_EQUIVARIANT)
    report = check_model_equivariance(net.forward, spec.input_shape, kind, mode, trials=args.trials,
                                      tolerance=args.tol, rng=run.train.seed, dtype=net.dtype)
    _print_json(report.to_dict())
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_params(args):
    run = load_config(args.config)
    sys.stdout.write(runner.params_csv(run.model))
    return EXIT_OK


def cmd_gen_data(args):
    with open(args.spec) as fp:
        doc = json.load(fp)
    try:
        spec = SyntheticTaskSpec(**doc)
        spec.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError([f"data spec: {exc}"]) from None
    save_dataset(generate_dataset(spec), args.out)
    _print_json({"out": args.out, "spec": asdict(spec)})
    return EXIT_OK


def cmd_dump(args):
    x = load_tensor(args.file)
    info = {"shape": list(x.shape), "dtype": str(x.dtype),
            "min": float(x.min()) if x.size else None, "max": float(x.max()) if x.size else None}
    if args.values:
        info["values"] = x.tolist()
    _print_json(info)
    return EXIT_OK


def cmd_compare(args):
    a, b = load_tensor(args.a), load_tensor(args.b)
    if a.shape != b.shape:
        _print_json({"equal": False, "reason": f"shape {list(a.shape)} vs {list(b.shape)}"})
        return EXIT_VERIFY
    diff = float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64)))) if a.size else 0.0
    ok = diff <= args.atol
    _print_json({"equal": ok, "max_abs_diff": diff, "atol": args.atol})
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser():
    parser = argparse.ArgumentParser(prog="cyclicnet", description="Rotation-equivariant CNN toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a generated dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--tta", action="store_true", help="average predictions over the four rotations")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="check a randomly initialised model for invariance/equivariance")
    p.add_argument("--config", required=True)
    p.add_argument("--group", choices=G.KINDS)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("params", help="per-layer parameter counts as CSV")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("gen-data", help="generate the synthetic dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("dump", help="describe a T4D1 tensor file")
    p.add_argument("file")
    p.add_argument("--values", action="store_true")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("compare", help="compare two T4D1 tensor files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--atol", type=float, default=0.0)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
