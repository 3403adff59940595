"""Command-line surface: synth, train, eval, explain, ablate, gradcheck.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, _coerce, load_config
from .data import (
    SynthSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .errors import ConfigurationError, DataError, NumericalError, UsageError
from .explain import explain
from .gradcheck import run_gradcheck
from .metrics import compute_metrics
from .train import (
    effective_config_dict,
    evaluate,
    format_ablation_table,
    run_ablation,
    train,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _resolve_config(args) -> TrainConfig:
    config = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        overrides[key.strip()] = _coerce(key.strip(), raw)
    if overrides:
        config = config.replace(**overrides)
    return config.validate()


def _write_json(payload, path: str | None):
    text = json.dumps(payload, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_samples=args.n_samples,
        d_text=args.d_text,
        d_image=args.d_image,
        K=args.K,
        p=args.p,
        seed=args.seed,
        fake_fraction=args.fake_fraction,
        conflict_strength=args.conflict_strength,
    )
    dataset = generate_synthetic(spec)
    if args.split:
        parts = [float(x) for x in args.split.split(",")]
        if len(parts) != 3:
            raise UsageError("--split expects three comma-separated fractions")
        split_dataset(dataset, tuple(parts), seed=args.split_seed)
    save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    dataset = load_dataset(args.data)
    model, history = train(config, dataset)
    save_checkpoint(args.out, model, step_count=len(history))
    if args.history:
        _write_json(history, args.history)
    last = history[-1] if history else None
    if last:
        print(
            f"trained {len(history)} epochs; final val accuracy "
            f"{last['val_accuracy']:.4f}; checkpoint -> {args.out}"
        )
    else:
        print(f"saved initialized parameters to {args.out}")
    return 0


def cmd_eval(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    report = evaluate(model, dataset, split=args.split)
    _write_json(report.to_record(model.config.config_hash()), args.out)
    return 0


def cmd_explain(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    sample = dataset.sample_by_id(args.id)
    _write_json(explain(model, sample), args.out)
    return 0


def cmd_ablate(args) -> int:
    config = _resolve_config(args)
    dataset = load_dataset(args.data)
    variants = args.variants.split(",") if args.variants else None
    results = run_ablation(config, dataset, variants=variants)
    print(format_ablation_table(results))
    if args.out:
        _write_json(results, args.out)
    return 0


def cmd_gradcheck(args) -> int:
    config = load_config(args.config) if args.config else None
    result = run_gradcheck(config=config, h=args.h, tolerance=args.tolerance)
    print(
        f"checked {result['n_parameters']} parameters; max relative error "
        f"{result['max_relative_error']:.3e} (tolerance {result['tolerance']:.1e})"
    )
    if not result["passed"]:
        raise NumericalError("gradient check failed")
    print("gradient check passed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tensionnet")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic embedding dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-samples", type=int, default=2000)
    p.add_argument("--d-text", type=int, default=32)
    p.add_argument("--d-image", type=int, default=32)
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fake-fraction", type=float, default=0.5)
    p.add_argument("--conflict-strength", type=float, default=2.0)
    p.add_argument("--split", default="0.8,0.1,0.1",
                   help="train,val,test fractions; empty string skips splitting")
    p.add_argument("--split-seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on a dataset file")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="optional JSON training-history path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="conflict attribution for one sample")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("ablate", help="train and evaluate ablation variants")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--data", required=True)
    p.add_argument("--variants", help="comma-separated variant names (default: all)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    p.add_argument("--config")
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigurationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
