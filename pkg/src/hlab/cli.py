"""Command line interface: train / aggregate / plot / verify / scm."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

__all__ = ["main"]


def _parse_override(text: str):
    key, _, raw = text.partition("=")
    if not _:
        raise argparse.ArgumentTypeError(f"override {text!r} needs key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _cmd_train(args) -> int:
    from .harness import ExperimentConfig, run_experiment

    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config.seeds = [args.seed]
    for key, value in args.override or []:
        if "." in key:
            section, field = key.split(".", 1)
            getattr(config, section)[field] = value
        else:
            setattr(config, key, value)
    run_dir = run_experiment(config, out_root=args.out)
    print(f"run complete: {run_dir}")
    return 0


def _cmd_aggregate(args) -> int:
    from .harness import aggregate_seeds

    out = aggregate_seeds(args.run_dir)
    print(f"summary written: {out}")
    return 0


def _cmd_plot(args) -> int:
    from .harness import emit_plots

    written = emit_plots(args.run_dir, args.out or Path(args.run_dir[0]) / "plots")
    for path in written:
        print(f"plot written: {path}")
    if not written:
        print("no metrics to plot")
    return 0


def _cmd_verify(args) -> int:
    from .verify import run_verification

    results = run_verification(verbose=args.verbose)
    return 0 if all(r.passed for r in results) else 1


def _scm_table(model: str) -> int:
    from .scm import (ate, cf_ite_variance, coin_scm, effect_table, ite,
                      load_scm, medical_scm)

    if model == "medical":
        pair = [("I", medical_scm("I")), ("II", medical_scm("II"))]
    elif model == "coin":
        pair = [("I", coin_scm("I")), ("II", coin_scm("II"))]
    else:
        scm = load_scm(model)
        pair = [(scm.name or model, scm)]

    for label, scm in pair:
        print(f"=== {scm.name or label} ===")
        print(f"  ATE: {ate(scm):+.6f}")
        ites = sorted({round(ite(scm, w), 12) for w, _ in scm.exo_worlds()})
        print(f"  ITE values: {ites}")
        print(f"  CF-ITE variance: {cf_ite_variance(scm):.6f}")
        print(f"  {'treatment':>10} {'outcome':>8} {'prob':>8} "
              f"{'CF-V':>8} {'CF-ITE':>8}")
        for cell in effect_table(scm):
            t = cell.evidence[scm.treatment]
            o = cell.evidence[scm.outcome]
            print(f"  {t!s:>10} {o!s:>8} {cell.prob:8.4f} "
                  f"{cell.cf_outcome_mean:8.4f} {cell.advantage:+8.4f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hlab",
        description="Hindsight credit-assignment laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training experiment")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None,
                         help="train a single seed instead of the config list")
    p_train.add_argument("--override", type=_parse_override, action="append",
                         help="config override, e.g. weights.im=0.5")
    p_train.add_argument("--out", default=None,
                         help="output root (default: $HLAB_OUT or ./runs)")
    p_train.set_defaults(fn=_cmd_train)

    p_agg = sub.add_parser("aggregate", help="median/quartiles over seeds")
    p_agg.add_argument("run_dir")
    p_agg.set_defaults(fn=_cmd_aggregate)

    p_plot = sub.add_parser("plot", help="emit SVG charts from summaries")
    p_plot.add_argument("run_dir", nargs="+")
    p_plot.add_argument("--out", default=None)
    p_plot.set_defaults(fn=_cmd_plot)

    p_verify = sub.add_parser("verify",
                              help="run the oracle/SCM acceptance suite")
    p_verify.add_argument("--verbose", action="store_true")
    p_verify.set_defaults(fn=_cmd_verify)

    p_scm = sub.add_parser("scm", help="print treatment-effect tables")
    p_scm.add_argument("model",
                       help="'medical', 'coin', or a path to an SCM JSON file")
    p_scm.set_defaults(fn=lambda args: _scm_table(args.model))

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
