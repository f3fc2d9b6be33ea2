"""Command line entry point: ``ipbnn bench-entropy | train | analyze | plot``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment, plots
from .estimator import bernoulli_benchmark, benchmark_csv

log = logging.getLogger("ipbnn")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipbnn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench-entropy", help="plug-in entropy on synthetic Bernoulli vectors")
    b.add_argument("--n", type=_positive, default=1000, help="samples per experiment")
    b.add_argument("--reps", type=_positive, default=20)
    b.add_argument("--p", type=_float_list, default=[0.5, 0.7, 0.9])
    b.add_argument("--dmin", type=_positive, default=1)
    b.add_argument("--dmax", type=_positive, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    b.add_argument("--plot", type=Path, help="optional SVG figure path")

    t = sub.add_parser("train", help="train BNNs and record per-epoch information planes")
    t.add_argument("--config", type=Path, required=True)
    t.add_argument("--out", type=Path, required=True, help="directory for run logs")
    t.add_argument("--seed", type=int, help="override the base seed")
    t.add_argument("--stride", type=_positive)
    t.add_argument("--epochs", type=_positive)

    a = sub.add_parser("analyze", help="summaries and rank correlations from run logs")
    a.add_argument("--runs", type=Path, required=True)
    a.add_argument("--out", type=Path, required=True,
                   help="directory receiving summary.csv and correlation.csv")

    p = sub.add_parser("plot", help="information-plane and summary figures")
    p.add_argument("--runs", type=Path, required=True)
    p.add_argument("--kind", choices=("ip", "compression", "mi-accuracy"), required=True)
    p.add_argument("--layer", type=_int_list, default=[-1],
                   help="layer offset(s), e.g. --layer=-1 or --layer=-2,-1")
    p.add_argument("--run-id", help="run to draw for --kind ip (default: first by name)")
    p.add_argument("--out", type=Path, required=True)
    return parser


def cmd_bench(args) -> None:
    if args.dmin > args.dmax:
        raise ValueError(f"--dmin {args.dmin} exceeds --dmax {args.dmax}")
    rows = bernoulli_benchmark(args.n, range(args.dmin, args.dmax + 1), args.p, args.reps, args.seed)
    text = benchmark_csv(rows)
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.plot:
        plots.plot_entropy_benchmark(rows, args.plot)


def cmd_train(args) -> None:
    cfg = experiment.load_config(args.config).with_overrides(
        seed=args.seed, stride=args.stride, epochs=args.epochs)
    paths = experiment.run_experiment(cfg, args.out)
    for path in paths:
        print(path)


def cmd_analyze(args) -> None:
    summaries, rows = experiment.analyze(args.runs, args.out)
    print(f"{len(summaries)} runs summarised, {len(rows)} correlation rows -> {args.out}")


def cmd_plot(args) -> None:
    records = experiment.read_run_dir(args.runs)
    if args.kind == "ip":
        if args.run_id:
            matches = [r for r in records if r.run_id == args.run_id]
            if not matches:
                raise KeyError(f"no run {args.run_id!r} in {args.runs}")
            record = matches[0]
        else:
            record = records[0]
        plots.plot_ip(record, args.layer, args.out)
        return
    summaries = [r.summary() for r in records]
    if args.kind == "compression":
        plots.plot_compression_scatter(summaries, args.out)
    else:
        plots.plot_mi_accuracy(summaries, args.layer[0], args.out)


COMMANDS = {"bench-entropy": cmd_bench, "train": cmd_train, "analyze": cmd_analyze,
            "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
