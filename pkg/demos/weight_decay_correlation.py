# From run logs to rank correlations
#
# analyze() reads every run log in a directory, summarises the last window of
# each layer (mean I(X;T), compression factor, accuracy range) and correlates
# end-of-training I(X;T) with accuracy across all runs of one architecture.
# Here the logs are synthetic so the outcome is known in advance: accuracy
# peaks at moderate weight decay while I(X;T) keeps falling.

import math
import sys
from pathlib import Path

from ipbnn.estimator import check_regime
from ipbnn.experiment import SCHEMA_VERSION, EpochRecord, RunRecord, analyze, write_run_record
from ipbnn.plots import plot_compression_scatter, plot_mi_accuracy

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
runs = out / "synthetic_runs"
runs.mkdir(parents=True, exist_ok=True)

lambdas = [0.0, 0.1, 0.2, 0.5, 0.7, 1.0, 1.1, 1.2, 1.5, 1.7, 2.0]
for lam in lambdas:
    for seed in range(3):
        run_id = f"demo_wd{lam:g}_s{seed}"
        floor = math.log2(10) + 2.5 / (1 + lam) + 0.05 * seed
        accuracy = 90 + 4 * lam - 2.5 * lam * lam + 0.2 * seed
        header = {
            "schema_version": SCHEMA_VERSION, "run_id": run_id, "config": {},
            "config_hash": "demo", "seed": seed, "lambda": lam, "dataset": "demo",
            "group": "small_bnn", "class_count": 10, "sample_count": 10000,
            "layer_widths": [10], "layer_offsets": [-1],
            "regime_flags": [check_regime(10000, 10).reliable], "stride": 1, "window": 50,
        }
        epochs = []
        for e in range(1, 201):
            mi = floor + (9.5 - floor) * math.exp(-e / 40)
            epochs.append(EpochRecord(e, 1 / e, accuracy * (1 - math.exp(-e / 20)),
                                      [{"offset": -1, "mi_xt": mi, "mi_ty": min(mi, 3.0)}]))
        write_run_record(RunRecord(header, epochs), runs / f"{run_id}.jsonl")

summaries, rows = analyze(runs, out / "synthetic_analysis")
for dataset, group, offset, n, r, p in rows:
    print(f"{dataset}/{group} layer {offset}: n={n} r_s={r:+.3f} p={p:.2g}")
print((out / "synthetic_analysis" / "correlation.csv").read_text())

plot_compression_scatter(summaries, out / "compression.svg")
plot_mi_accuracy(summaries, -1, out / "mi_accuracy.svg")
print("figures:", out / "compression.svg", out / "mi_accuracy.svg")
