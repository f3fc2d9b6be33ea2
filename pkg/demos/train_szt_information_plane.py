# Training a small BNN and watching its information plane
#
# The SZT-style stand-in task maps all 4096 12-bit inputs to a balanced binary
# label. We train the 10-8-6-4 network for a few hundred epochs (the full
# experiment uses 3000) and record I(X;T) and I(T;Y) for every hidden layer on
# the 819 held-out samples after each epoch.

import sys
from pathlib import Path

from ipbnn.experiment import ExperimentConfig, read_run_record, run_experiment
from ipbnn.plots import plot_ip

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 300

config = ExperimentConfig.from_dict({
    "dataset": {"name": "szt_standin"},
    "architecture": "szt",
    "lambdas": [0],
    "learning_rate": 1e-4,
    "batch_size": 64,
    "epochs": epochs,
    "runs": 1,
})
(log_path,) = run_experiment(config, out / "szt_runs")
record = read_run_record(log_path)

first, last = record.epochs[0], record.epochs[-1]
print(f"accuracy: epoch {first.epoch} {first.val_accuracy:.1f}%, "
      f"epoch {last.epoch} {last.val_accuracy:.1f}%")
for off in record.layer_offsets:
    t = record.trajectory(off)
    flag = "reliable" if record.regime_of(off).reliable else "unreliable"
    print(f"layer {off} (width {record.width_of(off)}, {flag}): "
          f"I(X;T) {t.mi_xt[0]:.2f} -> {t.mi_xt[-1]:.2f} bits, "
          f"I(T;Y) {t.mi_ty[0]:.3f} -> {t.mi_ty[-1]:.3f} bits")

# Each dot is one epoch, coloured from dark (early) to yellow (late).
plot_ip(record, [-2, -1], out / "szt_ip.svg")
print("figure:", out / "szt_ip.svg")
