# Plug-in entropy on Bernoulli vectors
#
# Draw N = 1000 vectors of D independent Bernoulli(p) bits and estimate their
# entropy by counting patterns. While 2^D is small next to N the estimate
# tracks the truth D * h2(p). Once the alphabet outgrows the sample, almost
# every vector is unique and the estimate flattens at log2 N.

import math
import sys
from pathlib import Path

from ipbnn.estimator import bernoulli_benchmark
from ipbnn.plots import plot_entropy_benchmark

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(exist_ok=True)

rows = bernoulli_benchmark(1000, range(1, 21), [0.5, 0.7, 0.9], repetitions=20, seed=0)

print(f"{'p':>4} {'D':>3} {'true':>7} {'plug-in':>8}")
for r in rows:
    if r.dim in (1, 4, 8, 12, 16, 20):
        print(f"{r.p:4.1f} {r.dim:3d} {r.true_entropy:7.3f} {r.mean_estimate:8.3f}")

# The ceiling sits at log2(1000) bits.
print("log2 N =", round(math.log2(1000), 3))

plot_entropy_benchmark(rows, out / "entropy_benchmark.svg")
print("figure:", out / "entropy_benchmark.svg")
