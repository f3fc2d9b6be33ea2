# Analysing activations produced elsewhere
#
# Binary activations from any model (a convolutional network, a hardware
# simulator) can be written to the IPBD dump format and analysed with the
# same estimator. Here we fake a 20-neuron layer whose patterns carry the
# label in their first four bits and noise in the rest.

import sys
from pathlib import Path

import numpy as np

from ipbnn.data import ActivationDump, read_activation_dump, write_activation_dump
from ipbnn.estimator import PatternBatch, check_regime, layer_information

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(exist_ok=True)

rng = np.random.default_rng(0)
labels = rng.integers(0, 10, size=5000)
bits = rng.integers(0, 2, size=(5000, 20))
bits[:, :4] = (labels[:, None] >> np.arange(4)) & 1

dump = ActivationDump(PatternBatch.from_bits(bits), labels, class_count=10)
write_activation_dump(dump, out / "layer.ipbd")
loaded = read_activation_dump(out / "layer.ipbd")
assert loaded == dump

mi_xt, mi_ty = layer_information(loaded.patterns, loaded.labels)
print(f"I(X;T) = {mi_xt:.3f} bits (ceiling log2 N = {np.log2(5000):.3f})")
print(f"I(T;Y) = {mi_ty:.3f} bits (log2 10 = {np.log2(10):.3f})")
print(check_regime(loaded.sample_count, loaded.width))

# Keeping only the label bits gives a layer inside the reliable regime.
label_part = PatternBatch.from_bits(bits[:, :4])
print("label bits only:", layer_information(label_part, labels), check_regime(5000, 4).reliable)
