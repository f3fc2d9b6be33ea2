"""Information-plane analysis of binary neural networks.

Plug-in entropy / mutual information over bit-packed binary activations,
a numpy BNN trainer with a saturation-aware straight-through estimator, and
compression / generalisation summaries of per-epoch information planes.
"""

from .estimator import (
    BinaryPattern,
    EmpiricalDistribution,
    JointCounts,
    PatternBatch,
    RegimeVerdict,
    bernoulli_benchmark,
    binary_entropy,
    check_regime,
    count_patterns,
    max_reliable_width,
    mi_input_representation,
    plugin_entropy,
    plugin_joint_mi,
)
from .analysis import IpTrajectory, RunSummary, compression_factor, correlate_group, spearman

__version__ = "0.1.0"
