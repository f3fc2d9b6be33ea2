# Which layer widths can be trusted?
#
# A width-d layer of binary neurons has 2^d possible patterns. The plug-in
# estimate is trustworthy only while the sample is large relative to that
# alphabet. check_regime turns this into a yes/no per (sample count, width).

from ipbnn.estimator import check_regime, max_reliable_width, required_samples

for n in (819, 800, 10000, 60000):
    print(f"N = {n:6d}: widths up to {max_reliable_width(n)} are reliable")

# Samples needed per width, for the widths found in the preset architectures.
for d in (4, 6, 8, 10, 12, 20):
    print(f"d = {d:2d} needs N >= {required_samples(d)}")

# The SZT stand-in validates on 819 samples, so its 10- and 8-neuron layers
# are flagged while the 6- and 4-neuron layers pass.
for width in (10, 8, 6, 4):
    v = check_regime(819, width)
    print(f"width {width:2d} on 819 samples -> reliable={v.reliable}")
