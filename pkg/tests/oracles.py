"""Independent reference computations shared by several test modules."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
from mpmath import log as mplog
from mpmath import mp, mpf, sqrt as mpsqrt
from scipy.stats import rankdata


def surrogate_loss(params: dict[str, np.ndarray], x: np.ndarray, y: np.ndarray,
                   offsets: list[np.ndarray], bn_eps: float | None = None) -> float:
    """Mean cross-entropy of a network whose signs are each replaced by
    ``z + c`` with ``c = sign(z0) - z0`` frozen at the base point.

    At the base point the forward values equal the binary network; the
    derivative w.r.t. ``z`` is the identity, i.e. the straight-through surrogate
    inside the clip. With ``bn_eps`` set, each affine map is followed by
    training-mode batch normalisation using the batch statistics.
    """
    h = x
    for i, c in enumerate(offsets):
        z = h @ params[f"hidden{i}.W"] + params[f"hidden{i}.b"]
        if bn_eps is not None:
            xhat = (z - z.mean(axis=0)) / np.sqrt(z.var(axis=0) + bn_eps)
            z = params[f"hidden{i}.gamma"] * xhat + params[f"hidden{i}.beta"]
        h = z + c
    logits = h @ params["out.W"] + params["out.b"]
    m = logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(logits - m).sum(axis=1)) + m[:, 0]
    return float(np.mean(log_z - logits[np.arange(len(y)), y]))


def central_difference(fn, params: dict[str, np.ndarray], h: float = 1e-6) -> dict[str, np.ndarray]:
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            up = fn(params)
            arr[idx] = orig - h
            down = fn(params)
            arr[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def pearson_of_ranks(xs, ys) -> float:
    rx, ry = rankdata(xs), rankdata(ys)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx * ry).sum() / np.sqrt((rx * rx).sum() * (ry * ry).sum()))


def spearman_from_rank_differences(xs, ys) -> float:
    """Classical formula 1 - 6 sum d^2 / (n (n^2 - 1)); valid without ties."""
    n = len(xs)
    d = rankdata(xs) - rankdata(ys)
    return 1.0 - 6.0 * float((d * d).sum()) / (n * (n * n - 1))


def brute_permutation_p(xs, ys, tol: float = 1e-12) -> float:
    """Two-sided p: share of all n! orderings of ys with |r| >= |r_obs|."""
    r_obs = abs(pearson_of_ranks(xs, ys))
    ys = list(ys)
    hits = total = 0
    for perm in itertools.permutations(range(len(ys))):
        total += 1
        r = abs(pearson_of_ranks(xs, [ys[i] for i in perm]))
        if r >= r_obs - tol:
            hits += 1
    return hits / total


def brute_entropy(counts: dict, alphabet) -> float:
    """-sum p log2 p over the full alphabet at 50 digits, with 0 log 0 = 0."""
    mp.dps = 50
    n = sum(counts.values())
    h = mpf(0)
    for x in alphabet:
        c = counts.get(x, 0)
        if c:
            p = mpf(c) / n
            h -= p * mplog(p, 2)
    return float(h)


def brute_mi(joint: dict, t_alphabet, y_alphabet) -> float:
    """Direct double sum of p(t,y) log2 p(t,y) / (p(t) p(y)) at 50 digits."""
    mp.dps = 50
    n = sum(joint.values())
    pt = {t: sum(joint.get((t, y), 0) for y in y_alphabet) for t in t_alphabet}
    py = {y: sum(joint.get((t, y), 0) for t in t_alphabet) for y in y_alphabet}
    total = mpf(0)
    for t in t_alphabet:
        for y in y_alphabet:
            c = joint.get((t, y), 0)
            if c:
                pty = mpf(c) / n
                total += pty * mplog(pty / ((mpf(pt[t]) / n) * (mpf(py[y]) / n)), 2)
    return float(total)


def exact_ranks(values) -> list[Fraction]:
    """Average ranks by counting: 1 + #smaller + (#equal - 1) / 2."""
    return [Fraction(2 * sum(w < v for w in values) + sum(w == v for w in values) + 1, 2)
            for v in values]


def _centered(ranks: list[Fraction]) -> list[Fraction]:
    mean = sum(ranks) / len(ranks)
    return [r - mean for r in ranks]


def exact_spearman(xs, ys) -> tuple[Fraction, Fraction, Fraction]:
    """(numerator, sum a^2, sum b^2) of the rank correlation as exact rationals."""
    a, b = _centered(exact_ranks(xs)), _centered(exact_ranks(ys))
    return (sum(p * q for p, q in zip(a, b)), sum(p * p for p in a), sum(q * q for q in b))


def exact_spearman_r(xs, ys) -> float:
    """r_s correctly rounded to double from a 60-digit evaluation of the exact ratio."""
    num, saa, sbb = exact_spearman(xs, ys)
    mp.dps = 60
    r = mpf(num.numerator) / num.denominator / mpsqrt(
        mpf((saa * sbb).numerator) / (saa * sbb).denominator)
    return float(r)


def exact_permutation_p(xs, ys) -> Fraction:
    """Share of the n! orderings of ys whose |r| reaches |r_obs|, in exact arithmetic.

    The rank sums of squares do not change under reordering, so comparing
    |numerator| suffices and no tolerance is involved.
    """
    num_obs = abs(exact_spearman(xs, ys)[0])
    a = _centered(exact_ranks(xs))
    b = _centered(exact_ranks(ys))
    hits = total = 0
    for perm in itertools.permutations(b):
        total += 1
        if abs(sum(p * q for p, q in zip(a, perm))) >= num_obs:
            hits += 1
    return Fraction(hits, total)
