"""Plug-in entropy and mutual information over bit-packed binary patterns.

All quantities are in bits. Patterns are packed into little-endian 64-bit
words: bit ``j`` of a pattern lives in word ``j // 64`` at position ``j % 64``.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Sequence

import numpy as np

WORD_BITS = 64


class EmptySampleError(ValueError):
    """Raised when an estimate is requested from zero samples."""

    def __init__(self, message: str = "empty sample"):
        super().__init__(message)


def n_words(width: int) -> int:
    return (width + WORD_BITS - 1) // WORD_BITS


@dataclass(frozen=True)
class BinaryPattern:
    """A single ``width``-bit activation vector packed into 64-bit words."""

    width: int
    words: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValueError(f"pattern width must be >= 1, got {self.width}")
        words = tuple(int(w) for w in self.words)
        if len(words) != n_words(self.width):
            raise ValueError(
                f"width {self.width} needs {n_words(self.width)} words, got {len(words)}"
            )
        for w in words:
            if not 0 <= w < 1 << WORD_BITS:
                raise ValueError(f"word {w} is not an unsigned 64-bit value")
        spare = len(words) * WORD_BITS - self.width
        if spare and words[-1] >> (WORD_BITS - spare):
            raise ValueError("bits at positions >= width must be zero")
        object.__setattr__(self, "words", words)

    @classmethod
    def from_int(cls, value: int, width: int) -> "BinaryPattern":
        if value < 0 or value >> width:
            raise ValueError(f"{value} does not fit in {width} bits")
        mask = (1 << WORD_BITS) - 1
        return cls(width, tuple((value >> (WORD_BITS * i)) & mask for i in range(n_words(width))))

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BinaryPattern":
        return cls.from_int(sum(1 << i for i, b in enumerate(bits) if b), len(bits))

    def to_int(self) -> int:
        return sum(w << (WORD_BITS * i) for i, w in enumerate(self.words))

    def bits(self) -> list[int]:
        value = self.to_int()
        return [(value >> i) & 1 for i in range(self.width)]


@dataclass(frozen=True, eq=False)
class PatternBatch:
    """``N`` patterns of equal width, stored as an ``(N, n_words)`` uint64 array."""

    width: int
    words: np.ndarray

    def __post_init__(self) -> None:
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        if words.ndim == 1:
            words = words.reshape(-1, 1)
        if self.width < 1:
            raise ValueError(f"batch width must be >= 1, got {self.width}")
        if words.ndim != 2 or words.shape[1] != n_words(self.width):
            raise ValueError(
                f"width {self.width} needs shape (N, {n_words(self.width)}), got {words.shape}"
            )
        spare = words.shape[1] * WORD_BITS - self.width
        if spare and words.size and np.any(words[:, -1] >> np.uint64(WORD_BITS - spare)):
            raise ValueError("bits at positions >= width must be zero")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "PatternBatch":
        """Pack an ``(N, d)`` array of 0/1 values; column ``j`` becomes bit ``j``."""
        bits = np.asarray(bits)
        if bits.ndim != 2:
            raise ValueError(f"expected a 2-D bit matrix, got shape {bits.shape}")
        n, d = bits.shape
        nw = n_words(d)
        packed = np.packbits(bits.astype(bool), axis=1, bitorder="little")
        buf = np.zeros((n, nw * 8), dtype=np.uint8)
        buf[:, : packed.shape[1]] = packed
        return cls(d, buf.view("<u8").astype(np.uint64).reshape(n, nw))

    @classmethod
    def from_patterns(cls, patterns: Sequence[BinaryPattern]) -> "PatternBatch":
        if not patterns:
            raise EmptySampleError()
        width = patterns[0].width
        if any(p.width != width for p in patterns):
            raise ValueError("all patterns in a batch must share one width")
        return cls(width, np.array([p.words for p in patterns], dtype=np.uint64))

    def to_bits(self) -> np.ndarray:
        raw = self.words.astype("<u8").view(np.uint8).reshape(len(self), -1)
        return np.unpackbits(raw, axis=1, bitorder="little")[:, : self.width]

    def __len__(self) -> int:
        return self.words.shape[0]

    def __getitem__(self, i: int) -> BinaryPattern:
        return BinaryPattern(self.width, tuple(int(w) for w in self.words[i]))

    def __iter__(self) -> Iterator[BinaryPattern]:
        return (self[i] for i in range(len(self)))

    @property
    def patterns(self) -> list[BinaryPattern]:
        return list(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PatternBatch):
            return NotImplemented
        return self.width == other.width and np.array_equal(self.words, other.words)


@dataclass
class EmpiricalDistribution:
    """Occurrence counts of observed symbols; ``p(x) = counts[x] / total``."""

    counts: dict[Hashable, int]
    total: int = field(default=-1)

    def __post_init__(self) -> None:
        if any(c < 1 for c in self.counts.values()):
            raise ValueError("only observed symbols (count >= 1) may be stored")
        s = sum(self.counts.values())
        if self.total == -1:
            self.total = s
        elif self.total != s:
            raise ValueError(f"counts sum to {s}, total says {self.total}")

    @classmethod
    def from_symbols(cls, symbols: Iterable[Hashable]) -> "EmpiricalDistribution":
        counts = Counter(symbols)
        if not counts:
            raise EmptySampleError()
        return cls(dict(counts))

    def probabilities(self) -> dict[Hashable, float]:
        return {x: n / self.total for x, n in self.counts.items()}


@dataclass
class JointCounts:
    """Counts of ``(representation, label)`` pairs."""

    counts: dict[tuple[Hashable, Hashable], int]
    total: int = field(default=-1)

    def __post_init__(self) -> None:
        if any(c < 1 for c in self.counts.values()):
            raise ValueError("only observed pairs (count >= 1) may be stored")
        s = sum(self.counts.values())
        if self.total == -1:
            self.total = s
        elif self.total != s:
            raise ValueError(f"counts sum to {s}, total says {self.total}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Hashable, Hashable]]) -> "JointCounts":
        counts = Counter(pairs)
        if not counts:
            raise EmptySampleError()
        return cls(dict(counts))

    @classmethod
    def from_batch(cls, batch: PatternBatch, labels: Sequence[int]) -> "JointCounts":
        if len(batch) != len(labels):
            raise ValueError(f"{len(batch)} patterns but {len(labels)} labels")
        return cls.from_pairs(zip(batch, (int(y) for y in labels)))

    def marginal(self, axis: int) -> EmpiricalDistribution:
        acc: Counter = Counter()
        for key, n in self.counts.items():
            acc[key[axis]] += n
        return EmpiricalDistribution(dict(acc), self.total)

    def swapped(self) -> "JointCounts":
        return JointCounts({(y, t): n for (t, y), n in self.counts.items()}, self.total)


def _entropy_from_counts(counts: np.ndarray, total: int) -> float:
    # Terms written as p*log2(N/n) so that bijective joints reproduce the marginal exactly.
    c = np.asarray(counts, dtype=np.float64)
    terms = (c / total) * np.log2(total / c)
    return math.fsum(terms.tolist())


def _mi_from_joint_arrays(
    n_ty: np.ndarray, n_t: np.ndarray, n_y: np.ndarray, total: int
) -> float:
    """MI from aligned arrays: ``n_t``/``n_y`` are the marginal counts of each joint cell."""
    n_ty = np.asarray(n_ty, dtype=np.float64)
    ratio = (n_ty * total) / (np.asarray(n_t, dtype=np.float64) * np.asarray(n_y, dtype=np.float64))
    mi = math.fsum(((n_ty / total) * np.log2(ratio)).tolist())
    return max(mi, 0.0)


def count_patterns(batch: PatternBatch) -> EmpiricalDistribution:
    if len(batch) == 0:
        raise EmptySampleError()
    keys, counts = np.unique(batch.words, axis=0, return_counts=True)
    table = {
        BinaryPattern(batch.width, tuple(int(w) for w in row)): int(n)
        for row, n in zip(keys, counts)
    }
    return EmpiricalDistribution(table, len(batch))


def plugin_entropy(dist: EmpiricalDistribution) -> float:
    """Plug-in (maximum likelihood) entropy estimate in bits, with 0 log 0 = 0."""
    if dist.total < 1:
        raise EmptySampleError()
    return _entropy_from_counts(np.fromiter(dist.counts.values(), dtype=np.int64), dist.total)


def plugin_joint_mi(joint: JointCounts) -> float:
    """Plug-in estimate of I(T;Y) from the empirical joint distribution."""
    if joint.total < 1:
        raise EmptySampleError()
    left = joint.marginal(0).counts
    right = joint.marginal(1).counts
    keys = list(joint.counts)
    n_ty = np.array([joint.counts[k] for k in keys])
    n_t = np.array([left[k[0]] for k in keys])
    n_y = np.array([right[k[1]] for k in keys])
    return _mi_from_joint_arrays(n_ty, n_t, n_y, joint.total)


def mi_input_representation(batch: PatternBatch) -> float:
    """I(X;T) for a deterministic network, which equals the entropy of T."""
    return plugin_entropy(count_patterns(batch))


def layer_information(batch: PatternBatch, labels: np.ndarray) -> tuple[float, float]:
    """Vectorised ``(I(X;T), I(T;Y))`` for one layer; same arithmetic as the dict path."""
    n = len(batch)
    if n == 0:
        raise EmptySampleError()
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ValueError(f"{n} patterns but labels have shape {labels.shape}")
    if batch.words.shape[1] == 1:
        _, t_idx, n_t = np.unique(batch.words[:, 0], return_inverse=True, return_counts=True)
    else:
        _, t_idx, n_t = np.unique(batch.words, axis=0, return_inverse=True, return_counts=True)
    t_idx = t_idx.reshape(-1)
    _, y_idx, n_y = np.unique(labels, return_inverse=True, return_counts=True)
    n_classes = len(n_y)
    cells, n_ty = np.unique(t_idx * n_classes + y_idx, return_counts=True)
    mi_xt = _entropy_from_counts(n_t, n)
    mi_ty = _mi_from_joint_arrays(n_ty, n_t[cells // n_classes], n_y[cells % n_classes], n)
    return mi_xt, mi_ty


# ---------------------------------------------------------------------------
# reliability regime


def _threshold_exponent(width: int) -> int:
    """floor(log2(k**2 / log2(k)**2)) for k = 2**width, in exact integer arithmetic."""
    k_sq = 1 << (2 * width)
    sq = width * width
    e = (k_sq // sq).bit_length() - 1
    return e


def required_samples(width: int) -> int:
    """Smallest sample count at which a ``width``-bit layer counts as reliable.

    The asymptotic condition N >> k^2 / log2(k)^2 is made concrete by rounding
    the threshold down to a power of two.
    """
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    if width == 1:
        return 1
    return 1 << _threshold_exponent(width)


def max_reliable_width(sample_count: int) -> int:
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count}")
    d = 1
    while sample_count >= required_samples(d + 1):
        d += 1
    return d


@dataclass(frozen=True)
class RegimeVerdict:
    sample_count: int
    width: int
    log2_alphabet_size: int
    reliable: bool
    max_reliable_width: int

    @property
    def alphabet_size(self) -> int:
        return 1 << self.log2_alphabet_size


def check_regime(sample_count: int, width: int) -> RegimeVerdict:
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    limit = max_reliable_width(sample_count)
    return RegimeVerdict(sample_count, width, width, width <= limit, limit)


# ---------------------------------------------------------------------------
# synthetic Bernoulli benchmark


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    q = 1.0 - p
    return -(p * math.log2(p) + q * math.log2(q))


@dataclass(frozen=True)
class BenchmarkRow:
    p: float
    dim: int
    true_entropy: float
    mean_estimate: float
    std_estimate: float
    n: int
    reps: int
    seed: int


BENCHMARK_COLUMNS = (
    "p", "D", "true_entropy_bits", "mean_estimate_bits", "std_estimate_bits", "n", "reps", "seed",
)


def _bernoulli_estimate(n: int, dim: int, p: float, rng: np.random.Generator) -> float:
    bits = rng.random((n, dim)) < p
    batch = PatternBatch.from_bits(bits)
    if batch.words.shape[1] == 1:
        _, counts = np.unique(batch.words[:, 0], return_counts=True)
    else:
        _, counts = np.unique(batch.words, axis=0, return_counts=True)
    return _entropy_from_counts(counts, n)


def bernoulli_benchmark(
    sample_count: int,
    dims: Iterable[int],
    ps: Sequence[float],
    repetitions: int,
    seed: int,
) -> list[BenchmarkRow]:
    """Plug-in entropy of ``N`` i.i.d. ``D``-dimensional Bernoulli(p) vectors.

    Each ``(p, D, repetition)`` cell draws from its own PCG64 stream seeded by
    ``SeedSequence([seed, p_index, D, repetition])``, so cells are independent
    and results do not depend on evaluation order. ``std_estimate`` is the
    population standard deviation over repetitions.
    """
    if sample_count < 1 or repetitions < 1 or seed < 0:
        raise ValueError("sample_count and repetitions must be positive, seed non-negative")
    dims = list(dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError("dims must be a non-empty range of positive integers")
    if not ps or any(not 0.0 < p < 1.0 for p in ps):
        raise ValueError("every p must lie strictly inside (0, 1)")
    rows = []
    for pi, p in enumerate(ps):
        for dim in dims:
            est = np.array([
                _bernoulli_estimate(
                    sample_count, dim, p,
                    np.random.default_rng(np.random.SeedSequence([seed, pi, dim, rep])),
                )
                for rep in range(repetitions)
            ])
            rows.append(BenchmarkRow(
                p=float(p),
                dim=dim,
                true_entropy=dim * binary_entropy(p),
                mean_estimate=float(est.mean()),
                std_estimate=float(est.std()),
                n=sample_count,
                reps=repetitions,
                seed=seed,
            ))
    return rows


def benchmark_csv(rows: Iterable[BenchmarkRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCHMARK_COLUMNS)
    for r in rows:
        writer.writerow([
            repr(r.p), r.dim, repr(r.true_entropy), repr(r.mean_estimate),
            repr(r.std_estimate), r.n, r.reps, r.seed,
        ])
    return buf.getvalue()
