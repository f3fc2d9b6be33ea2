"""Information-plane trajectories, compression factors and rank correlation."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .estimator import RegimeVerdict

DEFAULT_WINDOW = 50
EXACT_PERMUTATION_MAX_N = 8

SUMMARY_COLUMNS = (
    "dataset", "group", "run_id", "seed", "lambda", "layer_offset", "width", "reliable",
    "mi_xt_max", "mi_xt_last50_mean", "mi_ty_last50_mean", "rho",
    "acc_last50_mean", "acc_last50_min", "acc_last50_max",
)
CORRELATION_COLUMNS = ("dataset", "group", "layer_offset", "n", "r_s", "p_value")


class InsufficientDataError(ValueError):
    pass


class UndefinedCorrelationError(ValueError):
    pass


@dataclass
class IpTrajectory:
    """Per-epoch information-plane coordinates of one hidden layer."""

    layer_offset: int
    epochs: list[int]
    mi_xt: list[float]
    mi_ty: list[float]
    accuracy: list[float] = field(default_factory=list)
    width: int | None = None

    def __post_init__(self) -> None:
        n = len(self.epochs)
        if len(self.mi_xt) != n or len(self.mi_ty) != n:
            raise ValueError("epochs, mi_xt and mi_ty must have equal length")
        if self.accuracy and len(self.accuracy) != n:
            raise ValueError("accuracy must be empty or aligned with epochs")
        if any(b <= a for a, b in zip(self.epochs, self.epochs[1:])):
            raise ValueError("epochs must be strictly increasing")
        if any(v < 0 for v in self.mi_xt) or any(v < 0 for v in self.mi_ty):
            raise ValueError("mutual information values must be non-negative")
        if self.layer_offset >= 0:
            raise ValueError("layer offsets count back from the output layer and are negative")

    def __len__(self) -> int:
        return len(self.epochs)


def last_k_mean(series: Sequence[float], k: int) -> float:
    if len(series) == 0:
        raise InsufficientDataError("cannot average an empty series")
    if k < 1:
        raise ValueError(f"window must be >= 1, got {k}")
    return math.fsum(series[-k:]) / len(series[-k:])


def window_records(window: int, stride: int = 1) -> int:
    """Number of trailing records covering ``window`` epochs at the given stride."""
    return -(-window // stride)


def compression_factor(trajectory: IpTrajectory | Sequence[float], window: int = DEFAULT_WINDOW) -> float:
    """(max I(X;T) - mean of the last ``window`` records) / max I(X;T); 0 if the max is 0."""
    series = trajectory.mi_xt if isinstance(trajectory, IpTrajectory) else list(trajectory)
    if len(series) == 0:
        raise InsufficientDataError("empty trajectory")
    peak = max(series)
    if peak <= 0.0:
        return 0.0
    rho = (peak - last_k_mean(series, window)) / peak
    return min(max(rho, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Spearman rank correlation


def _centered_rank_ints(values: np.ndarray) -> np.ndarray:
    """``2 * rank - (n + 1)`` with average ranks: exact integers, zero sum."""
    doubled = np.rint(2.0 * stats.rankdata(values)).astype(np.int64)
    return doubled - (len(values) + 1)


def _sqrt_ratio(num: int, den: int) -> float:
    """Correctly rounded ``sqrt(num / den)`` for non-negative integers."""
    if num == 0:
        return 0.0
    k = 64 + max(0, (den.bit_length() - num.bit_length()) // 2 + 1)
    scaled, rem = divmod(num << (2 * k), den)
    s = math.isqrt(scaled)
    sticky = int(rem != 0 or s * s != scaled)
    # int / int true division rounds correctly; the sticky bit breaks false ties
    return (2 * s + sticky) / (1 << (k + 1))


def _exact_p_value(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sided p-value over all n! reorderings of ``b``.

    Reordering leaves both rank sums of squares unchanged, so comparing the
    integer cross products decides ``|r| >= |r_obs|`` with no rounding.
    """
    perms = np.array(list(itertools.permutations(range(len(a)))))
    cross = np.abs(b[perms] @ a)
    return float(np.count_nonzero(cross >= abs(int(a @ b)))) / len(perms)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Spearman's r_s with average ranks for ties, and a two-sided p-value.

    r_s is the Pearson correlation of the rank vectors, evaluated in integer
    arithmetic and rounded once. For n <= 8 the p-value is the exact
    permutation probability; above that it comes from the t approximation with
    n - 2 degrees of freedom.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"sequences must be 1-D of equal length, got {x.shape} and {y.shape}")
    n = len(x)
    if n < 3:
        raise InsufficientDataError(f"spearman needs n >= 3, got {n}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("rank correlation is undefined for a constant sequence")
    a = _centered_rank_ints(x)
    b = _centered_rank_ints(y)
    cross = int(a @ b)
    r = math.copysign(_sqrt_ratio(cross * cross, int(a @ a) * int(b @ b)), cross)
    if n <= EXACT_PERMUTATION_MAX_N:
        return r, _exact_p_value(a, b)
    return r, spearman_t_p_value(r, n)


def spearman_t_p_value(r: float, n: int) -> float:
    """Two-sided t-approximation p-value for a given r_s."""
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * stats.t.sf(abs(t), n - 2))


# ---------------------------------------------------------------------------
# run summaries


@dataclass(frozen=True)
class LayerSummary:
    layer_offset: int
    width: int | None
    mi_xt_max: float
    mi_xt_mean: float
    mi_xt_min_window: float
    mi_xt_max_window: float
    mi_ty_mean: float
    rho: float
    acc_mean: float
    acc_min: float
    acc_max: float
    regime: RegimeVerdict | None

    @property
    def reliable(self) -> bool | None:
        return None if self.regime is None else self.regime.reliable


@dataclass(frozen=True)
class RunSummary:
    run_id: str
    config_hash: str
    layers: dict[int, LayerSummary]
    dataset: str = ""
    group: str = ""
    seed: int = 0
    weight_decay: float = 0.0


def build_run_summary(
    trajectories: Sequence[IpTrajectory],
    accuracies: Sequence[float] | None = None,
    regime: RegimeVerdict | dict[int, RegimeVerdict] | None = None,
    window: int = DEFAULT_WINDOW,
    *,
    run_id: str = "",
    config_hash: str = "",
    dataset: str = "",
    group: str = "",
    seed: int = 0,
    weight_decay: float = 0.0,
) -> RunSummary:
    """Summarise the last ``window`` records of every layer trajectory.

    ``regime`` may be one verdict shared by all layers or a mapping from layer
    offset to verdict. Layers outside the reliable regime are kept and flagged.
    """
    if not trajectories:
        raise InsufficientDataError("no trajectories to summarise")
    layers = {}
    for traj in trajectories:
        if len(traj) == 0:
            raise InsufficientDataError(f"layer {traj.layer_offset} has no records")
        acc = list(accuracies) if accuracies is not None else traj.accuracy
        if len(acc) != len(traj):
            raise ValueError("accuracies must be aligned with trajectory records")
        acc_win = acc[-window:]
        mi_win = traj.mi_xt[-window:]
        verdict = regime.get(traj.layer_offset) if isinstance(regime, dict) else regime
        layers[traj.layer_offset] = LayerSummary(
            layer_offset=traj.layer_offset,
            width=traj.width if traj.width is not None else (verdict.width if verdict else None),
            mi_xt_max=max(traj.mi_xt),
            mi_xt_mean=last_k_mean(traj.mi_xt, window),
            mi_xt_min_window=min(mi_win),
            mi_xt_max_window=max(mi_win),
            mi_ty_mean=last_k_mean(traj.mi_ty, window),
            rho=compression_factor(traj, window),
            acc_mean=last_k_mean(acc, window),
            acc_min=min(acc_win),
            acc_max=max(acc_win),
            regime=verdict,
        )
    return RunSummary(run_id, config_hash, layers, dataset, group, seed, weight_decay)


def correlate_group(summaries: Sequence[RunSummary], layer_offset: int) -> tuple[float, float, int]:
    """Spearman r_s between end-of-training I(X;T) and accuracy across runs.

    Negative values mean lower I(X;T) (more compression) goes with higher accuracy.
    """
    pairs = [
        (s.layers[layer_offset].mi_xt_mean, s.layers[layer_offset].acc_mean)
        for s in summaries if layer_offset in s.layers
    ]
    if len(pairs) < 3:
        raise InsufficientDataError(
            f"layer {layer_offset}: {len(pairs)} runs, need at least 3 to correlate"
        )
    r, p = spearman([a for a, _ in pairs], [b for _, b in pairs])
    return r, p, len(pairs)


def pooled_by_lambda(summaries: Sequence[RunSummary], layer_offset: int) -> list[dict]:
    """Per weight decay: mean of run means and min/max over the runs' window ranges."""
    by_lambda: dict[float, list[LayerSummary]] = {}
    for s in summaries:
        if layer_offset in s.layers:
            by_lambda.setdefault(s.weight_decay, []).append(s.layers[layer_offset])
    out = []
    for lam in sorted(by_lambda):
        ls = by_lambda[lam]
        out.append({
            "lambda": lam,
            "runs": len(ls),
            "mi_mean": math.fsum(x.mi_xt_mean for x in ls) / len(ls),
            "mi_min": min(x.mi_xt_min_window for x in ls),
            "mi_max": max(x.mi_xt_max_window for x in ls),
            "acc_mean": math.fsum(x.acc_mean for x in ls) / len(ls),
            "acc_min": min(x.acc_min for x in ls),
            "acc_max": max(x.acc_max for x in ls),
        })
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def summary_rows(summaries: Sequence[RunSummary]) -> list[list]:
    rows = []
    for s in summaries:
        for off in sorted(s.layers):
            ls = s.layers[off]
            rows.append([
                s.dataset, s.group, s.run_id, s.seed, float(s.weight_decay), off, ls.width,
                ls.reliable, ls.mi_xt_max, ls.mi_xt_mean, ls.mi_ty_mean, ls.rho,
                ls.acc_mean, ls.acc_min, ls.acc_max,
            ])
    return rows


def summary_csv(summaries: Sequence[RunSummary]) -> str:
    return _csv(SUMMARY_COLUMNS, summary_rows(summaries))


def correlation_csv(rows: Sequence[Sequence]) -> str:
    return _csv(CORRELATION_COLUMNS, rows)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()
