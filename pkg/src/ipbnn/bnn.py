"""Fully connected binary neural networks trained from scratch with numpy.

Hidden layers compute affine -> batch norm -> sign, where ``sign(z) = 1`` for
``z > 0`` and ``0`` otherwise. The backward pass uses the saturation-aware
straight-through estimator: the upstream gradient passes unchanged where
``|z| <= 1`` and is cancelled elsewhere. The output layer is a plain affine map
followed by softmax cross-entropy. Weights stay at full precision (float64).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .estimator import PatternBatch

BN_MOMENTUM = 0.1
BN_EPS = 1e-5
CHECKPOINT_VERSION = 1


class ModeError(RuntimeError):
    """An operation was called while the model was in the wrong mode."""


def sign_forward(z):
    """Elementwise ``1 if z > 0 else 0``; scalars give ``int``, arrays give ``uint8``."""
    arr = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("sign of a non-finite pre-activation is undefined")
    out = (arr > 0).astype(np.uint8)
    return int(out) if out.ndim == 0 else out


def ste_backward(z, upstream_grad):
    """Pass ``upstream_grad`` where ``-1 <= z <= 1``, zero elsewhere."""
    arr = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("straight-through gradient of a non-finite pre-activation")
    g = np.asarray(upstream_grad, dtype=np.float64)
    out = np.where(np.abs(arr) <= 1.0, g, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ArchitectureSpec:
    input_dim: int
    hidden_widths: tuple[int, ...]
    output_classes: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1 or self.output_classes < 1:
            raise ValueError("input_dim and output_classes must be >= 1")
        if not self.hidden_widths or min(self.hidden_widths) < 1:
            raise ValueError(f"hidden widths must be >= 1, got {self.hidden_widths}")

    @property
    def layer_offsets(self) -> list[int]:
        """Negative offsets from the output layer; -1 is the last hidden layer."""
        n = len(self.hidden_widths)
        return [i - n for i in range(n)]


@dataclass
class HiddenLayer:
    W: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class LayerCache:
    inputs: np.ndarray
    z: np.ndarray
    t: np.ndarray
    xhat: np.ndarray | None = None
    inv_std: np.ndarray | None = None


@dataclass
class ForwardTrace:
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    logits: np.ndarray
    training: bool
    caches: list[LayerCache] = field(repr=False, default_factory=list)
    output_inputs: np.ndarray | None = field(repr=False, default=None)

    def patterns(self) -> list[PatternBatch]:
        return [PatternBatch.from_bits(t) for t in self.activations]


class BnnModel:
    """Binary-activation MLP with per-layer batch norm.

    ``batch_norm=False`` replaces every batch-norm block by the identity, which
    is useful for gradient checks where the surrogate must be a plain
    composition of affine maps.
    """

    def __init__(
        self,
        arch: ArchitectureSpec,
        seed: int = 0,
        batch_norm: bool = True,
        momentum: float = BN_MOMENTUM,
        eps: float = BN_EPS,
    ):
        self.arch = arch
        self.batch_norm = batch_norm
        self.momentum = momentum
        self.eps = eps
        self.training = True
        rng = np.random.default_rng(seed)
        self.hidden: list[HiddenLayer] = []
        fan_in = arch.input_dim
        for width in arch.hidden_widths:
            bound = math.sqrt(1.0 / fan_in)
            self.hidden.append(HiddenLayer(
                W=rng.uniform(-bound, bound, size=(fan_in, width)),
                b=np.zeros(width),
                gamma=np.ones(width),
                beta=np.zeros(width),
                running_mean=np.zeros(width),
                running_var=np.ones(width),
            ))
            fan_in = width
        bound = math.sqrt(1.0 / fan_in)
        self.W_out = rng.uniform(-bound, bound, size=(fan_in, arch.output_classes))
        self.b_out = np.zeros(arch.output_classes)

    def train(self) -> "BnnModel":
        self.training = True
        return self

    def eval(self) -> "BnnModel":
        self.training = False
        return self

    def parameters(self) -> Iterator[tuple[str, np.ndarray]]:
        """Trainable arrays in a fixed order; yielded arrays are updated in place."""
        for i, layer in enumerate(self.hidden):
            yield f"hidden{i}.W", layer.W
            yield f"hidden{i}.b", layer.b
            if self.batch_norm:
                yield f"hidden{i}.gamma", layer.gamma
                yield f"hidden{i}.beta", layer.beta
        yield "out.W", self.W_out
        yield "out.b", self.b_out

    def buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.hidden):
            yield f"hidden{i}.running_mean", layer.running_mean
            yield f"hidden{i}.running_var", layer.running_var

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in [*self.parameters(), *self.buffers()]}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, arr in [*self.parameters(), *self.buffers()]:
            src = np.asarray(state[name], dtype=np.float64)
            if src.shape != arr.shape:
                raise ValueError(f"{name}: shape {src.shape} != {arr.shape}")
            arr[...] = src


def forward(model: BnnModel, inputs: np.ndarray) -> ForwardTrace:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.arch.input_dim:
        raise ValueError(
            f"expected inputs of shape (N, {model.arch.input_dim}), got {x.shape}"
        )
    pre, acts, caches = [], [], []
    h = x
    for layer in model.hidden:
        a = h @ layer.W + layer.b
        cache = LayerCache(inputs=h, z=a, t=a)
        if model.batch_norm:
            if model.training:
                mean = a.mean(axis=0)
                var = a.var(axis=0)
                inv_std = 1.0 / np.sqrt(var + model.eps)
                xhat = (a - mean) * inv_std
                m = model.momentum
                n = a.shape[0]
                unbiased = var * n / (n - 1) if n > 1 else var
                layer.running_mean[...] = (1 - m) * layer.running_mean + m * mean
                layer.running_var[...] = (1 - m) * layer.running_var + m * unbiased
                cache.xhat, cache.inv_std = xhat, inv_std
            else:
                xhat = (a - layer.running_mean) / np.sqrt(layer.running_var + model.eps)
            z = layer.gamma * xhat + layer.beta
        else:
            z = a
        t = (z > 0).astype(np.uint8)
        cache.z, cache.t = z, t
        pre.append(z)
        acts.append(t)
        caches.append(cache)
        h = t.astype(np.float64)
    logits = h @ model.W_out + model.b_out
    return ForwardTrace(pre, acts, logits, model.training, caches, h)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy in nats."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(log_z - shifted[np.arange(len(labels)), labels]))


def backward(
    model: BnnModel,
    trace: ForwardTrace,
    labels: np.ndarray | None = None,
    grad_logits: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy w.r.t. every trainable parameter.

    ``grad_logits`` overrides the loss gradient at the output (used to inject
    an arbitrary upstream signal).
    """
    if not trace.training or not model.training:
        raise ModeError("backward requires a trace produced in training mode")
    if grad_logits is None:
        labels = np.asarray(labels, dtype=np.int64)
        n = labels.shape[0]
        grad_logits = softmax(trace.logits)
        grad_logits[np.arange(n), labels] -= 1.0
        grad_logits /= n
    grads: dict[str, np.ndarray] = {}
    grads["out.W"] = trace.output_inputs.T @ grad_logits
    grads["out.b"] = grad_logits.sum(axis=0)
    upstream = grad_logits @ model.W_out.T
    for i in reversed(range(len(model.hidden))):
        layer, cache = model.hidden[i], trace.caches[i]
        dz = ste_backward(cache.z, upstream)
        if model.batch_norm:
            xhat, inv_std = cache.xhat, cache.inv_std
            grads[f"hidden{i}.gamma"] = (dz * xhat).sum(axis=0)
            grads[f"hidden{i}.beta"] = dz.sum(axis=0)
            dxhat = dz * layer.gamma
            n = dz.shape[0]
            da = (inv_std / n) * (
                n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
            )
        else:
            da = dz
        grads[f"hidden{i}.W"] = cache.inputs.T @ da
        grads[f"hidden{i}.b"] = da.sum(axis=0)
        if i > 0:
            upstream = da @ layer.W.T
    return grads


@dataclass
class OptimizerState:
    """Adam, or AdamW with decoupled weight decay ``w <- w - lr * weight_decay * w``."""

    lr: float
    weight_decay: float = 0.0
    variant: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.variant not in ("adam", "adamw"):
            raise ValueError(f"unknown optimizer variant {self.variant!r}")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be non-negative")
        if self.variant == "adam" and self.weight_decay != 0:
            raise ValueError("plain Adam takes no weight decay; use variant='adamw'")

    @classmethod
    def for_weight_decay(cls, lr: float, weight_decay: float) -> "OptimizerState":
        """Adam when ``weight_decay == 0``, AdamW otherwise."""
        return cls(lr=lr, weight_decay=weight_decay,
                   variant="adamw" if weight_decay > 0 else "adam")


def optimizer_step(state: OptimizerState, model: BnnModel, grads: dict[str, np.ndarray]) -> None:
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in model.parameters():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        if state.variant == "adamw":
            p *= 1.0 - state.lr * state.weight_decay
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def train_epoch(
    model: BnnModel,
    optimizer: OptimizerState,
    inputs: np.ndarray,
    labels: np.ndarray,
    batch_size: int,
    seed: int,
    epoch: int = 0,
) -> float:
    """One shuffled pass; returns the mean per-sample training loss."""
    n = len(labels)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    model.train()
    order = np.random.default_rng([seed, epoch]).permutation(n)
    total = 0.0
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        trace = forward(model, inputs[idx])
        y = labels[idx]
        total += cross_entropy(trace.logits, y) * len(idx)
        optimizer_step(optimizer, model, backward(model, trace, y))
    return total / n


def extract_binary_activations(model: BnnModel, inputs: np.ndarray) -> list[PatternBatch]:
    if model.training:
        raise ModeError("switch the model to evaluation mode before extracting activations")
    return forward(model, inputs).patterns()


def evaluate_accuracy(model: BnnModel, inputs: np.ndarray, labels: np.ndarray) -> float:
    if model.training:
        raise ModeError("switch the model to evaluation mode before evaluating accuracy")
    logits = forward(model, inputs).logits
    return 100.0 * float(np.mean(np.argmax(logits, axis=1) == labels))


def evaluate(model: BnnModel, inputs: np.ndarray, labels: np.ndarray) -> tuple[float, list[PatternBatch]]:
    """Accuracy and per-layer activation patterns from a single evaluation pass."""
    if model.training:
        raise ModeError("switch the model to evaluation mode before evaluating")
    trace = forward(model, inputs)
    acc = 100.0 * float(np.mean(np.argmax(trace.logits, axis=1) == labels))
    return acc, trace.patterns()


def save_checkpoint(path, model: BnnModel, optimizer: OptimizerState | None = None) -> None:
    arrays = {f"param/{k}": v for k, v in model.state_dict().items()}
    meta = {
        "version": np.array(CHECKPOINT_VERSION),
        "input_dim": np.array(model.arch.input_dim),
        "hidden_widths": np.array(model.arch.hidden_widths),
        "output_classes": np.array(model.arch.output_classes),
        "batch_norm": np.array(model.batch_norm),
        "momentum": np.array(model.momentum),
        "eps": np.array(model.eps),
    }
    if optimizer is not None:
        meta["opt/hyper"] = np.array([optimizer.lr, optimizer.weight_decay, optimizer.beta1,
                                      optimizer.beta2, optimizer.eps])
        meta["opt/variant"] = np.array(optimizer.variant)
        meta["opt/step"] = np.array(optimizer.step)
        for k in optimizer.m:
            arrays[f"opt_m/{k}"] = optimizer.m[k]
            arrays[f"opt_v/{k}"] = optimizer.v[k]
    with open(path, "wb") as fh:
        np.savez(fh, **meta, **arrays)


def load_checkpoint(path) -> tuple[BnnModel, OptimizerState | None]:
    with np.load(Path(path), allow_pickle=False) as z:
        if int(z["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(z['version'])}")
        arch = ArchitectureSpec(int(z["input_dim"]), tuple(int(w) for w in z["hidden_widths"]),
                                int(z["output_classes"]))
        model = BnnModel(arch, batch_norm=bool(z["batch_norm"]),
                         momentum=float(z["momentum"]), eps=float(z["eps"]))
        model.load_state_dict({k[6:]: z[k] for k in z.files if k.startswith("param/")})
        opt = None
        if "opt/step" in z.files:
            lr, wd, b1, b2, eps = (float(x) for x in z["opt/hyper"])
            opt = OptimizerState(lr=lr, weight_decay=wd, variant=str(z["opt/variant"]),
                                 beta1=b1, beta2=b2, eps=eps, step=int(z["opt/step"]))
            for k in z.files:
                if k.startswith("opt_m/"):
                    opt.m[k[6:]] = z[k].copy()
                elif k.startswith("opt_v/"):
                    opt.v[k[6:]] = z[k].copy()
    return model, opt
