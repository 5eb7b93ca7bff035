"""Reverse-mode autodiff over numpy arrays, sized for this pipeline.

The op set is deliberately small: affine maps, tanh/relu, masked softmax,
weighted sums (H^T p), concatenation, bilinear forms, log, elementwise
multiply, sum reductions, plus the handful of primitives the transformer
encoder needs (matmul, layer norm, embedding gather, row slicing/padding).
Training runs in float32; validation (gradcheck) in float64. All ops keep
the dtype of their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class Tensor:
    """A node in the computation graph.

    value and grad always share shape and dtype; grad is allocated lazily on
    the first accumulation. Graphs are acyclic by construction (ops only ever
    reference already-built tensors).
    """

    __slots__ = ("value", "grad", "parents", "_backward", "op", "needs_grad")

    def __init__(self, value, parents=(), backward=None, op="leaf", needs_grad=True):
        self.value = np.asarray(value)
        self.grad = None
        self.parents = tuple(parents)
        self._backward = backward
        self.op = op
        self.needs_grad = needs_grad

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.value.shape}, dtype={self.value.dtype})"


def parameter(value, name: str = "param") -> Tensor:
    return Tensor(np.asarray(value), op=f"param:{name}", needs_grad=True)


def constant(value) -> Tensor:
    return Tensor(np.asarray(value), op="const", needs_grad=False)


def _accum(t: Tensor, g) -> None:
    if not t.needs_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.value)
    t.grad += g


def _needs(parents: Sequence[Tensor]) -> bool:
    return any(p.needs_grad for p in parents)


def _make(value, parents, backward, op) -> Tensor:
    if not _needs(parents):
        return Tensor(value, (), None, op, needs_grad=False)
    return Tensor(value, parents, backward, op)


def _toposort(out: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(out, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(out: Tensor) -> None:
    """Accumulate d(out)/d(leaf) into .grad for every reachable leaf.

    Interior adjoints are per-call; leaf gradients add up across calls, so a
    batch can be summed by running backward once per example, and repeated
    calls on the same graph accumulate.
    """
    if out.value.size != 1:
        raise ValueError(f"backward requires a scalar output, got shape {out.value.shape}")
    order = _toposort(out)
    for node in order:
        if node.parents:
            node.grad = None
    _accum(out, np.ones_like(out.value))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grad(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None


def find_nonfinite(out: Tensor) -> str | None:
    """Name of the first op (in forward order) with a non-finite value, if any."""
    for node in _toposort(out):
        if not np.all(np.isfinite(node.value)):
            return node.op
    return None


# ---------------------------------------------------------------------------
# ops


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ValueError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")
    value = a.value + b.value

    def back(g):
        _accum(a, g)
        _accum(b, g)

    return _make(value, (a, b), back, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ValueError(f"mul shape mismatch: {a.value.shape} vs {b.value.shape}")
    value = a.value * b.value

    def back(g):
        _accum(a, g * b.value)
        _accum(b, g * a.value)

    return _make(value, (a, b), back, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    value = a.value * c

    def back(g):
        _accum(a, g * c)

    return _make(value, (a,), back, "scale")


def shift(a: Tensor, c: float) -> Tensor:
    """Add a python scalar elementwise (e.g. 1 - p as shift(scale(p, -1), 1))."""
    value = a.value + c

    def back(g):
        _accum(a, g)

    return _make(value, (a,), back, "shift")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.value, b.value
    if av.ndim == 0 or bv.ndim == 0 or av.ndim > 2 or bv.ndim > 2:
        raise ValueError(f"matmul supports rank 1-2 operands, got {av.ndim} and {bv.ndim}")
    value = av @ bv

    def back(g):
        if av.ndim == 2 and bv.ndim == 2:
            _accum(a, g @ bv.T)
            _accum(b, av.T @ g)
        elif av.ndim == 2 and bv.ndim == 1:
            _accum(a, np.outer(g, bv))
            _accum(b, av.T @ g)
        elif av.ndim == 1 and bv.ndim == 2:
            _accum(a, bv @ g)
            _accum(b, np.outer(av, g))
        else:  # dot product
            _accum(a, g * bv)
            _accum(b, g * av)

    return _make(value, (a, b), back, "matmul")


def matmul_t(a: Tensor, b: Tensor) -> Tensor:
    """a @ b.T for 2-D operands (attention scores without a transpose node)."""
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim != 2:
        raise ValueError("matmul_t requires 2-D operands")
    value = av @ bv.T

    def back(g):
        _accum(a, g @ bv)
        _accum(b, g.T @ av)

    return _make(value, (a, b), back, "matmul_t")


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with x of rank 1 or 2, w (d, k), b (k,)."""
    xv, wv, bv = x.value, w.value, b.value
    if wv.ndim != 2 or bv.ndim != 1 or wv.shape[1] != bv.shape[0]:
        raise ValueError(f"affine weight/bias mismatch: {wv.shape} vs {bv.shape}")
    if xv.shape[-1] != wv.shape[0]:
        raise ValueError(f"affine input mismatch: {xv.shape} vs {wv.shape}")
    value = xv @ wv + bv

    def back(g):
        if xv.ndim == 2:
            _accum(x, g @ wv.T)
            _accum(w, xv.T @ g)
            _accum(b, g.sum(axis=0))
        else:
            _accum(x, wv @ g)
            _accum(w, np.outer(xv, g))
            _accum(b, g)

    return _make(value, (x, w, b), back, "affine")


def tanh(x: Tensor) -> Tensor:
    value = np.tanh(x.value)

    def back(g):
        _accum(x, g * (1.0 - value * value))

    return _make(value, (x,), back, "tanh")


def relu(x: Tensor) -> Tensor:
    value = np.maximum(x.value, 0)

    def back(g):
        _accum(x, g * (x.value > 0))

    return _make(value, (x,), back, "relu")


def sigmoid(x: Tensor) -> Tensor:
    xv = x.value
    value = np.where(xv >= 0, 1.0 / (1.0 + np.exp(-np.abs(xv))), np.exp(-np.abs(xv)) / (1.0 + np.exp(-np.abs(xv))))
    value = np.asarray(value, dtype=xv.dtype)

    def back(g):
        _accum(x, g * value * (1.0 - value))

    return _make(value, (x,), back, "sigmoid")


def masked_softmax(logits: Tensor, mask: np.ndarray | None) -> Tensor:
    """Softmax over the last axis; positions where mask is False get exactly 0.

    mask is a constant boolean vector over the last axis (broadcast over rows
    for 2-D logits). Masked positions also receive exactly zero gradient.
    """
    lv = logits.value
    if mask is None:
        mask = np.ones(lv.shape[-1], dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (lv.shape[-1],):
        raise ValueError(f"mask shape {mask.shape} does not match logits {lv.shape}")
    if not mask.any():
        raise ValueError("masked_softmax requires at least one unmasked position")
    neg_inf = np.array(-np.inf, dtype=lv.dtype)
    shifted = np.where(mask, lv, neg_inf)
    m = shifted.max(axis=-1, keepdims=True)
    e = np.exp(shifted - m)
    value = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        inner = (g * value).sum(axis=-1, keepdims=True)
        _accum(logits, value * (g - inner))

    return _make(value, (logits,), back, "masked_softmax")


def weighted_sum(h: Tensor, p: Tensor) -> Tensor:
    """H^T p: pool an (L, d) matrix with an (L,) weight vector into (d,)."""
    hv, pv = h.value, p.value
    if hv.ndim != 2 or pv.ndim != 1 or hv.shape[0] != pv.shape[0]:
        raise ValueError(f"weighted_sum shape mismatch: {hv.shape} vs {pv.shape}")
    value = hv.T @ pv

    def back(g):
        _accum(h, np.outer(pv, g))
        _accum(p, hv @ g)

    return _make(value, (h, p), back, "weighted_sum")


def mean_pool(h: Tensor, mask: np.ndarray) -> Tensor:
    """Mean of the rows of h where mask is True; divides by the true count."""
    mask = np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("mean_pool requires at least one unmasked row")
    weights = constant((mask / n).astype(h.value.dtype))
    return weighted_sum(h, weights)


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis (vectors, or matrices column-wise)."""
    parts = list(parts)
    sizes = [p.value.shape[-1] for p in parts]
    value = np.concatenate([p.value for p in parts], axis=-1)
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for p, s, e in zip(parts, offsets[:-1], offsets[1:]):
            _accum(p, g[..., s:e])

    return _make(value, tuple(parts), back, "concat")


def stack_scalars(parts: Sequence[Tensor]) -> Tensor:
    parts = list(parts)
    for p in parts:
        if p.value.size != 1:
            raise ValueError("stack_scalars expects scalar tensors")
    value = np.stack([p.value.reshape(()) for p in parts])

    def back(g):
        for i, p in enumerate(parts):
            _accum(p, np.asarray(g[i]).reshape(p.value.shape))

    return _make(value, tuple(parts), back, "stack_scalars")


def bilinear(u: Tensor, w: Tensor, v: Tensor) -> Tensor:
    """u^T W v as a 0-d tensor."""
    uv, wv, vv = u.value, w.value, v.value
    if uv.ndim != 1 or vv.ndim != 1 or wv.shape != (uv.shape[0], vv.shape[0]):
        raise ValueError(f"bilinear shape mismatch: {uv.shape}, {wv.shape}, {vv.shape}")
    wu = wv.T @ uv
    value = np.asarray(wu @ vv)

    def back(g):
        _accum(u, g * (wv @ vv))
        _accum(w, g * np.outer(uv, vv))
        _accum(v, g * wu)

    return _make(value, (u, w, v), back, "bilinear")


def log(x: Tensor) -> Tensor:
    value = np.log(x.value)

    def back(g):
        _accum(x, g / x.value)

    return _make(value, (x,), back, "log")


def safe_log(x: Tensor, eps: float = 1e-12) -> Tensor:
    """log(max(x, eps)); clamped entries get zero gradient."""
    clamped = np.maximum(x.value, eps)
    value = np.log(clamped)

    def back(g):
        _accum(x, np.where(x.value > eps, g / clamped, 0.0))

    return _make(value, (x,), back, "safe_log")


def total(x: Tensor) -> Tensor:
    """Sum all entries into a 0-d tensor."""
    value = np.asarray(x.value.sum())

    def back(g):
        _accum(x, np.broadcast_to(g, x.value.shape))

    return _make(value, (x,), back, "sum")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    xv = x.value
    mu = xv.mean(axis=-1, keepdims=True)
    xc = xv - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    value = xhat * gain.value + bias.value
    lead_axes = tuple(range(xv.ndim - 1))

    def back(g):
        _accum(gain, (g * xhat).sum(axis=lead_axes))
        _accum(bias, g.sum(axis=lead_axes))
        gx = g * gain.value
        d = xv.shape[-1]
        term = gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).sum(axis=-1, keepdims=True) / d
        _accum(x, inv * term)

    return _make(value, (x, gain, bias), back, "layer_norm")


def embed(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)
    if ids.ndim != 1:
        raise ValueError("embed expects a 1-D id array")
    if ids.size and (ids.min() < 0 or ids.max() >= table.value.shape[0]):
        raise ValueError("embed id out of range")
    value = table.value[ids]

    def back(g):
        gt = np.zeros_like(table.value)
        np.add.at(gt, ids, g)
        _accum(table, gt)

    return _make(value, (table,), back, "embed")


def take_rows(x: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start <= stop <= x.value.shape[0]):
        raise ValueError(f"take_rows [{start}:{stop}] out of range for {x.value.shape}")
    value = x.value[start:stop].copy()

    def back(g):
        gfull = np.zeros_like(x.value)
        gfull[start:stop] = g
        _accum(x, gfull)

    return _make(value, (x,), back, "take_rows")


def row(x: Tensor, i: int) -> Tensor:
    value = x.value[i].copy()

    def back(g):
        gfull = np.zeros_like(x.value)
        gfull[i] = g
        _accum(x, gfull)

    return _make(value, (x,), back, "row")


def pad_rows(x: Tensor, n_total: int) -> Tensor:
    """Zero-pad a (r, d) matrix or (r,) vector to n_total rows."""
    r = x.value.shape[0]
    if r > n_total:
        raise ValueError(f"pad_rows: {r} rows exceed target {n_total}")
    value = np.zeros((n_total,) + x.value.shape[1:], dtype=x.value.dtype)
    value[:r] = x.value

    def back(g):
        _accum(x, g[:r])

    return _make(value, (x,), back, "pad_rows")


def dot(a: Tensor, b: Tensor) -> Tensor:
    return total(mul(a, b))


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimState:
    """Adam accumulators; moments are allocated lazily per parameter."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: OptimState):
    """One bias-corrected Adam update, in place, in sorted parameter order."""
    if state.lr <= 0:
        raise ValueError("learning rate must be positive")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name in sorted(params):
        p = params[name]
        g = np.asarray(grads.get(name, np.zeros_like(p.value)))
        if g.shape != p.value.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.value.shape} for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


# ---------------------------------------------------------------------------
# gradient checking


def gradcheck(
    loss_fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    eps: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Max relative error between backward gradients and central differences.

    loss_fn must rebuild the graph from the current parameter values on every
    call. Relative error is |analytic - numeric| / max(|analytic|, |numeric|,
    floor); the floor keeps near-zero gradients from blowing up the ratio.
    Run with float64 parameters.
    """
    out = loss_fn()
    if out.value.size != 1:
        raise ValueError("gradcheck requires a scalar loss")
    if not np.all(np.isfinite(out.value)):
        raise RuntimeError(f"non-finite loss in op '{find_nonfinite(out)}'")
    zero_grad(params.values())
    backward(out)
    analytic = {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.value)) for k, t in params.items()}

    worst = 0.0
    for name in sorted(params):
        p = params[name]
        flat = p.value.reshape(-1)
        aflat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f1 = loss_fn().value
            flat[i] = orig - eps
            f2 = loss_fn().value
            flat[i] = orig
            if not (np.isfinite(f1) and np.isfinite(f2)):
                raise RuntimeError(f"non-finite loss while perturbing '{name}'")
            numeric = float(f1 - f2) / (2.0 * eps)
            a = float(aflat[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            if rel > worst:
                worst = rel
    return worst
