"""Masked multi-task reasoning loss and the binary answer loss.

The reasoning loss is -sum over heads of alpha * gamma * gold . log(pred):
span heads score a multi-hot {0,1} vector against a softmax over token
positions, binary heads a one-hot pair. Heads whose availability flag gamma
is off contribute exactly zero to both the value and the gradients (their
terms are never built). Logs are clamped at 1e-12; clamps on gold positions
are counted, not fatal."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import engine as en
from .data import GREATER, Labels, POSITIVE, PREDICTION, SpanLabel, UP
from .engine import Tensor
from .heads import ALL_HEADS, SPAN_HEADS

LOG_EPS = 1e-12


@dataclass
class LossWeights:
    cause: float = 0.1
    effect: float = 0.1
    world: float = 0.1
    world1: float = 0.1
    world2: float = 0.1
    value: float = 0.2
    comparison: float = 0.2
    polarity: float = 0.2
    type: float = 0.2

    def get(self, head: str) -> float:
        return getattr(self, head)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ClampCounter:
    count: int = 0


def span_target(span: SpanLabel, length: int) -> np.ndarray:
    if not (0 <= span.start <= span.end < length):
        raise ValueError(f"span {span} out of range for length {length}")
    target = np.zeros(length)
    target[span.start : span.end + 1] = 1.0
    return target


_BINARY_FIRST = {"polarity": POSITIVE, "value": UP, "comparison": GREATER, "type": PREDICTION}


def binary_target(head: str, label: str) -> np.ndarray:
    return np.array([1.0, 0.0]) if label == _BINARY_FIRST[head] else np.array([0.0, 1.0])


def gold_targets(labels: Labels, n_max: int, m_max: int) -> dict[str, np.ndarray]:
    """Target vectors for every available head of one instance."""
    targets: dict[str, np.ndarray] = {}
    for head, span, length in (
        ("cause", labels.cause, n_max),
        ("effect", labels.effect, n_max),
        ("world", labels.world, m_max),
        ("world1", labels.world1, m_max),
        ("world2", labels.world2, m_max),
    ):
        if span is not None:
            targets[head] = span_target(span, length)
    for head, label in (
        ("polarity", labels.polarity),
        ("value", labels.value),
        ("comparison", labels.comparison),
        ("type", labels.qtype),
    ):
        if label is not None:
            targets[head] = binary_target(head, label)
    return targets


def reason_loss(
    outputs: dict,
    targets: dict[str, np.ndarray],
    gamma: dict[str, bool],
    weights: LossWeights,
    counter: ClampCounter | None = None,
) -> Tensor:
    """-sum_y alpha_y gamma_y gold_y . log(pred_y) over all nine heads."""
    terms = []
    dtype = None
    for head in ALL_HEADS:
        if not gamma.get(head, False):
            continue
        if head not in targets:
            raise ValueError(f"gamma set for head {head!r} but no target given")
        dist = outputs[head]
        probs = dist.probs if head in SPAN_HEADS else dist.p
        gold = np.asarray(targets[head], dtype=probs.value.dtype)
        if gold.shape != probs.value.shape:
            raise ValueError(f"target shape {gold.shape} != prediction shape {probs.value.shape} for {head}")
        if counter is not None:
            counter.count += int(((probs.value <= LOG_EPS) & (gold > 0)).sum())
        term = en.total(en.mul(en.constant(gold), en.safe_log(probs, LOG_EPS)))
        terms.append(en.scale(term, -weights.get(head)))
        dtype = probs.value.dtype
    if not terms:
        return en.constant(np.zeros((), dtype=dtype or np.float32))
    loss = terms[0]
    for term in terms[1:]:
        loss = en.add(loss, term)
    return loss


def answer_loss(prob: Tensor, label: int, counter: ClampCounter | None = None) -> Tensor:
    """Binary cross entropy for one option score."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    if counter is not None:
        p = float(prob.value)
        if (label == 1 and p <= LOG_EPS) or (label == 0 and 1.0 - p <= LOG_EPS):
            counter.count += 1
    if label == 1:
        return en.scale(en.safe_log(prob, LOG_EPS), -1.0)
    return en.scale(en.safe_log(en.shift(en.scale(prob, -1.0), 1.0), LOG_EPS), -1.0)


def answer_loss_pair(p0: Tensor, p1: Tensor, gold: int, counter: ClampCounter | None = None) -> Tensor:
    """Per-instance answer loss: BCE averaged over the two options."""
    l0 = answer_loss(p0, 1 if gold == 0 else 0, counter)
    l1 = answer_loss(p1, 1 if gold == 1 else 0, counter)
    return en.scale(en.add(l0, l1), 0.5)
