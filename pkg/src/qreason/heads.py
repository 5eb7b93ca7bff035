"""The seven reasoning modules: attention heads, classifiers, and the
bilinear world comparison.

Each head is a pure function of an EncodedPair and its parameters. Index
conventions for the two-way distributions:

* polarity:   0 = positive correlation, 1 = negative
* value:      0 = increment, 1 = decrement
* comparison: 0 = world1 more relevant to the cause, 1 = world2
* type:       0 = prediction, 1 = comparison

Attention-scoring MLPs have one tanh hidden layer of width d and a width-1
output layer without bias (a shared logit offset is inert under softmax).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine as en
from .engine import Tensor
from .encoder import EncodedPair, uniform_init

KNOWLEDGE = "knowledge"
STATEMENT = "statement"

SPAN_HEADS = ("cause", "effect", "world", "world1", "world2")
BINARY_HEADS = ("polarity", "value", "comparison", "type")
ALL_HEADS = SPAN_HEADS + BINARY_HEADS


@dataclass
class AttnVec:
    """Probability distribution over one segment's token positions."""

    probs: Tensor
    segment: str


@dataclass
class BinaryDist:
    """Two-way probability pair with a semantics tag."""

    p: Tensor
    kind: str

    def argmax(self) -> int:
        # tie toward the first class
        return 0 if self.p.value[0] >= self.p.value[1] else 1


def init_head_params(d: int, rng: np.random.Generator, dtype=np.float32, prefix: str = "head") -> dict[str, Tensor]:
    p: dict[str, Tensor] = {}

    def add(name, shape, fan_in):
        p[f"{prefix}.{name}"] = en.parameter(uniform_init(rng, shape, fan_in, dtype), name)

    for head in SPAN_HEADS:
        add(f"{head}.w1", (d, d), d)
        add(f"{head}.b1", (d,), d)
        add(f"{head}.w2", (d,), d)
    for head, in_dim in (("polarity", 2 * d), ("value", d), ("type", d)):
        add(f"{head}.w1", (in_dim, d), in_dim)
        add(f"{head}.b1", (d,), in_dim)
        add(f"{head}.w2", (d, 2), d)
        add(f"{head}.b2", (2,), d)
    add("wcom", (d, d), d)
    return p


def _token_scores(h: Tensor, n: int, n_total: int, params, name: str, prefix: str) -> Tensor:
    rows = en.take_rows(h, 0, n)
    hidden = en.tanh(en.affine(rows, params[f"{prefix}.{name}.w1"], params[f"{prefix}.{name}.b1"]))
    return en.pad_rows(en.matmul(hidden, params[f"{prefix}.{name}.w2"]), n_total)


def _span_attention(h: Tensor, mask: np.ndarray, n: int, params, name: str, segment: str, prefix: str) -> AttnVec:
    logits = _token_scores(h, n, mask.shape[0], params, name, prefix)
    return AttnVec(probs=en.masked_softmax(logits, mask), segment=segment)


def _binary(x: Tensor, params, name: str, kind: str, prefix: str) -> BinaryDist:
    hidden = en.tanh(en.affine(x, params[f"{prefix}.{name}.w1"], params[f"{prefix}.{name}.b1"]))
    logits = en.affine(hidden, params[f"{prefix}.{name}.w2"], params[f"{prefix}.{name}.b2"])
    return BinaryDist(p=en.masked_softmax(logits, None), kind=kind)


def _require_segment(vec: AttnVec, segment: str, op: str) -> None:
    if vec.segment != segment:
        raise ValueError(f"{op} expects a {segment}-segment attention vector, got {vec.segment}")


def find_cause_effect(pair: EncodedPair, params, prefix: str = "head") -> tuple[AttnVec, AttnVec]:
    p_c = _span_attention(pair.Hb, pair.knowledge_mask, pair.n, params, "cause", KNOWLEDGE, prefix)
    p_e = _span_attention(pair.Hb, pair.knowledge_mask, pair.n, params, "effect", KNOWLEDGE, prefix)
    return p_c, p_e


def polarity_check(pair: EncodedPair, p_c: AttnVec, p_e: AttnVec, params, prefix: str = "head") -> BinaryDist:
    _require_segment(p_c, KNOWLEDGE, "polarity_check")
    _require_segment(p_e, KNOWLEDGE, "polarity_check")
    pooled = en.concat([en.weighted_sum(pair.Hb, p_c.probs), en.weighted_sum(pair.Hb, p_e.probs)])
    return _binary(pooled, params, "polarity", "polarity", prefix)


def find_world(pair: EncodedPair, params, prefix: str = "head") -> AttnVec:
    return _span_attention(pair.Hs, pair.statement_mask, pair.m, params, "world", STATEMENT, prefix)


def value_prediction(pair: EncodedPair, p_w: AttnVec, params, prefix: str = "head") -> BinaryDist:
    _require_segment(p_w, STATEMENT, "value_prediction")
    return _binary(en.weighted_sum(pair.Hs, p_w.probs), params, "value", "value", prefix)


def find_worlds(pair: EncodedPair, params, prefix: str = "head") -> tuple[AttnVec, AttnVec]:
    p_w1 = _span_attention(pair.Hs, pair.statement_mask, pair.m, params, "world1", STATEMENT, prefix)
    p_w2 = _span_attention(pair.Hs, pair.statement_mask, pair.m, params, "world2", STATEMENT, prefix)
    return p_w1, p_w2


def worlds_comparison(
    pair: EncodedPair,
    p_c: AttnVec,
    p_w1: AttnVec,
    p_w2: AttnVec,
    params,
    prefix: str = "head",
) -> BinaryDist:
    _require_segment(p_c, KNOWLEDGE, "worlds_comparison")
    _require_segment(p_w1, STATEMENT, "worlds_comparison")
    _require_segment(p_w2, STATEMENT, "worlds_comparison")
    wcom = params[f"{prefix}.wcom"]
    if wcom.value.shape[0] != pair.Hb.value.shape[1]:
        raise ValueError(f"wcom shape {wcom.value.shape} does not match hidden size {pair.Hb.value.shape[1]}")
    u = en.weighted_sum(pair.Hb, p_c.probs)
    scores = [en.bilinear(u, wcom, en.weighted_sum(pair.Hs, pw.probs)) for pw in (p_w1, p_w2)]
    return BinaryDist(p=en.masked_softmax(en.stack_scalars(scores), None), kind="comparison")


def classify_type(pair: EncodedPair, params, prefix: str = "head") -> BinaryDist:
    # mean over the m real statement tokens, never the padding
    pooled = en.mean_pool(pair.Hs, pair.statement_mask)
    return _binary(pooled, params, "type", "type", prefix)


def run_all_heads(pair: EncodedPair, params, prefix: str = "head", only=None) -> dict:
    """Module outputs for one encoded instance.

    With only=None every head runs (the evaluation protocol consumes the full
    set); otherwise just the requested heads plus their upstream inputs.
    """
    need = set(ALL_HEADS if only is None else only)
    if "polarity" in need or "comparison" in need:
        need.update(("cause", "effect"))
    if "value" in need:
        need.add("world")
    if "comparison" in need:
        need.update(("world1", "world2"))
    out: dict = {}
    if {"cause", "effect"} & need:
        out["cause"], out["effect"] = find_cause_effect(pair, params, prefix)
    if "world" in need:
        out["world"] = find_world(pair, params, prefix)
    if {"world1", "world2"} & need:
        out["world1"], out["world2"] = find_worlds(pair, params, prefix)
    if "polarity" in need:
        out["polarity"] = polarity_check(pair, out["cause"], out["effect"], params, prefix)
    if "value" in need:
        out["value"] = value_prediction(pair, out["world"], params, prefix)
    if "comparison" in need:
        out["comparison"] = worlds_comparison(pair, out["cause"], out["world1"], out["world2"], params, prefix)
    if "type" in need:
        out["type"] = classify_type(pair, params, prefix)
    return out
