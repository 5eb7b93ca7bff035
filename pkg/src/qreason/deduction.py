"""Attention-to-span conversion, the two decision functions, slot-filled
synthetic text, and the end-to-end reasoning chain."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import heads as hd
from .data import COMPARISON, DOWN, GREATER, Instance, POSITIVE, PREDICTION, UP
from .encoder import encode
from .heads import AttnVec
from .model import Model
from .text import Token, assemble_pair, detokenize, tokenize

MORE, LESS = "more", "less"

# glue words of the two templates; kept in every model vocabulary
TEMPLATE_GLUE = "will cause more less than ."


@dataclass(frozen=True)
class Span:
    """Inclusive token span plus the original surface text it covers."""

    start: int
    end: int
    segment: str
    text: str


@dataclass(frozen=True)
class SyntheticText:
    text: str
    slots: dict


def span_window(p: np.ndarray, tau: float) -> tuple[int, int]:
    """Peak position extended while each successive neighbor exceeds tau.

    Ties in the peak break toward the lowest index; the window always
    contains the peak and is contiguous.
    """
    if not 0 < tau < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {tau}")
    p = np.asarray(p)
    if p.ndim != 1 or p.size == 0 or not np.any(p > 0):
        raise ValueError("attention vector must contain positive mass")
    peak = int(np.argmax(p))
    start = peak
    while start > 0 and p[start - 1] > tau:
        start -= 1
    end = peak
    while end < p.size - 1 and p[end + 1] > tau:
        end += 1
    return start, end


def attention_to_span(
    p: AttnVec | np.ndarray,
    tau: float,
    tokens: list[Token],
    source: str,
) -> Span:
    if isinstance(p, AttnVec):
        segment = p.segment
        values = p.probs.value
    else:
        segment = "knowledge"
        values = np.asarray(p)
    start, end = span_window(values, tau)
    end = min(end, len(tokens) - 1)
    start = min(start, end)
    return Span(start=start, end=end, segment=segment, text=detokenize(source, tokens, start, end))


def deduce_prediction(polarity: str, value: str) -> str:
    """More effect iff the change direction agrees with the correlation."""
    return MORE if (polarity == POSITIVE) == (value == UP) else LESS


def deduce_comparison(polarity: str, com: str) -> str:
    """Direction of world1's effect given its ordering on the cause."""
    return MORE if (polarity == POSITIVE) == (com == GREATER) else LESS


def synthesize_text(chain: str, slots: dict, direction: str) -> SyntheticText:
    """Fill the chain's template; slot values must be nonempty."""
    if direction not in (MORE, LESS):
        raise ValueError(f"direction must be more/less, got {direction!r}")
    required = ("world", "effect") if chain == PREDICTION else ("world1", "world2", "effect")
    for key in required:
        if not str(slots.get(key, "")).strip():
            raise ValueError(f"synthesize_text: empty slot {key!r}")
    if chain == PREDICTION:
        text = f"{slots['world']} will cause {direction} {slots['effect']}."
        filled = {"chain": chain, "direction": direction, "world": slots["world"], "effect": slots["effect"]}
    elif chain == COMPARISON:
        text = f"{slots['world1']} will cause {direction} {slots['effect']} than {slots['world2']}."
        filled = {
            "chain": chain,
            "direction": direction,
            "world1": slots["world1"],
            "world2": slots["world2"],
            "effect": slots["effect"],
        }
    else:
        raise ValueError(f"unknown chain {chain!r}")
    return SyntheticText(text=text, slots=filled)


@dataclass
class ReasoningTrace:
    """Every intermediate module output for one instance."""

    instance_id: str
    qtype: str
    forced: bool
    type_dist: np.ndarray
    cause_dist: np.ndarray
    effect_dist: np.ndarray
    cause: Span
    effect: Span
    polarity: str
    polarity_dist: np.ndarray
    synthetic: SyntheticText
    direction: str
    # prediction chain
    world: Optional[Span] = None
    world_dist: Optional[np.ndarray] = None
    value: Optional[str] = None
    value_dist: Optional[np.ndarray] = None
    # comparison chain
    world1: Optional[Span] = None
    world2: Optional[Span] = None
    world1_dist: Optional[np.ndarray] = None
    world2_dist: Optional[np.ndarray] = None
    comparison: Optional[str] = None
    comparison_dist: Optional[np.ndarray] = None


def run_chain(
    instance: Instance,
    model: Model,
    tau: float = 0.15,
    forced_type: str | None = None,
) -> ReasoningTrace:
    """Classify the question, run that chain's modules, convert the attention
    vectors to spans, deduce the direction, and fill in the synthetic text."""
    ktokens = tokenize(instance.knowledge)
    stext = instance.statement()
    stokens = tokenize(stext)
    assembled = assemble_pair(ktokens, stokens, model.vocab, model.cfg.n_max, model.cfg.m_max)
    pair = encode(model.params, model.cfg, assembled)

    p_c, p_e = hd.find_cause_effect(pair, model.params)
    pol = hd.polarity_check(pair, p_c, p_e, model.params)
    cla = hd.classify_type(pair, model.params)
    qtype = forced_type if forced_type is not None else (PREDICTION if cla.argmax() == 0 else COMPARISON)
    if qtype not in (PREDICTION, COMPARISON):
        raise ValueError(f"unknown reasoning type {qtype!r}")

    cause = attention_to_span(p_c, tau, ktokens, instance.knowledge)
    effect = attention_to_span(p_e, tau, ktokens, instance.knowledge)
    polarity = POSITIVE if pol.argmax() == 0 else "-"

    trace = ReasoningTrace(
        instance_id=instance.id,
        qtype=qtype,
        forced=forced_type is not None,
        type_dist=cla.p.value.copy(),
        cause_dist=p_c.probs.value.copy(),
        effect_dist=p_e.probs.value.copy(),
        cause=cause,
        effect=effect,
        polarity=polarity,
        polarity_dist=pol.p.value.copy(),
        synthetic=SyntheticText(text="", slots={}),
        direction=MORE,
    )

    if qtype == PREDICTION:
        p_w = hd.find_world(pair, model.params)
        val = hd.value_prediction(pair, p_w, model.params)
        world = attention_to_span(p_w, tau, stokens, stext)
        value = UP if val.argmax() == 0 else DOWN
        direction = deduce_prediction(polarity, value)
        trace.world = world
        trace.world_dist = p_w.probs.value.copy()
        trace.value = value
        trace.value_dist = val.p.value.copy()
        trace.direction = direction
        trace.synthetic = synthesize_text(PREDICTION, {"world": world.text, "effect": effect.text}, direction)
    else:
        p_w1, p_w2 = hd.find_worlds(pair, model.params)
        com = hd.worlds_comparison(pair, p_c, p_w1, p_w2, model.params)
        world1 = attention_to_span(p_w1, tau, stokens, stext)
        world2 = attention_to_span(p_w2, tau, stokens, stext)
        comparison = GREATER if com.argmax() == 0 else "<"
        direction = deduce_comparison(polarity, comparison)
        trace.world1 = world1
        trace.world2 = world2
        trace.world1_dist = p_w1.probs.value.copy()
        trace.world2_dist = p_w2.probs.value.copy()
        trace.comparison = comparison
        trace.comparison_dist = com.p.value.copy()
        trace.direction = direction
        trace.synthetic = synthesize_text(
            COMPARISON, {"world1": world1.text, "world2": world2.text, "effect": effect.text}, direction
        )
    return trace


def trace_from_labels(instance: Instance, labels) -> ReasoningTrace | None:
    """Oracle trace built from gold labels (distributions become one-hot
    over the gold spans); None when required labels are missing."""
    synth = synth_from_labels(instance, labels)
    if synth is None:
        return None
    ktokens = tokenize(instance.knowledge)
    stext = instance.statement()
    stokens = tokenize(stext)

    def one_hot(span, length):
        v = np.zeros(length)
        v[span.start : span.end + 1] = 1.0 / (span.end - span.start + 1)
        return v

    def k_span(span):
        return Span(span.start, span.end, "knowledge", detokenize(instance.knowledge, ktokens, span.start, span.end))

    def s_span(span):
        return Span(span.start, span.end, "statement", detokenize(stext, stokens, span.start, span.end))

    if labels.cause is None or labels.effect is None:
        return None
    pair01 = lambda first: np.array([1.0, 0.0]) if first else np.array([0.0, 1.0])
    trace = ReasoningTrace(
        instance_id=instance.id,
        qtype=labels.qtype,
        forced=True,
        type_dist=pair01(labels.qtype == PREDICTION),
        cause_dist=one_hot(labels.cause, len(ktokens)),
        effect_dist=one_hot(labels.effect, len(ktokens)),
        cause=k_span(labels.cause),
        effect=k_span(labels.effect),
        polarity=labels.polarity,
        polarity_dist=pair01(labels.polarity == POSITIVE),
        synthetic=synth,
        direction=synth.slots["direction"],
    )
    if labels.qtype == PREDICTION:
        trace.world = s_span(labels.world)
        trace.world_dist = one_hot(labels.world, len(stokens))
        trace.value = labels.value
        trace.value_dist = pair01(labels.value == UP)
    else:
        trace.world1 = s_span(labels.world1)
        trace.world2 = s_span(labels.world2)
        trace.world1_dist = one_hot(labels.world1, len(stokens))
        trace.world2_dist = one_hot(labels.world2, len(stokens))
        trace.comparison = labels.comparison
        trace.comparison_dist = pair01(labels.comparison == GREATER)
    return trace


def synth_from_labels(instance: Instance, labels) -> SyntheticText | None:
    """Synthetic text from gold labels (teacher forcing); None when the
    required labels are missing."""
    if labels.qtype is None or labels.polarity is None or labels.effect is None:
        return None
    ktokens = tokenize(instance.knowledge)
    stext = instance.statement()
    stokens = tokenize(stext)
    effect = detokenize(instance.knowledge, ktokens, labels.effect.start, labels.effect.end)
    if labels.qtype == PREDICTION:
        if labels.world is None or labels.value is None:
            return None
        world = detokenize(stext, stokens, labels.world.start, labels.world.end)
        direction = deduce_prediction(labels.polarity, labels.value)
        return synthesize_text(PREDICTION, {"world": world, "effect": effect}, direction)
    if labels.world1 is None or labels.world2 is None or labels.comparison is None:
        return None
    world1 = detokenize(stext, stokens, labels.world1.start, labels.world1.end)
    world2 = detokenize(stext, stokens, labels.world2.start, labels.world2.end)
    direction = deduce_comparison(labels.polarity, labels.comparison)
    return synthesize_text(COMPARISON, {"world1": world1, "world2": world2, "effect": effect}, direction)


def trace_record(trace: ReasoningTrace, chosen_answer: int | None = None, correct: bool | None = None) -> dict:
    record = {
        "id": trace.instance_id,
        "type": trace.qtype,
        "cause": trace.cause.text,
        "effect": trace.effect.text,
        "polarity": trace.polarity,
        "synthetic_text": trace.synthetic.text,
    }
    if trace.qtype == PREDICTION:
        record["world"] = trace.world.text if trace.world else ""
        record["value"] = trace.value or ""
    else:
        record["world1"] = trace.world1.text if trace.world1 else ""
        record["world2"] = trace.world2.text if trace.world2 else ""
        record["comparison"] = trace.comparison or ""
    if chosen_answer is not None:
        record["chosen_answer"] = int(chosen_answer)
    if correct is not None:
        record["correct"] = bool(correct)
    return record


def format_trace_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True)


def parse_trace_record(line: str) -> dict:
    return json.loads(line)
