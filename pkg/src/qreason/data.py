"""Dataset records, annotation-derived supervision, and JSONL ingestion.

One instance per line. Field names (see docs/data_format.md):

    id, para, question, options (two strings), answer (0/1 or "A"/"B"),
    para_anno     {cause_prop, effect_prop, cause_dir_sign, effect_dir_sign},
    question_anno {world, value} or {world1, world2, more_effect, less_effect},
    span_offsets  optional character offsets for gold spans.

Unknown fields are preserved on the instance and otherwise ignored. Labels
that cannot be derived or aligned stay absent; their availability flags
(gamma) mask them out of the training loss.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .text import Token, tokenize

POSITIVE, NEGATIVE = "+", "-"
UP, DOWN = "up", "down"
GREATER, SMALLER = ">", "<"
PREDICTION, COMPARISON = "prediction", "comparison"

KNOWN_FIELDS = ("id", "para", "question", "options", "answer", "para_anno", "question_anno", "span_offsets")

# keyword anchors used to disambiguate repeated annotation substrings
CORRELATION_KEYWORDS = (
    "greater", "smaller", "more", "less", "higher", "lower", "larger",
    "increase", "increases", "increasing", "decrease", "decreases", "decreasing",
    "rises", "falls", "drops", "climbs", "grows", "shrinks", "raise", "reduce",
)


@dataclass
class Instance:
    id: str
    knowledge: str
    question: str
    options: tuple[str, str]
    answer: int
    annotation: dict | None = None
    raw: dict = field(default_factory=dict)

    def statement(self) -> str:
        """Question concatenated with both options, as encoded."""
        return f"{self.question} A) {self.options[0]} B) {self.options[1]}"


@dataclass(frozen=True)
class SpanLabel:
    """Inclusive token span within its segment's token sequence."""

    start: int
    end: int

    def positions(self) -> frozenset[int]:
        return frozenset(range(self.start, self.end + 1))


@dataclass
class Labels:
    cause: SpanLabel | None = None
    effect: SpanLabel | None = None
    world: SpanLabel | None = None
    world1: SpanLabel | None = None
    world2: SpanLabel | None = None
    polarity: str | None = None  # "+" / "-"
    value: str | None = None  # "up" / "down"
    comparison: str | None = None  # ">" / "<" for world1 vs world2 on the cause
    qtype: str | None = None  # "prediction" / "comparison"
    answer: int = 0

    def gamma(self) -> dict[str, bool]:
        return {
            "cause": self.cause is not None,
            "effect": self.effect is not None,
            "world": self.world is not None,
            "world1": self.world1 is not None,
            "world2": self.world2 is not None,
            "polarity": self.polarity is not None,
            "value": self.value is not None,
            "comparison": self.comparison is not None,
            "type": self.qtype is not None,
        }


@dataclass
class Dataset:
    items: list[tuple[Instance, Labels]]
    alignment_warnings: int = 0

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def _norm_sign(sign) -> str | None:
    if sign in (POSITIVE, "positive", "pos", "up", 1):
        return POSITIVE
    if sign in (NEGATIVE, "negative", "neg", "down", -1):
        return NEGATIVE
    return None


def derive_supervision(annotation: dict) -> dict:
    """Partial labels from a raw annotation record.

    Polarity is positive iff the effect direction sign equals the cause
    direction sign. A question annotation carrying both a more-effect and a
    less-effect entry marks the question as comparison type, otherwise
    prediction. Fields that cannot be derived are simply absent.
    """
    out: dict = {}
    para = annotation.get("para_anno") or {}
    qa = annotation.get("question_anno") or {}

    cs = _norm_sign(para.get("cause_dir_sign"))
    es = _norm_sign(para.get("effect_dir_sign"))
    if cs is not None and es is not None:
        out["polarity"] = POSITIVE if cs == es else NEGATIVE
    if para.get("cause_prop"):
        out["cause_text"] = para["cause_prop"]
    if para.get("effect_prop"):
        out["effect_text"] = para["effect_prop"]

    if qa:
        has_more = any(k.startswith("more_effect") and qa[k] for k in qa)
        has_less = any(k.startswith("less_effect") and qa[k] for k in qa)
        out["qtype"] = COMPARISON if (has_more and has_less) else PREDICTION
        if qa.get("world"):
            out["world_text"] = qa["world"]
        if qa.get("value") in (UP, DOWN):
            out["value"] = qa["value"]
        if qa.get("world1"):
            out["world1_text"] = qa["world1"]
        if qa.get("world2"):
            out["world2_text"] = qa["world2"]
        more = next((qa[k] for k in qa if k.startswith("more_effect") and qa[k]), None)
        if more is not None and out.get("world1_text") and out.get("world2_text") and "polarity" in out:
            more_is_w1 = more.strip().lower() == out["world1_text"].strip().lower()
            pos = out["polarity"] == POSITIVE
            out["comparison"] = GREATER if more_is_w1 == pos else SMALLER
    return out


def _keyword_positions(text: str) -> list[int]:
    lowered = text.lower()
    positions = []
    for kw in CORRELATION_KEYWORDS:
        start = 0
        while True:
            i = lowered.find(kw, start)
            if i < 0:
                break
            positions.append(i)
            start = i + 1
    return positions


def align_span(text: str, tokens: list[Token], needle: str) -> SpanLabel | None:
    """Token span of the first exact (case-insensitive) occurrence of needle;
    with several occurrences, the one nearest a correlation keyword wins."""
    needle = needle.strip()
    if not needle:
        return None
    lowered, target = text.lower(), needle.lower()
    occurrences = []
    start = 0
    while True:
        i = lowered.find(target, start)
        if i < 0:
            break
        occurrences.append(i)
        start = i + 1
    if not occurrences:
        return None
    if len(occurrences) > 1:
        anchors = _keyword_positions(text)
        if anchors:
            occurrences.sort(key=lambda i: (min(abs(i - a) for a in anchors), i))
    cs, ce = occurrences[0], occurrences[0] + len(needle)
    covered = [k for k, t in enumerate(tokens) if t.start < ce and t.end > cs]
    if not covered:
        return None
    return SpanLabel(start=covered[0], end=covered[-1])


def _span_from_offsets(tokens: list[Token], offsets) -> SpanLabel | None:
    if not offsets or len(offsets) != 2:
        return None
    cs, ce = int(offsets[0]), int(offsets[1])
    covered = [k for k, t in enumerate(tokens) if t.start < ce and t.end > cs]
    if not covered:
        return None
    return SpanLabel(start=covered[0], end=covered[-1])


def build_labels(instance: Instance) -> tuple[Labels, int]:
    """Labels for one instance; returns (labels, alignment_warning_count)."""
    labels = Labels(answer=instance.answer)
    ann = instance.annotation or {}
    if not ann:
        return labels, 0
    derived = derive_supervision(ann)
    labels.polarity = derived.get("polarity")
    labels.qtype = derived.get("qtype")
    labels.value = derived.get("value")
    labels.comparison = derived.get("comparison")

    ktokens = tokenize(instance.knowledge)
    stext = instance.statement()
    stokens = tokenize(stext)
    offsets = ann.get("span_offsets") or {}
    warnings = 0

    def resolve(name: str, source: str, tokens: list[Token], text_key: str):
        nonlocal warnings
        span = _span_from_offsets(tokens, offsets.get(name))
        if span is None and derived.get(text_key):
            span = align_span(source, tokens, derived[text_key])
            if span is None:
                warnings += 1
        return span

    labels.cause = resolve("cause", instance.knowledge, ktokens, "cause_text")
    labels.effect = resolve("effect", instance.knowledge, ktokens, "effect_text")
    labels.world = resolve("world", stext, stokens, "world_text")
    labels.world1 = resolve("world1", stext, stokens, "world1_text")
    labels.world2 = resolve("world2", stext, stokens, "world2_text")
    return labels, warnings


def _parse_answer(value) -> int:
    if value in (0, 1):
        return int(value)
    if isinstance(value, str) and value.strip().upper() in ("A", "B"):
        return 0 if value.strip().upper() == "A" else 1
    raise ValueError(f"answer must be 0/1 or A/B, got {value!r}")


def parse_record(record: dict) -> Instance:
    missing = [k for k in ("id", "para", "question", "options", "answer") if k not in record]
    if missing:
        raise ValueError(f"missing fields: {missing}")
    options = record["options"]
    if not isinstance(options, (list, tuple)) or len(options) != 2:
        raise ValueError("options must contain exactly two strings")
    annotation = {}
    for key in ("para_anno", "question_anno", "span_offsets"):
        if record.get(key):
            annotation[key] = record[key]
    return Instance(
        id=str(record["id"]),
        knowledge=record["para"],
        question=record["question"],
        options=(str(options[0]), str(options[1])),
        answer=_parse_answer(record["answer"]),
        annotation=annotation or None,
        raw=dict(record),
    )


def load_dataset(path) -> Dataset:
    items = []
    warnings = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                instance = parse_record(record)
            except (json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from exc
            labels, w = build_labels(instance)
            warnings += w
            items.append((instance, labels))
    return Dataset(items=items, alignment_warnings=warnings)


def instance_to_record(instance: Instance) -> dict:
    record = dict(instance.raw)
    record.update(
        id=instance.id,
        para=instance.knowledge,
        question=instance.question,
        options=list(instance.options),
        answer=instance.answer,
    )
    for key in ("para_anno", "question_anno", "span_offsets"):
        value = (instance.annotation or {}).get(key)
        if value:
            record[key] = value
        else:
            record.pop(key, None)
    return record


def save_dataset(path, instances: Iterable[Instance]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for instance in instances:
            fh.write(json.dumps(instance_to_record(instance), sort_keys=True) + "\n")
