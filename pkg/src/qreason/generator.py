"""Seeded synthetic qualitative-QA corpus with complete supervision.

Instances are built from templated knowledge sentences (a correlation
between a cause and an effect property, optionally joined by a second,
opposite-polarity distractor relation) and templated questions: prediction
questions change one world's cause property, comparison questions grade two
worlds against each other. Property pairs are disjoint across splits while
individual property words recur, so held-out evaluation tests reading the
stated relation rather than memorizing the pair.

Gold answers are computed from the deduction truth tables; every instance
carries the annotation record plus exact character offsets for its spans.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import COMPARISON, GREATER, Instance, NEGATIVE, POSITIVE, PREDICTION, SMALLER, UP, DOWN
from .deduction import LESS, MORE, deduce_comparison, deduce_prediction


def S(name: str):
    return ("slot", name)


def G(name: str, *subparts):
    return ("group", name, subparts)


def render(parts, values: dict) -> tuple[str, dict]:
    """Join template parts, recording character spans for slots and groups."""
    out: list[str] = []
    pos = 0
    spans: dict[str, tuple[int, int]] = {}

    def emit(s: str):
        nonlocal pos
        out.append(s)
        pos += len(s)

    for el in parts:
        if isinstance(el, str):
            emit(el)
        elif el[0] == "slot":
            value = values[el[1]]
            spans.setdefault(el[1], (pos, pos + len(value)))
            emit(value)
        else:
            start = pos
            for sub in el[2]:
                if isinstance(sub, str):
                    emit(sub)
                else:
                    value = values[sub[1]]
                    spans.setdefault(sub[1], (pos, pos + len(value)))
                    emit(value)
            spans[el[1]] = (start, pos)
    return "".join(out), spans


KNOWLEDGE_TEMPLATES = (
    (("The greater the ", S("c"), ", the greater the ", S("e"), "."), POSITIVE),
    (("The greater the ", S("c"), ", the smaller the ", S("e"), "."), NEGATIVE),
    (("The ", S("e"), " increases when the ", S("c"), " increases."), POSITIVE),
    (("The ", S("e"), " goes down as the ", S("c"), " goes up."), NEGATIVE),
    (("More ", S("c"), " means more ", S("e"), "."), POSITIVE),
    (("More ", S("c"), " leads to less ", S("e"), "."), NEGATIVE),
    (("As the ", S("c"), " rises, the ", S("e"), " rises as well."), POSITIVE),
    (("When the ", S("c"), " drops, the ", S("e"), " climbs."), NEGATIVE),
    (("Higher ", S("c"), " produces higher ", S("e"), "."), POSITIVE),
    (("A lower ", S("c"), " results in a higher ", S("e"), "."), NEGATIVE),
)


@dataclass(frozen=True)
class PredictionTemplate:
    parts: tuple
    dir_words: tuple[str, str]  # surface forms for value up / down
    opt_more: str
    opt_less: str


PREDICTION_TEMPLATES = (
    PredictionTemplate(
        parts=("As the ", G("w", S("c"), " ", S("dir")), ", the ", S("e")),
        dir_words=("increases", "decreases"),
        opt_more="increases", opt_less="decreases",
    ),
    PredictionTemplate(
        parts=("Suppose the ", G("w", S("c"), " ", S("dir")), " over time. What happens to the ", S("e"), "?"),
        dir_words=("rises", "falls"),
        opt_more="it goes up", opt_less="it goes down",
    ),
    PredictionTemplate(
        parts=(S("name"), " notices ", G("w", S("dir"), " ", S("c")), " in the system. The ", S("e"), " will be"),
        dir_words=("more", "less"),
        opt_more="higher", opt_less="lower",
    ),
    PredictionTemplate(
        parts=("If we ", G("w", S("dir"), " the ", S("c")), ", the ", S("e"), " should"),
        dir_words=("raise", "reduce"),
        opt_more="increase", opt_less="decrease",
    ),
)


@dataclass(frozen=True)
class ComparisonTemplate:
    parts: tuple
    opt_more: str
    opt_less: str
    ask: str  # "w1", "w2", or "which"
    distinct_nouns: bool = False


COMPARISON_TEMPLATES = (
    ComparisonTemplate(
        parts=("Compared to a ", G("w1", S("adj1"), " ", S("c"), " ", S("noun1")),
               ", a ", G("w2", S("adj2"), " ", S("c"), " ", S("noun2")), " will produce"),
        opt_more="more {e}", opt_less="less {e}", ask="w2",
    ),
    ComparisonTemplate(
        parts=("A ", G("w1", S("adj1"), " ", S("c"), " ", S("noun1")),
               " sits next to a ", G("w2", S("adj2"), " ", S("c"), " ", S("noun2")),
               ". The ", S("noun1")),
        opt_more="gives more {e}", opt_less="gives less {e}", ask="w1", distinct_nouns=True,
    ),
)


@dataclass(frozen=True)
class Lexicon:
    cause_props: tuple[str, ...]
    effect_props: tuple[str, ...]
    nouns: tuple[str, ...]
    grade_pairs: tuple[tuple[str, str], ...]  # (low, high)
    names: tuple[str, ...]

    def pair_splits(self) -> dict[str, list[tuple[str, str]]]:
        """Disjoint (cause, effect) pairs per split; every property word
        also occurs in some training pair."""
        n = len(self.cause_props)
        if n != len(self.effect_props):
            raise ValueError("cause and effect property lists must have equal length")
        if n < 4:
            raise ValueError(f"lexicon too small for disjoint train/dev/test splits (need >= 4 properties, got {n})")
        train = [(self.cause_props[i], self.effect_props[(i + k) % n]) for k in (0, 1) for i in range(n)]
        held = [(self.cause_props[i], self.effect_props[(i + 2) % n]) for i in range(n)]
        half = n // 2
        return {"train": train, "dev": held[:half], "test": held[half:]}


BUILTIN_LEXICON = Lexicon(
    cause_props=(
        "mass", "speed", "temperature", "pressure", "friction", "light collecting area",
        "surface area", "humidity", "altitude", "density", "voltage", "rainfall",
        "wind speed", "exercise intensity",
    ),
    effect_props=(
        "gravitational pull", "kinetic energy", "evaporation rate", "boiling point",
        "heat output", "light gathered", "air resistance", "rust formation",
        "crop yield", "noise level", "erosion", "stopping distance",
        "current flow", "muscle growth",
    ),
    nouns=("planet", "engine", "oven", "telescope", "river", "road", "magnet",
           "battery", "greenhouse", "rocket", "turbine", "reactor"),
    grade_pairs=(("low", "high"), ("small", "large"), ("tiny", "huge"),
                 ("reduced", "elevated"), ("weak", "strong"), ("minimal", "extreme")),
    names=("Alex", "Jordan", "Sam", "Taylor", "Morgan", "Riley", "Casey", "Jamie"),
)


# single-word properties: crisper span supervision, used by the
# span-supervision ablation experiment
SIMPLE_LEXICON = Lexicon(
    cause_props=("mass", "speed", "heat", "light", "salt", "wind", "rain",
                 "dust", "depth", "width", "force", "charge", "size", "strain"),
    effect_props=("pull", "energy", "glare", "rust", "yield", "echo", "drift",
                  "flow", "growth", "wear", "spark", "lift", "drag", "hum"),
    nouns=("planet", "engine", "oven", "telescope", "river", "road", "magnet", "battery"),
    grade_pairs=(("low", "high"), ("small", "large"), ("tiny", "huge"), ("weak", "strong")),
    names=("Alex", "Jordan", "Sam", "Taylor"),
)


def load_lexicon(path) -> Lexicon:
    raw = json.loads(Path(path).read_text())
    return Lexicon(
        cause_props=tuple(raw["cause_props"]),
        effect_props=tuple(raw["effect_props"]),
        nouns=tuple(raw["nouns"]),
        grade_pairs=tuple(tuple(p) for p in raw["grade_pairs"]),
        names=tuple(raw.get("names", BUILTIN_LEXICON.names)),
    )


@dataclass
class GenConfig:
    n_train: int = 2000
    n_dev: int = 400
    n_test: int = 400
    ratio: float = 2296 / 400  # prediction : comparison
    seed: int = 0
    two_relation_fraction: float = 0.05
    lexicon_path: str | None = None
    prediction_template_weights: tuple | None = None
    comparison_template_weights: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "n_train": self.n_train, "n_dev": self.n_dev, "n_test": self.n_test,
            "ratio": self.ratio, "seed": self.seed,
            "two_relation_fraction": self.two_relation_fraction,
            "lexicon_path": self.lexicon_path,
            "prediction_template_weights": list(self.prediction_template_weights) if self.prediction_template_weights else None,
            "comparison_template_weights": list(self.comparison_template_weights) if self.comparison_template_weights else None,
        }


def _weights(raw, count) -> np.ndarray:
    if raw is None:
        return np.full(count, 1.0 / count)
    w = np.asarray(raw, dtype=float)
    if w.shape != (count,) or w.sum() <= 0 or (w < 0).any():
        raise ValueError(f"template weights must be {count} nonnegative numbers")
    return w / w.sum()


def _make_knowledge(rng, pair, pool, two_relation: bool):
    """Knowledge text plus cause/effect offsets; optionally a second sentence
    stating an opposite-polarity relation between two other properties."""
    c, e = pair
    idx = int(rng.integers(len(KNOWLEDGE_TEMPLATES)))
    parts, polarity = KNOWLEDGE_TEMPLATES[idx]
    text, spans = render(parts, {"c": c, "e": e})
    if not two_relation:
        return text, polarity, spans["c"], spans["e"]

    other = [p for p in pool if p[0] != c and p[1] != e]
    c2, e2 = other[int(rng.integers(len(other)))] if other else (c, e)
    opposite = [t for t in KNOWLEDGE_TEMPLATES if t[1] != polarity]
    dparts, _ = opposite[int(rng.integers(len(opposite)))]
    dtext, _ = render(dparts, {"c": c2, "e": e2})
    if rng.integers(2) == 0:
        full = text + " " + dtext
        c_span, e_span = spans["c"], spans["e"]
    else:
        offset = len(dtext) + 1
        full = dtext + " " + text
        c_span = (spans["c"][0] + offset, spans["c"][1] + offset)
        e_span = (spans["e"][0] + offset, spans["e"][1] + offset)
    return full, polarity, c_span, e_span


def _shuffle_options(rng, more_text: str, less_text: str, more_is_answer: bool):
    options = [more_text, less_text]
    answer = 0 if more_is_answer else 1
    if rng.integers(2) == 1:
        options.reverse()
        answer = 1 - answer
    return (options[0], options[1]), answer


def _prediction_instance(rng, ident, pair, pool, lex: Lexicon, cfg: GenConfig, pweights) -> Instance:
    c, e = pair
    knowledge, polarity, c_span, e_span = _make_knowledge(
        rng, pair, pool, rng.random() < cfg.two_relation_fraction)
    tmpl: PredictionTemplate = PREDICTION_TEMPLATES[int(rng.choice(len(PREDICTION_TEMPLATES), p=pweights))]
    value = UP if rng.integers(2) == 0 else DOWN
    values = {
        "c": c, "e": e,
        "dir": tmpl.dir_words[0 if value == UP else 1],
        "name": lex.names[int(rng.integers(len(lex.names)))],
    }
    question, spans = render(tmpl.parts, values)
    direction = deduce_prediction(polarity, value)
    options, answer = _shuffle_options(rng, tmpl.opt_more, tmpl.opt_less, direction == MORE)
    world_text = question[spans["w"][0]:spans["w"][1]]
    return Instance(
        id=ident,
        knowledge=knowledge,
        question=question,
        options=options,
        answer=answer,
        annotation={
            "para_anno": {
                "cause_prop": c, "effect_prop": e,
                "cause_dir_sign": POSITIVE,
                "effect_dir_sign": POSITIVE if polarity == POSITIVE else NEGATIVE,
            },
            "question_anno": {"world": world_text, "value": value},
            "span_offsets": {
                "cause": list(c_span), "effect": list(e_span), "world": list(spans["w"]),
            },
        },
    )


def _comparison_instance(rng, ident, pair, pool, lex: Lexicon, cfg: GenConfig, cweights) -> Instance:
    c, e = pair
    knowledge, polarity, c_span, e_span = _make_knowledge(
        rng, pair, pool, rng.random() < cfg.two_relation_fraction)
    tmpl: ComparisonTemplate = COMPARISON_TEMPLATES[int(rng.choice(len(COMPARISON_TEMPLATES), p=cweights))]
    lo, hi = lex.grade_pairs[int(rng.integers(len(lex.grade_pairs)))]
    w1_is_high = rng.integers(2) == 1
    com = GREATER if w1_is_high else SMALLER
    noun1 = lex.nouns[int(rng.integers(len(lex.nouns)))]
    if tmpl.distinct_nouns:
        rest = [x for x in lex.nouns if x != noun1]
        noun2 = rest[int(rng.integers(len(rest)))]
    else:
        noun2 = lex.nouns[int(rng.integers(len(lex.nouns)))]
    values = {
        "c": c, "e": e,
        "adj1": hi if w1_is_high else lo,
        "adj2": lo if w1_is_high else hi,
        "noun1": noun1, "noun2": noun2,
    }
    question, spans = render(tmpl.parts, values)
    w1_text = question[spans["w1"][0]:spans["w1"][1]]
    w2_text = question[spans["w2"][0]:spans["w2"][1]]
    direction_w1 = deduce_comparison(polarity, com)

    opt_more = tmpl.opt_more.format(**values)
    opt_less = tmpl.opt_less.format(**values)
    if tmpl.ask == "w1":
        more_is_answer = direction_w1 == MORE
    else:  # asks about the second-mentioned world
        more_is_answer = direction_w1 == LESS
    options, answer = _shuffle_options(rng, opt_more, opt_less, more_is_answer)
    more_world = w1_text if direction_w1 == MORE else w2_text
    less_world = w2_text if direction_w1 == MORE else w1_text
    return Instance(
        id=ident,
        knowledge=knowledge,
        question=question,
        options=options,
        answer=answer,
        annotation={
            "para_anno": {
                "cause_prop": c, "effect_prop": e,
                "cause_dir_sign": POSITIVE,
                "effect_dir_sign": POSITIVE if polarity == POSITIVE else NEGATIVE,
            },
            "question_anno": {
                "world1": w1_text, "world2": w2_text,
                "more_effect": more_world, "less_effect": less_world,
            },
            "span_offsets": {
                "cause": list(c_span), "effect": list(e_span),
                "world1": list(spans["w1"]), "world2": list(spans["w2"]),
            },
        },
    )


def generate_split(split: str, count: int, lex: Lexicon, cfg: GenConfig, seed_seq) -> list[Instance]:
    pairs = lex.pair_splits()[split]
    if count > 0 and not pairs:
        raise ValueError(f"lexicon provides no property pairs for split {split!r}")
    rng = np.random.default_rng(seed_seq)
    n_comp = int(round(count / (1.0 + cfg.ratio)))
    kinds = [COMPARISON] * n_comp + [PREDICTION] * (count - n_comp)
    rng.shuffle(kinds)
    pweights = _weights(cfg.prediction_template_weights, len(PREDICTION_TEMPLATES))
    cweights = _weights(cfg.comparison_template_weights, len(COMPARISON_TEMPLATES))
    instances = []
    for i, kind in enumerate(kinds):
        ident = f"SYN-{split.upper()}-{i:05d}"
        pair = pairs[int(rng.integers(len(pairs)))]
        if kind == PREDICTION:
            instances.append(_prediction_instance(rng, ident, pair, pairs, lex, cfg, pweights))
        else:
            instances.append(_comparison_instance(rng, ident, pair, pairs, lex, cfg, cweights))
    return instances


def generate_synthetic_corpus(cfg: GenConfig, lexicon: Lexicon | None = None) -> dict[str, list[Instance]]:
    for name in ("n_train", "n_dev", "n_test"):
        if getattr(cfg, name) <= 0:
            raise ValueError(f"{name} must be positive")
    lex = lexicon if lexicon is not None else (
        load_lexicon(cfg.lexicon_path) if cfg.lexicon_path else BUILTIN_LEXICON)
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(3)
    return {
        "train": generate_split("train", cfg.n_train, lex, cfg, children[0]),
        "dev": generate_split("dev", cfg.n_dev, lex, cfg, children[1]),
        "test": generate_split("test", cfg.n_test, lex, cfg, children[2]),
    }
