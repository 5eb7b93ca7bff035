"""Tokenization, vocabulary, and joint input assembly.

Word-level tokenization: lowercased, punctuation split off, each token
keeping its source character span so extracted spans can be detokenized back
to the original surface string.
"""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

BOS_TOKEN = "<s>"
SEP_TOKEN = "</s>"
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
RESERVED = (BOS_TOKEN, SEP_TOKEN, PAD_TOKEN, UNK_TOKEN)


class Token(NamedTuple):
    text: str  # lowercased surface form
    start: int  # character offsets into the source text
    end: int


def tokenize(text: str) -> list[Token]:
    return [Token(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def detokenize(text: str, tokens: list[Token], start: int, end: int) -> str:
    """Original substring covered by tokens[start..end] (inclusive)."""
    if not (0 <= start <= end < len(tokens)):
        raise ValueError(f"token span [{start}, {end}] out of range for {len(tokens)} tokens")
    return text[tokens[start].start : tokens[end].end]


@dataclass(frozen=True)
class Vocab:
    itos: tuple[str, ...]
    stoi: dict

    BOS = 0
    SEP = 1
    PAD = 2
    UNK = 3

    def __len__(self):
        return len(self.itos)

    def id(self, token: str) -> int:
        return self.stoi.get(token, self.UNK)

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.itos) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(lines[:4]) != RESERVED:
            raise ValueError(f"{path}: reserved tokens missing or out of order")
        return cls.from_tokens(lines[4:])

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Vocab":
        itos = RESERVED + tuple(tokens)
        stoi = {t: i for i, t in enumerate(itos)}
        if len(stoi) != len(itos):
            raise ValueError("duplicate tokens in vocabulary")
        return cls(itos=itos, stoi=stoi)


def build_vocab(corpus: Iterable[str], min_count: int = 1) -> Vocab:
    """Ids are dense from 0, reserved tokens first, then frequency order
    (ties broken alphabetically) over tokens with count >= min_count."""
    counts: Counter = Counter()
    n_texts = 0
    for text in corpus:
        n_texts += 1
        counts.update(t.text for t in tokenize(text))
    if n_texts == 0:
        raise ValueError("build_vocab requires a nonempty corpus")
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocab.from_tokens(kept)


@dataclass
class Assembled:
    """<s> b_1..b_n </s> </s> s_1..s_m </s>, padded to n_max + m_max + 4."""

    ids: np.ndarray  # int64, fixed total length
    n: int
    m: int
    real_len: int  # 4 + n + m
    knowledge_mask: np.ndarray  # bool (n_max,)
    statement_mask: np.ndarray  # bool (m_max,)
    knowledge_start: int  # joint position of b_1
    statement_start: int  # joint position of s_1
    truncated_knowledge: bool
    truncated_statement: bool


def assemble_pair(
    knowledge_tokens: list[Token],
    statement_tokens: list[Token],
    vocab: Vocab,
    n_max: int,
    m_max: int,
) -> Assembled:
    b_budget = n_max - 2
    s_budget = m_max - 1
    trunc_b = len(knowledge_tokens) > b_budget
    trunc_s = len(statement_tokens) > s_budget
    b = knowledge_tokens[:b_budget]
    s = statement_tokens[:s_budget]
    n, m = len(b), len(s)
    total = n_max + m_max + 4
    ids = np.full(total, Vocab.PAD, dtype=np.int64)
    ids[0] = Vocab.BOS
    ids[1 : 1 + n] = [vocab.id(t.text) for t in b]
    ids[1 + n] = Vocab.SEP
    ids[2 + n] = Vocab.SEP
    ids[3 + n : 3 + n + m] = [vocab.id(t.text) for t in s]
    ids[3 + n + m] = Vocab.SEP
    kmask = np.zeros(n_max, dtype=bool)
    kmask[:n] = True
    smask = np.zeros(m_max, dtype=bool)
    smask[:m] = True
    return Assembled(
        ids=ids,
        n=n,
        m=m,
        real_len=4 + n + m,
        knowledge_mask=kmask,
        statement_mask=smask,
        knowledge_start=1,
        statement_start=3 + n,
        truncated_knowledge=trunc_b,
        truncated_statement=trunc_s,
    )
