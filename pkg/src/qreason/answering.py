"""Answer prediction: score each option against the synthetic text.

The answerer reuses the encoder architecture with its own parameters. Input
layout per option: <s> synthetic-text </s> </s> question ; option </s>, with
";" as a regular vocabulary token. The position-0 hidden vector feeds a
linear head squashed through a logistic."""
from __future__ import annotations

from dataclasses import dataclass

from . import engine as en
from .data import Instance
from .encoder import encode_tokens
from .engine import Tensor
from .model import Model
from .text import Assembled, Vocab, assemble_pair, tokenize


@dataclass
class AnswerPrediction:
    index: int
    scores: tuple[float, float]
    tie: bool


def assemble_answer_input(synthetic_text: str, question: str, option: str, vocab: Vocab, n_max: int, m_max: int) -> Assembled:
    if not question.strip() or not option.strip():
        raise ValueError("question and option must be nonempty")
    qa_tokens = tokenize(f"{question} ; {option}")
    return assemble_pair(tokenize(synthetic_text), qa_tokens, vocab, n_max, m_max)


def score_option(assembled: Assembled, model: Model) -> Tensor:
    """Probability (0-d tensor) that this option is the answer."""
    if "score.w" not in model.params:
        raise ValueError("model has no answer scoring head")
    h = encode_tokens(model.params, model.cfg, assembled.ids[: assembled.real_len])
    z = en.add(en.matmul(en.row(h, 0), model.params["score.w"]), model.params["score.b"])
    return en.sigmoid(z)


def score_options(instance: Instance, synthetic_text: str, model: Model) -> tuple[float, float]:
    scores = []
    for option in instance.options:
        assembled = assemble_answer_input(synthetic_text, instance.question, option, model.vocab, model.cfg.n_max, model.cfg.m_max)
        scores.append(float(score_option(assembled, model).value))
    return scores[0], scores[1]


def predict_answer(instance: Instance, synthetic_text: str, model: Model) -> AnswerPrediction:
    """Argmax over the two option scores; exact ties go to option 0."""
    s0, s1 = score_options(instance, synthetic_text, model)
    tie = s0 == s1
    return AnswerPrediction(index=0 if s0 >= s1 else 1, scores=(s0, s1), tie=tie)
