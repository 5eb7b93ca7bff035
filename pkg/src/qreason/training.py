"""Training loops for the reasoning model and the answer model.

Both loops are single-threaded and fully seeded: identical configs and data
produce bit-identical metric logs and checkpoints. The reasoning loop
minimizes the masked multi-task loss and keeps the parameters with the best
dev average module metric; the answer loop minimizes per-option binary cross
entropy on gold synthetic texts (teacher forcing) by default.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import engine as en
from .data import Dataset
from .deduction import TEMPLATE_GLUE, run_chain, synth_from_labels
from .encoder import EncoderConfig, encode
from .engine import OptimState, adam_step, backward, find_nonfinite, zero_grad
from .heads import ALL_HEADS, run_all_heads
from .losses import ClampCounter, LossWeights, answer_loss_pair, gold_targets, reason_loss
from .metrics import module_eval
from .model import Model, init_answer_model, init_reasoning_model
from .answering import assemble_answer_input, score_option
from .text import assemble_pair, build_vocab, tokenize


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 20
    grad_accum: int = 1
    seed: int = 0
    threshold: float = 0.15
    min_count: int = 1
    weights: LossWeights = field(default_factory=LossWeights)
    disabled_heads: tuple = ()
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size <= 0 or self.epochs <= 0 or self.grad_accum <= 0:
            raise ValueError("lr, batch_size, epochs, and grad_accum must be positive")
        unknown = set(self.disabled_heads) - set(ALL_HEADS)
        if unknown:
            raise ValueError(f"unknown heads in disabled_heads: {sorted(unknown)}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["disabled_heads"] = list(self.disabled_heads)
        return out


@dataclass
class AnswerTrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    grad_accum: int = 1
    seed: int = 0
    min_count: int = 1
    text_source: str = "gold"  # gold | model | knowledge
    threshold: float = 0.15
    encoder: EncoderConfig = field(default_factory=lambda: EncoderConfig(n_max=32, m_max=64))

    def __post_init__(self):
        if self.text_source not in ("gold", "model", "knowledge"):
            raise ValueError(f"unknown text_source {self.text_source!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _vocab_corpus(dataset: Dataset) -> list[str]:
    texts = [TEMPLATE_GLUE, "A ) B ) ;"]
    for instance, _ in dataset:
        texts.append(instance.knowledge)
        texts.append(instance.statement())
    return texts


def _amount(t) -> np.ndarray:
    return t.grad if t.grad is not None else np.zeros_like(t.value)


def write_metric_log(path, records: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _check_finite(loss, where: str) -> None:
    if not np.all(np.isfinite(loss.value)):
        op = find_nonfinite(loss)
        raise RuntimeError(f"non-finite loss at {where} (first offending op: '{op}')")


def train_reasoning(train: Dataset, dev: Dataset | None, config: TrainConfig):
    """Returns (model, metric log records). The returned model carries the
    parameters of the best dev epoch (last epoch when dev is None)."""
    if not len(train):
        raise ValueError("training dataset is empty")
    vocab = build_vocab(_vocab_corpus(train), config.min_count)
    model = init_reasoning_model(config.encoder, vocab, config.seed)
    cfg = config.encoder

    prepared = []
    dropped_spans = 0
    for instance, labels in train:
        assembled = assemble_pair(
            tokenize(instance.knowledge), tokenize(instance.statement()), vocab, cfg.n_max, cfg.m_max
        )
        gamma = labels.gamma()
        for head in config.disabled_heads:
            gamma[head] = False
        for head, span, limit in (
            ("cause", labels.cause, cfg.n_max), ("effect", labels.effect, cfg.n_max),
            ("world", labels.world, cfg.m_max), ("world1", labels.world1, cfg.m_max),
            ("world2", labels.world2, cfg.m_max),
        ):
            if span is not None and span.end >= limit:
                gamma[head] = False  # truncated away
                dropped_spans += 1
        targets = gold_targets(labels, cfg.n_max, cfg.m_max)
        needed = frozenset(h for h in ALL_HEADS if gamma[h])
        prepared.append((assembled, targets, gamma, needed))

    order_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    optim = OptimState(lr=config.lr)
    records: list[dict] = []
    best = (-1.0, None)

    for epoch in range(config.epochs):
        order = order_rng.permutation(len(prepared))
        counter = ClampCounter()
        epoch_loss = 0.0
        zero_grad(model.params.values())
        pending = 0
        micro = config.batch_size * config.grad_accum
        for pos, idx in enumerate(order):
            assembled, targets, gamma, needed = prepared[idx]
            pair = encode(model.params, cfg, assembled)
            outputs = run_all_heads(pair, model.params, only=needed)
            loss = reason_loss(outputs, targets, gamma, config.weights, counter)
            epoch_loss += float(loss.value)
            backward(en.scale(loss, 1.0 / micro))
            pending += 1
            if pending == micro or pos == len(order) - 1:
                _check_finite(loss, f"epoch {epoch}, instance {int(idx)}")
                grads = {k: _amount(t) for k, t in model.params.items()}
                adam_step(model.params, grads, optim)
                zero_grad(model.params.values())
                pending = 0

        record = {
            "epoch": epoch,
            "split": "train",
            "loss": epoch_loss / len(prepared),
            "clamp_warnings": counter.count,
            "dropped_truncated_spans": dropped_spans,
        }
        if dev is not None:
            report = module_eval(model, dev, config.threshold)
            record.update({f"dev_{k}": v for k, v in report.flat().items()})
            avg = report.average_metric()
            record["dev_average"] = avg
            if avg > best[0]:
                best = (avg, model.copy_values())
        records.append(record)

    if best[1] is not None:
        model.load_values(best[1])
    return model, records


def _answer_text(instance, labels, source: str, reasoning_model, tau: float) -> str | None:
    if source == "knowledge":
        return instance.knowledge
    if source == "model":
        return run_chain(instance, reasoning_model, tau).synthetic.text
    synth = synth_from_labels(instance, labels)
    return synth.text if synth is not None else None


def train_answerer(
    train: Dataset,
    dev: Dataset | None,
    config: AnswerTrainConfig,
    reasoning_model: Model | None = None,
):
    """Returns (model, metric log records); scores each option independently
    against the instance's text (binary cross entropy per option)."""
    if not len(train):
        raise ValueError("training dataset is empty")
    if config.text_source == "model" and reasoning_model is None:
        raise ValueError("text_source='model' requires a trained reasoning model")

    texts = []
    skipped = 0
    for instance, labels in train:
        text = _answer_text(instance, labels, config.text_source, reasoning_model, config.threshold)
        if text is None:
            skipped += 1
        texts.append(text)

    corpus = [t for t in texts if t is not None] + _vocab_corpus(train)
    vocab = build_vocab(corpus, config.min_count)
    model = init_answer_model(config.encoder, vocab, config.seed)
    cfg = config.encoder

    prepared = []
    for (instance, labels), text in zip(train, texts):
        if text is None:
            continue
        assembled = tuple(
            assemble_answer_input(text, instance.question, opt, vocab, cfg.n_max, cfg.m_max)
            for opt in instance.options
        )
        prepared.append((assembled, labels.answer))
    if not prepared:
        raise ValueError("no trainable instances (all synthetic texts unavailable)")

    dev_texts = []
    if dev is not None:
        for instance, labels in dev:
            dev_texts.append(_answer_text(instance, labels, config.text_source, reasoning_model, config.threshold))

    order_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    optim = OptimState(lr=config.lr)
    records: list[dict] = []
    best = (-1.0, None)

    for epoch in range(config.epochs):
        order = order_rng.permutation(len(prepared))
        counter = ClampCounter()
        epoch_loss = 0.0
        zero_grad(model.params.values())
        pending = 0
        micro = config.batch_size * config.grad_accum
        for pos, idx in enumerate(order):
            assembled, gold = prepared[idx]
            p0 = score_option(assembled[0], model)
            p1 = score_option(assembled[1], model)
            loss = answer_loss_pair(p0, p1, gold, counter)
            epoch_loss += float(loss.value)
            backward(en.scale(loss, 1.0 / micro))
            pending += 1
            if pending == micro or pos == len(order) - 1:
                _check_finite(loss, f"epoch {epoch}, instance {int(idx)}")
                grads = {k: _amount(t) for k, t in model.params.items()}
                adam_step(model.params, grads, optim)
                zero_grad(model.params.values())
                pending = 0

        record = {
            "epoch": epoch,
            "split": "train",
            "loss": epoch_loss / len(prepared),
            "clamp_warnings": counter.count,
            "skipped_instances": skipped,
        }
        if dev is not None:
            correct = scored = 0
            for (instance, labels), text in zip(dev, dev_texts):
                if text is None:
                    continue
                scores = []
                for opt in instance.options:
                    a = assemble_answer_input(text, instance.question, opt, vocab, cfg.n_max, cfg.m_max)
                    scores.append(float(score_option(a, model).value))
                pred = 0 if scores[0] >= scores[1] else 1
                correct += int(pred == labels.answer)
                scored += 1
            acc = correct / scored if scored else 0.0
            record["dev_accuracy"] = acc
            if acc > best[0]:
                best = (acc, model.copy_values())
        records.append(record)

    if best[1] is not None:
        model.load_values(best[1])
    return model, records
