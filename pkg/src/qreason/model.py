"""Model bundles: encoder config + vocabulary + parameters, with directory
save/load (params.qrck, vocab.txt, config.json)."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_params, save_params
from .encoder import EncoderConfig, init_encoder_params
from .engine import Tensor
from .heads import init_head_params
from .text import Vocab
from . import engine as en

REASONING = "reasoning"
ANSWERER = "answerer"


@dataclass
class Model:
    kind: str
    cfg: EncoderConfig
    vocab: Vocab
    params: dict[str, Tensor]

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {k: t.value for k, t in self.params.items()}

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: t.value.copy() for k, t in self.params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for k, t in self.params.items():
            t.value[...] = values[k]


def init_reasoning_model(cfg: EncoderConfig, vocab: Vocab, seed: int, dtype=np.float32) -> Model:
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    params = init_encoder_params(cfg, len(vocab), rng, dtype)
    params.update(init_head_params(cfg.d, rng, dtype))
    return Model(kind=REASONING, cfg=cfg, vocab=vocab, params=params)


def init_answer_model(cfg: EncoderConfig, vocab: Vocab, seed: int, dtype=np.float32) -> Model:
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    params = init_encoder_params(cfg, len(vocab), rng, dtype)
    d = cfg.d
    params["score.w"] = en.parameter((rng.uniform(-1, 1, size=d) / np.sqrt(d)).astype(dtype), "score.w")
    params["score.b"] = en.parameter(np.zeros((), dtype=dtype), "score.b")
    return Model(kind=ANSWERER, cfg=cfg, vocab=vocab, params=params)


def save_model(out_dir, model: Model) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_params(out / "params.qrck", model.params)
    model.vocab.save(out / "vocab.txt")
    cfg = {"kind": model.kind, **model.cfg.to_dict()}
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def load_model(model_dir) -> Model:
    path = Path(model_dir)
    cfg_raw = json.loads((path / "config.json").read_text())
    kind = cfg_raw.pop("kind")
    cfg = EncoderConfig(**cfg_raw)
    vocab = Vocab.load(path / "vocab.txt")
    params = load_params(path / "params.qrck")
    return Model(kind=kind, cfg=cfg, vocab=vocab, params=params)
