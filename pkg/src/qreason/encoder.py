"""Trainable transformer encoder producing contextual representations.

Token embedding + learned positional embedding + N pre-norm blocks
(multi-head self-attention over the joint sequence, ReLU feed-forward) and a
final layer norm. Padding never reaches the attention: the joint sequence is
computed over the real-token prefix only and the segment outputs are
zero-padded back to their fixed shapes, which keeps encodings independent of
the configured maximum lengths.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine as en
from .engine import Tensor
from .text import Assembled


@dataclass(frozen=True)
class EncoderConfig:
    d: int = 64
    layers: int = 2
    heads: int = 4
    ff: int = 256
    n_max: int = 64
    m_max: int = 64

    @property
    def total_len(self) -> int:
        return self.n_max + self.m_max + 4

    @property
    def head_dim(self) -> int:
        if self.d % self.heads:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")
        return self.d // self.heads

    def to_dict(self) -> dict:
        return {"d": self.d, "layers": self.layers, "heads": self.heads, "ff": self.ff,
                "n_max": self.n_max, "m_max": self.m_max}


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_encoder_params(
    cfg: EncoderConfig,
    vocab_size: int,
    rng: np.random.Generator,
    dtype=np.float32,
    prefix: str = "enc",
) -> dict[str, Tensor]:
    d, dk, ff = cfg.d, cfg.head_dim, cfg.ff
    p: dict[str, Tensor] = {}

    def add(name, shape, fan_in):
        p[f"{prefix}.{name}"] = en.parameter(uniform_init(rng, shape, fan_in, dtype), name)

    def add_const(name, value):
        p[f"{prefix}.{name}"] = en.parameter(np.asarray(value, dtype=dtype), name)

    add("embed", (vocab_size, d), d)
    add("pos", (cfg.total_len, d), d)
    for i in range(cfg.layers):
        # q/k/v projections carry no bias (a key/value bias is inert under
        # the row-wise softmax)
        for j in range(cfg.heads):
            add(f"l{i}.h{j}.wq", (d, dk), d)
            add(f"l{i}.h{j}.wk", (d, dk), d)
            add(f"l{i}.h{j}.wv", (d, dk), d)
        add(f"l{i}.wo", (d, d), d)
        add(f"l{i}.bo", (d,), d)
        add_const(f"l{i}.ln1.g", np.ones(d))
        add_const(f"l{i}.ln1.b", np.zeros(d))
        add_const(f"l{i}.ln2.g", np.ones(d))
        add_const(f"l{i}.ln2.b", np.zeros(d))
        add(f"ff{i}.w1", (d, ff), d)
        add(f"ff{i}.b1", (ff,), d)
        add(f"ff{i}.w2", (ff, d), ff)
        add(f"ff{i}.b2", (d,), ff)
    add_const("lnf.g", np.ones(d))
    add_const("lnf.b", np.zeros(d))
    return p


def check_encoder_params(params: dict[str, Tensor], cfg: EncoderConfig, prefix: str = "enc") -> None:
    embed = params.get(f"{prefix}.embed")
    pos = params.get(f"{prefix}.pos")
    if embed is None or pos is None:
        raise ValueError("missing encoder embedding parameters")
    if embed.value.shape[1] != cfg.d or pos.value.shape != (cfg.total_len, cfg.d):
        raise ValueError(
            f"encoder parameter shapes {embed.value.shape}/{pos.value.shape} "
            f"inconsistent with config d={cfg.d}, total_len={cfg.total_len}"
        )


def _attention(x: Tensor, params, prefix: str, layer: int, cfg: EncoderConfig) -> Tensor:
    outs = []
    inv_sqrt = 1.0 / np.sqrt(cfg.head_dim)
    for j in range(cfg.heads):
        q = en.matmul(x, params[f"{prefix}.l{layer}.h{j}.wq"])
        k = en.matmul(x, params[f"{prefix}.l{layer}.h{j}.wk"])
        v = en.matmul(x, params[f"{prefix}.l{layer}.h{j}.wv"])
        scores = en.scale(en.matmul_t(q, k), inv_sqrt)
        attn = en.masked_softmax(scores, None)
        outs.append(en.matmul(attn, v))
    return en.affine(en.concat(outs), params[f"{prefix}.l{layer}.wo"], params[f"{prefix}.l{layer}.bo"])


def encode_tokens(params: dict[str, Tensor], cfg: EncoderConfig, ids: np.ndarray, prefix: str = "enc") -> Tensor:
    """Hidden states (len(ids), d) for a real-token id sequence (no padding)."""
    check_encoder_params(params, cfg, prefix)
    ids = np.asarray(ids)
    x = en.add(en.embed(params[f"{prefix}.embed"], ids),
               en.embed(params[f"{prefix}.pos"], np.arange(len(ids))))
    for i in range(cfg.layers):
        h = en.layer_norm(x, params[f"{prefix}.l{i}.ln1.g"], params[f"{prefix}.l{i}.ln1.b"])
        x = en.add(x, _attention(h, params, prefix, i, cfg))
        h = en.layer_norm(x, params[f"{prefix}.l{i}.ln2.g"], params[f"{prefix}.l{i}.ln2.b"])
        ff = en.affine(en.relu(en.affine(h, params[f"{prefix}.ff{i}.w1"], params[f"{prefix}.ff{i}.b1"])),
                       params[f"{prefix}.ff{i}.w2"], params[f"{prefix}.ff{i}.b2"])
        x = en.add(x, ff)
    return en.layer_norm(x, params[f"{prefix}.lnf.g"], params[f"{prefix}.lnf.b"])


@dataclass
class EncodedPair:
    """Contextual representations of knowledge and statement segments.

    Hb is (n_max, d) and Hs is (m_max, d); rows past the actual token counts
    are exactly zero and the masks mark the real positions.
    """

    Hb: Tensor
    Hs: Tensor
    knowledge_mask: np.ndarray
    statement_mask: np.ndarray
    n: int
    m: int


def encode(params: dict[str, Tensor], cfg: EncoderConfig, assembled: Assembled, prefix: str = "enc") -> EncodedPair:
    joint = encode_tokens(params, cfg, assembled.ids[: assembled.real_len], prefix)
    ks, ss = assembled.knowledge_start, assembled.statement_start
    hb = en.pad_rows(en.take_rows(joint, ks, ks + assembled.n), cfg.n_max)
    hs = en.pad_rows(en.take_rows(joint, ss, ss + assembled.m), cfg.m_max)
    return EncodedPair(
        Hb=hb,
        Hs=hs,
        knowledge_mask=assembled.knowledge_mask,
        statement_mask=assembled.statement_mask,
        n=assembled.n,
        m=assembled.m,
    )
