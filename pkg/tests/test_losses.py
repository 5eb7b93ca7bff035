import numpy as np
import pytest

from qreason import engine as en
from qreason import heads as hd
from qreason.data import Labels, SpanLabel
from qreason.encoder import EncodedPair, EncoderConfig, encode, init_encoder_params
from qreason.heads import init_head_params, run_all_heads
from qreason.losses import (
    ClampCounter, LossWeights, answer_loss, answer_loss_pair, binary_target,
    gold_targets, reason_loss, span_target,
)
from qreason.text import build_vocab, assemble_pair, tokenize

N_MAX = M_MAX = 8


class FakeDist:
    def __init__(self, values, span=False):
        t = en.parameter(np.asarray(values, dtype=np.float64))
        if span:
            self.probs = t
        else:
            self.p = t


def perfect_outputs(targets):
    out = {}
    for head, gold in targets.items():
        out[head] = FakeDist(gold.astype(float), span=head in hd.SPAN_HEADS)
    return out


def example_labels():
    return Labels(cause=SpanLabel(0, 1), effect=SpanLabel(3, 3), world=SpanLabel(2, 4),
                  polarity="+", value="up", qtype="prediction", answer=0)


def test_perfect_predictions_give_zero_loss():
    targets = gold_targets(example_labels(), N_MAX, M_MAX)
    gamma = {k: True for k in targets}
    loss = reason_loss(perfect_outputs(targets), targets, gamma, LossWeights())
    assert float(loss.value) == 0.0


def test_all_gamma_zero_gives_exactly_zero_regardless_of_predictions():
    targets = gold_targets(example_labels(), N_MAX, M_MAX)
    rng = np.random.default_rng(0)
    outputs = {h: FakeDist(rng.dirichlet(np.ones(len(t))), span=h in hd.SPAN_HEADS)
               for h, t in targets.items()}
    gamma = {k: False for k in hd.ALL_HEADS}
    loss = reason_loss(outputs, targets, gamma, LossWeights())
    assert float(loss.value) == 0.0


def test_uniform_span_closed_form():
    # uniform over n unmasked tokens, single gold token, alpha 0.1 -> 0.1 log n
    n = 6
    probs = np.zeros(N_MAX)
    probs[:n] = 1.0 / n
    outputs = {"cause": FakeDist(probs, span=True)}
    targets = {"cause": span_target(SpanLabel(2, 2), N_MAX)}
    gamma = {"cause": True}
    loss = reason_loss(outputs, targets, gamma, LossWeights())
    assert abs(float(loss.value) - 0.1 * np.log(n)) < 1e-12


def test_loss_additivity_over_heads():
    targets = gold_targets(example_labels(), N_MAX, M_MAX)
    rng = np.random.default_rng(1)
    outputs = {h: FakeDist(rng.dirichlet(np.ones(len(t)) * 3), span=h in hd.SPAN_HEADS)
               for h, t in targets.items()}
    w = LossWeights()
    both = reason_loss(outputs, targets, {"cause": True, "polarity": True}, w)
    only_c = reason_loss(outputs, targets, {"cause": True}, w)
    only_p = reason_loss(outputs, targets, {"polarity": True}, w)
    assert abs(float(both.value) - float(only_c.value) - float(only_p.value)) < 1e-12


def test_gamma_set_without_target_is_an_error():
    with pytest.raises(ValueError):
        reason_loss({}, {}, {"cause": True}, LossWeights())


def test_clamp_counter_counts_gold_position_zeros():
    probs = np.zeros(N_MAX)
    probs[0] = 1.0  # all mass away from gold
    outputs = {"cause": FakeDist(probs, span=True)}
    targets = {"cause": span_target(SpanLabel(3, 4), N_MAX)}
    counter = ClampCounter()
    loss = reason_loss(outputs, targets, {"cause": True}, LossWeights(), counter)
    assert counter.count == 2
    assert np.isfinite(float(loss.value))


def test_gamma_masked_head_has_exactly_zero_exclusive_gradients():
    cfg = EncoderConfig(d=8, layers=1, heads=2, ff=16, n_max=8, m_max=8)
    rng = np.random.default_rng(3)
    vocab = build_vocab(["a b c d e"], 1)
    params = init_encoder_params(cfg, len(vocab), rng)
    params.update(init_head_params(cfg.d, rng))
    assembled = assemble_pair(tokenize("a b c"), tokenize("d e"), vocab, cfg.n_max, cfg.m_max)
    labels = example_labels()
    labels.world = SpanLabel(0, 1)
    targets = gold_targets(labels, cfg.n_max, cfg.m_max)
    gamma = {k: (k in targets) for k in hd.ALL_HEADS}
    gamma["value"] = False  # mask the value head for the whole batch

    pair = encode(params, cfg, assembled)
    outputs = run_all_heads(pair, params)
    loss = reason_loss(outputs, targets, gamma, LossWeights())
    en.zero_grad(params.values())
    en.backward(loss)
    for name, t in params.items():
        if name.startswith("head.value."):
            assert t.grad is None or not np.any(t.grad), name
        if name.startswith("head.world."):
            assert t.grad is not None and np.any(t.grad), name


def test_answer_loss_examples():
    assert abs(float(answer_loss(en.constant(np.asarray(0.5)), 1).value) - np.log(2)) < 1e-12
    assert abs(float(answer_loss(en.constant(np.asarray(0.5)), 0).value) - np.log(2)) < 1e-12
    assert float(answer_loss(en.constant(np.asarray(1.0 - 1e-15)), 1).value) < 1e-12


def test_answer_loss_gradient_is_p_minus_y_at_the_logit():
    # BCE(sigmoid(z), y) has d/dz = p - y
    for y in (0, 1):
        z = en.parameter(np.asarray(0.7))
        p = en.sigmoid(z)
        loss = answer_loss(p, y)
        en.backward(loss)
        expect = float(p.value) - y
        assert abs(float(z.grad) - expect) < 1e-12


def test_answer_loss_pair_averages_both_options():
    p0 = en.constant(np.asarray(0.9))
    p1 = en.constant(np.asarray(0.2))
    loss = answer_loss_pair(p0, p1, gold=0)
    expect = 0.5 * (-np.log(0.9) - np.log(0.8))
    assert abs(float(loss.value) - expect) < 1e-12


def test_answer_loss_rejects_bad_label():
    with pytest.raises(ValueError):
        answer_loss(en.constant(np.asarray(0.5)), 2)


def test_binary_target_orientation():
    assert binary_target("polarity", "+").tolist() == [1.0, 0.0]
    assert binary_target("value", "down").tolist() == [0.0, 1.0]
    assert binary_target("comparison", ">").tolist() == [1.0, 0.0]
    assert binary_target("type", "comparison").tolist() == [0.0, 1.0]


def test_span_target_out_of_range_rejected():
    with pytest.raises(ValueError):
        span_target(SpanLabel(5, 9), 8)


def test_reason_loss_gradcheck_end_to_end():
    cfg = EncoderConfig(d=8, layers=2, heads=2, ff=16, n_max=7, m_max=7)
    rng = np.random.default_rng(4)
    vocab = build_vocab(["a b c d e f"], 1)
    params = init_encoder_params(cfg, len(vocab), rng, np.float64)
    params.update(init_head_params(cfg.d, rng, np.float64))
    assembled = assemble_pair(tokenize("a b c d"), tokenize("e f a"), vocab, cfg.n_max, cfg.m_max)
    labels = Labels(cause=SpanLabel(0, 1), effect=SpanLabel(2, 3), world=SpanLabel(1, 2),
                    world1=SpanLabel(0, 0), world2=SpanLabel(2, 2),
                    polarity="-", value="down", comparison="<", qtype="comparison", answer=1)
    targets = gold_targets(labels, cfg.n_max, cfg.m_max)
    gamma = {k: True for k in targets}

    def loss_fn():
        pair = encode(params, cfg, assembled)
        return reason_loss(run_all_heads(pair, params), targets, gamma, LossWeights())

    assert en.gradcheck(loss_fn, params, eps=1e-5) < 1e-3
