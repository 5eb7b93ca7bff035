import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qreason import engine as en
from qreason import heads as hd
from qreason.encoder import EncodedPair, EncoderConfig, encode, init_encoder_params
from qreason.heads import init_head_params
from qreason.text import build_vocab, assemble_pair, tokenize

D = 16
CFG = EncoderConfig(d=D, layers=1, heads=4, ff=32, n_max=8, m_max=8)


def make_pair(seed=0, n=5, m=6, d=D, n_max=CFG.n_max, m_max=CFG.m_max):
    rng = np.random.default_rng(seed)
    hb = np.zeros((n_max, d))
    hb[:n] = rng.normal(size=(n, d))
    hs = np.zeros((m_max, d))
    hs[:m] = rng.normal(size=(m, d))
    kmask = np.arange(n_max) < n
    smask = np.arange(m_max) < m
    return EncodedPair(Hb=en.constant(hb), Hs=en.constant(hs),
                       knowledge_mask=kmask, statement_mask=smask, n=n, m=m)


def make_params(seed=1, d=D):
    return init_head_params(d, np.random.default_rng(seed), np.float64)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_type_invariants_hold_for_arbitrary_parameters(seed):
    pair = make_pair(seed % 7)
    params = make_params(seed)
    outputs = hd.run_all_heads(pair, params)
    for name in hd.SPAN_HEADS:
        vec = outputs[name]
        probs = vec.probs.value
        mask = pair.knowledge_mask if vec.segment == "knowledge" else pair.statement_mask
        assert (probs >= 0).all()
        assert abs(probs.sum() - 1.0) < 1e-6
        assert (probs[~mask] == 0).all()
    for name in hd.BINARY_HEADS:
        p = outputs[name].p.value
        assert p.shape == (2,)
        assert (p >= 0).all()
        assert abs(p.sum() - 1.0) < 1e-6


def test_identical_cause_effect_parameters_give_identical_attention():
    pair = make_pair(2)
    params = make_params(3)
    for suffix in ("w1", "b1", "w2"):
        params[f"head.effect.{suffix}"].value[...] = params[f"head.cause.{suffix}"].value
    p_c, p_e = hd.find_cause_effect(pair, params)
    assert np.array_equal(p_c.probs.value, p_e.probs.value)


def test_identical_world_head_parameters_give_identical_attention():
    pair = make_pair(4)
    params = make_params(5)
    for suffix in ("w1", "b1", "w2"):
        params[f"head.world2.{suffix}"].value[...] = params[f"head.world1.{suffix}"].value
    p_w1, p_w2 = hd.find_worlds(pair, params)
    assert np.array_equal(p_w1.probs.value, p_w2.probs.value)


def test_polarity_is_invariant_under_joint_permutation():
    # permuting knowledge rows together with the attention entries leaves
    # the weighted sums, hence the polarity output, unchanged
    pair = make_pair(6)
    params = make_params(7)
    p_c, p_e = hd.find_cause_effect(pair, params)
    base = hd.polarity_check(pair, p_c, p_e, params).p.value

    perm = np.random.default_rng(0).permutation(pair.n)
    full = np.concatenate([perm, np.arange(pair.n, CFG.n_max)])
    pair2 = EncodedPair(Hb=en.constant(pair.Hb.value[full]), Hs=pair.Hs,
                        knowledge_mask=pair.knowledge_mask, statement_mask=pair.statement_mask,
                        n=pair.n, m=pair.m)
    pc2 = hd.AttnVec(en.constant(p_c.probs.value[full]), "knowledge")
    pe2 = hd.AttnVec(en.constant(p_e.probs.value[full]), "knowledge")
    permuted = hd.polarity_check(pair2, pc2, pe2, params).p.value
    assert np.abs(base - permuted).max() < 1e-12


def test_polarity_rejects_statement_segment_vectors():
    pair = make_pair(8)
    params = make_params(9)
    p_w = hd.find_world(pair, params)
    with pytest.raises(ValueError):
        hd.polarity_check(pair, p_w, p_w, params)


def test_value_prediction_rejects_knowledge_segment_vector():
    pair = make_pair(8)
    params = make_params(9)
    p_c, _ = hd.find_cause_effect(pair, params)
    with pytest.raises(ValueError):
        hd.value_prediction(pair, p_c, params)


def test_worlds_comparison_closed_form_identity():
    # W = I, pooled vectors e1 vs e2: scores (1, 0) -> softmax ~ (0.731, 0.269)
    n_max, m_max, d = 4, 4, 3
    hb = np.zeros((n_max, d))
    hb[0] = [1.0, 0.0, 0.0]
    hs = np.zeros((m_max, d))
    hs[0] = [1.0, 0.0, 0.0]  # world1 pool -> e1
    hs[1] = [0.0, 1.0, 0.0]  # world2 pool -> e2
    pair = EncodedPair(en.constant(hb), en.constant(hs),
                       np.arange(n_max) < 1, np.arange(m_max) < 2, 1, 2)
    params = {"head.wcom": en.parameter(np.eye(d))}
    one = lambda i, L: np.eye(L)[i]
    p_c = hd.AttnVec(en.constant(one(0, n_max)), "knowledge")
    p_w1 = hd.AttnVec(en.constant(one(0, m_max)), "statement")
    p_w2 = hd.AttnVec(en.constant(one(1, m_max)), "statement")
    out = hd.worlds_comparison(pair, p_c, p_w1, p_w2, params)
    expect = np.array([np.e / (np.e + 1), 1 / (np.e + 1)])
    assert np.abs(out.p.value - expect).max() < 1e-12


def test_worlds_comparison_swap_antisymmetry_exact():
    pair = make_pair(10)
    params = make_params(11)
    p_c, _ = hd.find_cause_effect(pair, params)
    p_w1, p_w2 = hd.find_worlds(pair, params)
    a = hd.worlds_comparison(pair, p_c, p_w1, p_w2, params).p.value
    b = hd.worlds_comparison(pair, p_c, p_w2, p_w1, params).p.value
    assert np.array_equal(a, b[::-1])


def test_worlds_comparison_dimension_mismatch_rejected():
    pair = make_pair(12)
    params = make_params(13)
    params["head.wcom"] = en.parameter(np.zeros((D + 1, D + 1)))
    p_c, _ = hd.find_cause_effect(pair, params)
    p_w1, p_w2 = hd.find_worlds(pair, params)
    with pytest.raises(ValueError):
        hd.worlds_comparison(pair, p_c, p_w1, p_w2, params)


def test_classify_type_pools_over_actual_tokens_only():
    pair = make_pair(14, m=3)
    params = make_params(15)
    out = hd.classify_type(pair, params)
    # manual mean over the three real rows
    pooled = pair.Hs.value[:3].mean(axis=0)
    h = np.tanh(pooled @ params["head.type.w1"].value + params["head.type.b1"].value)
    logits = h @ params["head.type.w2"].value + params["head.type.b2"].value
    expect = np.exp(logits - logits.max())
    expect /= expect.sum()
    assert np.abs(out.p.value - expect).max() < 1e-12


def test_heads_are_stateless_and_bit_identical():
    pair = make_pair(16)
    params = make_params(17)
    a = hd.run_all_heads(pair, params)
    b = hd.run_all_heads(pair, params)
    for name in hd.SPAN_HEADS:
        assert np.array_equal(a[name].probs.value, b[name].probs.value)
    for name in hd.BINARY_HEADS:
        assert np.array_equal(a[name].p.value, b[name].p.value)


def test_every_head_gradchecks_through_encoder():
    # small end-to-end check: encoder + heads + a scalar readout
    cfg = EncoderConfig(d=8, layers=1, heads=2, ff=16, n_max=7, m_max=7)
    rng = np.random.default_rng(0)
    vocab = build_vocab(["a b c d e f g"], 1)
    params = init_encoder_params(cfg, len(vocab), rng, np.float64)
    params.update(init_head_params(cfg.d, rng, np.float64))
    assembled = assemble_pair(tokenize("a b c d"), tokenize("e f g"), vocab, cfg.n_max, cfg.m_max)

    def loss_fn():
        pair = encode(params, cfg, assembled)
        outputs = hd.run_all_heads(pair, params)
        total = None
        for name in hd.ALL_HEADS:
            probs = outputs[name].probs if name in hd.SPAN_HEADS else outputs[name].p
            term = en.total(en.mul(en.safe_log(probs), en.constant(np.arange(probs.value.size) * 0.1 + 0.05)))
            total = term if total is None else en.add(total, term)
        return total

    assert en.gradcheck(loss_fn, params, eps=1e-5) < 1e-3
