import numpy as np
import pytest

from qreason.answering import assemble_answer_input, predict_answer, score_option, score_options
from qreason.data import Instance
from qreason.encoder import EncoderConfig
from qreason.model import init_answer_model
from qreason.text import Vocab, build_vocab, tokenize

CFG = EncoderConfig(d=16, layers=1, heads=2, ff=32, n_max=16, m_max=24)


def make_model(seed=0):
    vocab = build_vocab(
        ["mass increases will cause more gravitational pull ; as the a b decreases less"], 1
    )
    return init_answer_model(CFG, vocab, seed)


INSTANCE = Instance(
    id="a1",
    knowledge="The greater the mass, the greater the pull.",
    question="As the mass increases, the pull",
    options=("increases", "decreases"),
    answer=0,
)
SYN = "mass increases will cause more gravitational pull."


def test_assembled_input_starts_with_bos_and_separates_with_semicolon():
    model = make_model()
    a = assemble_answer_input(SYN, INSTANCE.question, INSTANCE.options[0], model.vocab, CFG.n_max, CFG.m_max)
    assert a.ids[0] == Vocab.BOS
    semi = model.vocab.id(";")
    assert semi != Vocab.UNK and semi in a.ids.tolist()


def test_option_inputs_differ_only_after_the_separator():
    model = make_model()
    a0 = assemble_answer_input(SYN, INSTANCE.question, INSTANCE.options[0], model.vocab, CFG.n_max, CFG.m_max)
    a1 = assemble_answer_input(SYN, INSTANCE.question, INSTANCE.options[1], model.vocab, CFG.n_max, CFG.m_max)
    semi_pos = a0.ids.tolist().index(model.vocab.id(";"))
    assert a0.ids[: semi_pos + 1].tolist() == a1.ids[: semi_pos + 1].tolist()
    assert a0.ids[semi_pos + 1] != a1.ids[semi_pos + 1]


def test_empty_question_or_option_rejected():
    model = make_model()
    with pytest.raises(ValueError):
        assemble_answer_input(SYN, " ", "x", model.vocab, CFG.n_max, CFG.m_max)
    with pytest.raises(ValueError):
        assemble_answer_input(SYN, "q", "", model.vocab, CFG.n_max, CFG.m_max)


def test_scores_lie_in_open_unit_interval():
    model = make_model(1)
    s0, s1 = score_options(INSTANCE, SYN, model)
    for s in (s0, s1):
        assert 0.0 < s < 1.0


def test_zero_scoring_head_gives_exactly_half():
    model = make_model(2)
    model.params["score.w"].value[...] = 0.0
    model.params["score.b"].value[...] = 0.0
    s0, s1 = score_options(INSTANCE, SYN, model)
    assert s0 == 0.5 and s1 == 0.5


def test_predict_answer_argmax_and_tie_rules():
    model = make_model(3)
    pred = predict_answer(INSTANCE, SYN, model)
    s0, s1 = pred.scores
    assert pred.index == (0 if s0 >= s1 else 1)

    model.params["score.w"].value[...] = 0.0
    model.params["score.b"].value[...] = 0.0
    tie = predict_answer(INSTANCE, SYN, model)
    assert tie.index == 0 and tie.tie


def test_swapping_options_swaps_the_prediction():
    model = make_model(4)
    pred = predict_answer(INSTANCE, SYN, model)
    swapped_instance = Instance(
        id="a1s", knowledge=INSTANCE.knowledge, question=INSTANCE.question,
        options=(INSTANCE.options[1], INSTANCE.options[0]), answer=1,
    )
    swapped = predict_answer(swapped_instance, SYN, model)
    if pred.scores[0] != pred.scores[1]:
        assert swapped.index == 1 - pred.index


def test_argmax_is_invariant_under_monotone_transformation():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = rng.uniform(0.01, 0.99, size=2)
        base = 0 if s[0] >= s[1] else 1
        for f in (lambda x: np.log(x), lambda x: 3 * x + 1, lambda x: x ** 3):
            t = f(s)
            assert (0 if t[0] >= t[1] else 1) == base


def test_reference_instance_assembles_without_truncation():
    # gravitational-force reference fields fit the default answerer lengths
    question = ("John was watching the physics calculator and noted a profound finding. "
                "As the mass increases, the pull of the gravitational force")
    synth = "mass increases will cause more gravitational force."
    vocab = build_vocab([question, synth, "increases ;"], 1)
    a = assemble_answer_input(synth, question, "Increases", vocab, n_max=32, m_max=64)
    assert not a.truncated_knowledge and not a.truncated_statement


def test_missing_scoring_head_rejected():
    from qreason.model import init_reasoning_model
    vocab = build_vocab(["a b"], 1)
    reasoning = init_reasoning_model(CFG, vocab, 0)
    a = assemble_answer_input(SYN, "q", "x", vocab, CFG.n_max, CFG.m_max)
    with pytest.raises(ValueError):
        score_option(a, reasoning)
