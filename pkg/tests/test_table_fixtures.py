"""Reference instances with oracle labels: the gold-label path must
reproduce the expected deduction sentences and trace records exactly."""
import json

from qreason.data import Instance, build_labels
from qreason.deduction import synth_from_labels, trace_from_labels
from qreason.metrics import emit_trace


GRAVITY = Instance(
    id="QRQA-10004-2",
    knowledge="The gravitational force increases with mass and decreases with the distance between the bodies.",
    question="John was watching the physics calculator and noted a profound finding. As the mass increases, the pull of the gravitational force",
    options=("Decreases", "Increases"),
    answer=1,
    annotation={
        "para_anno": {"cause_prop": "mass", "effect_prop": "gravitational force",
                      "cause_dir_sign": "+", "effect_dir_sign": "+"},
        "question_anno": {"world": "mass increases", "value": "up"},
    },
)

GRAVITY_FLIP = Instance(
    id="QRQA-10004-2-flip",
    knowledge=GRAVITY.knowledge,
    question="John was watching the physics calculator and noted a profound finding. As the mass decreases, the pull of the gravitational force",
    options=("Decreases", "Increases"),
    answer=1,
    annotation={
        "para_anno": {"cause_prop": "mass", "effect_prop": "gravitational force",
                      "cause_dir_sign": "+", "effect_dir_sign": "+"},
        "question_anno": {"world": "mass decreases", "value": "down"},
    },
)

TELESCOPE = Instance(
    id="QRQA-10228-1",
    knowledge="The larger the light collecting area, the more light a telescope gathers and the higher resolution (ability to see fine detail) it has.",
    question="Compared to a 1 inch wide telescope, would a 100 meter telescope collect",
    options=("more light", "less light"),
    answer=0,
    annotation={
        "para_anno": {"cause_prop": "collecting area", "effect_prop": "light",
                      "cause_dir_sign": "+", "effect_dir_sign": "+"},
        "question_anno": {"world1": "1 inch wide telescope", "world2": "100 meter telescope",
                          "more_effect": "100 meter telescope", "less_effect": "1 inch wide telescope"},
    },
)

TELESCOPE_FLIP = Instance(
    id="QRQA-10228-1-flip",
    knowledge=TELESCOPE.knowledge,
    question="Compared to a 100 meter wide telescope, would a 1 inch telescope collect",
    options=("more light", "less light"),
    answer=1,
    annotation={
        "para_anno": {"cause_prop": "collecting area", "effect_prop": "light",
                      "cause_dir_sign": "+", "effect_dir_sign": "+"},
        "question_anno": {"world1": "100 meter wide telescope", "world2": "1 inch telescope",
                          "more_effect": "100 meter wide telescope", "less_effect": "1 inch telescope"},
    },
)


def labels_of(instance):
    labels, warnings = build_labels(instance)
    assert warnings == 0
    return labels


def test_gravity_prediction_sentence():
    labels = labels_of(GRAVITY)
    assert labels.qtype == "prediction"
    assert labels.polarity == "+"
    assert labels.value == "up"
    synth = synth_from_labels(GRAVITY, labels)
    assert synth.text == "mass increases will cause more gravitational force."


def test_gravity_flip_sentence():
    synth = synth_from_labels(GRAVITY_FLIP, labels_of(GRAVITY_FLIP))
    assert synth.text == "mass decreases will cause less gravitational force."


def test_telescope_comparison_sentence():
    labels = labels_of(TELESCOPE)
    assert labels.qtype == "comparison"
    assert labels.comparison == "<"
    synth = synth_from_labels(TELESCOPE, labels)
    assert synth.text == "1 inch wide telescope will cause less light than 100 meter telescope."


def test_telescope_flip_sentence():
    labels = labels_of(TELESCOPE_FLIP)
    assert labels.comparison == ">"
    synth = synth_from_labels(TELESCOPE_FLIP, labels)
    assert synth.text == "100 meter wide telescope will cause more light than 1 inch telescope."


def test_gravity_trace_record_fields():
    trace = trace_from_labels(GRAVITY, labels_of(GRAVITY))
    line = emit_trace(GRAVITY, trace, 1)
    record = json.loads(line)
    assert record["type"] == "prediction"
    assert record["polarity"] == "+"
    assert record["value"] == "up"
    assert record["world"] == "mass increases"
    assert record["cause"] == "mass"
    assert record["synthetic_text"] == "mass increases will cause more gravitational force."
    assert record["chosen_answer"] == 1
    assert record["correct"] is True


def test_telescope_trace_record_fields():
    trace = trace_from_labels(TELESCOPE, labels_of(TELESCOPE))
    line = emit_trace(TELESCOPE, trace, 0)
    record = json.loads(line)
    assert record["type"] == "comparison"
    assert record["comparison"] == "<"
    assert record["world1"] == "1 inch wide telescope"
    assert record["world2"] == "100 meter telescope"
    assert record["correct"] is True


def test_trace_records_roundtrip_byte_identically():
    for inst in (GRAVITY, TELESCOPE):
        trace = trace_from_labels(inst, labels_of(inst))
        line = emit_trace(inst, trace, 0)
        assert json.dumps(json.loads(line), sort_keys=True) == line
