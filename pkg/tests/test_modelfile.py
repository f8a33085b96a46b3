from pathlib import Path

import pytest

from drmdp.engine import backward_induction
from drmdp.modelfile import (
    ModelFileError,
    parse_model_file,
    parse_model_text,
    serialize_document,
)

DATA = Path(__file__).parent.parent / "src" / "drmdp" / "data"


def _root_value(document):
    model = document.build()
    vf, _, _ = backward_induction(model, certificates=False)
    return vf[model.stages[0][0]]


def test_bundled_finite_model_golden_value():
    doc = parse_model_file(DATA / "finite_two_state.yaml")
    assert _root_value(doc) == pytest.approx(0.4, abs=1e-12)


def test_round_trip_preserves_value_exactly():
    for name in ("finite_two_state", "invalid_rows", "boundary_weights"):
        doc = parse_model_file(DATA / f"{name}.yaml")
        doc2 = parse_model_text(serialize_document(doc))
        assert _root_value(doc) == _root_value(doc2)  # zero tolerance


def test_unknown_key_rejected_with_path():
    text = (DATA / "finite_two_state.yaml").read_text()
    with pytest.raises(ModelFileError, match=r"states\[0\].factor_map"):
        parse_model_text(text.replace("p_offset:", "p_offsets:"))


def test_format_version_checked():
    text = (DATA / "finite_two_state.yaml").read_text()
    with pytest.raises(ModelFileError, match="format_version"):
        parse_model_text(text.replace("format_version: 1", "format_version: 99"))


def test_exactly_one_horizon_kind():
    text = (DATA / "finite_two_state.yaml").read_text()
    with pytest.raises(ModelFileError, match="stages.*discount|discount.*stages"):
        parse_model_text(text + "\ndiscount: 0.9\n")


def test_named_ambiguity_reference():
    doc = parse_model_file(DATA / "infinite_two_state.yaml")
    model = doc.build()
    assert model.discount == 0.9
    text = serialize_document(doc).replace("ambiguity: ball", "ambiguity: missing")
    with pytest.raises(ModelFileError, match="missing"):
        parse_model_text(text)


def test_syntax_error_located():
    with pytest.raises(ModelFileError, match="line"):
        parse_model_text("format_version: 1\nstates: [\n")


def test_terminal_states_carry_no_kernel():
    text = """
format_version: 1
stages: [[0], [1]]
states:
- terminal: true
  ambiguity: {builder: support_only, support: {kind: simplex, dim: 2}}
- terminal: true
"""
    with pytest.raises(ModelFileError, match="terminal"):
        parse_model_text(text)


def test_unknown_builder_rejected():
    text = (DATA / "finite_two_state.yaml").read_text()
    with pytest.raises(ModelFileError, match="builder"):
        parse_model_text(text.replace("builder: wasserstein", "builder: gaussian"))
