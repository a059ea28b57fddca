"""Round-trip and canonical-text behavior of the expression grammar."""

import pytest
from hypothesis import given, settings, strategies as st

from branelab.fields import COS, SIN, ScalarField
from branelab.grammar import (ParseError, field_to_text, form_to_text,
                              parse_field, parse_form, parse_vector,
                              vector_to_text)
from branelab.model import CIRCLE, LINE, model_from_names

M = model_from_names([("x1", CIRCLE), ("y1", LINE), ("x2", LINE), ("y2", LINE)])
T2 = model_from_names([("a", CIRCLE), ("b", CIRCLE)])

FIELD_CASES = [
    ("1", "1.0"),
    ("0.5 - 2*x1", "0.5 - 2.0*x1"),
    ("cos(2*pi*(x1 + x1))", "cos(2*pi*2*x1)"),
    ("sin(2*pi*x1)*y2^2", "y2^2*sin(2*pi*x1)"),
    ("cos(2*pi*x1)^2", "0.5 + 0.5*cos(2*pi*2*x1)"),
    ("2 - cos(2*pi*x1)*cos(2*pi*x1)", "1.5 - 0.5*cos(2*pi*2*x1)"),
    ("0.41421356237309515*y2", "0.41421356237309515*y2"),
]

FORM_CASES = [
    ("dx1^dy1 + dx2^dy2", "dx1^dy1 + dx2^dy2"),
    ("-dx1^dy2", "-dx1^dy2"),
    ("(1 + cos(2*pi*x1))*dx1^dy1", "(1.0 + cos(2*pi*x1))*dx1^dy1"),
    ("y2*dx1 - dx2", "y2*dx1 - dx2"),
    ("0@2", "0@2"),
    ("2.5*dx1^dx2^dy2", "2.5*dx1^dx2^dy2"),
]

VECTOR_CASES = [
    ("d_x1", "d_x1"),
    ("d_x1 - 0.41421356237309515*d_y2", "d_x1 - 0.41421356237309515*d_y2"),
    ("cos(2*pi*x1)*d_y1 + y2*d_x2", "cos(2*pi*x1)*d_y1 + y2*d_x2"),
]


@pytest.mark.parametrize("text,canon", FIELD_CASES)
def test_field_canonical_text(text, canon):
    assert field_to_text(parse_field(text, M)) == canon


@pytest.mark.parametrize("text,canon", FIELD_CASES)
def test_field_roundtrip_is_identity(text, canon):
    f = parse_field(text, M)
    assert parse_field(field_to_text(f), M) == f
    assert field_to_text(parse_field(canon, M)) == canon


@pytest.mark.parametrize("text,canon", FORM_CASES)
def test_form_canonical_text(text, canon):
    a = parse_form(text, M)
    assert form_to_text(a) == canon
    assert parse_form(form_to_text(a), M) == a


@pytest.mark.parametrize("text,canon", VECTOR_CASES)
def test_vector_canonical_text(text, canon):
    v = parse_vector(text, M)
    assert vector_to_text(v) == canon
    assert parse_vector(vector_to_text(v), M) == v


def test_pi_requires_explicit_two_pi():
    with pytest.raises(ParseError):
        parse_field("cos(pi*x1)", M)


def test_unknown_coordinate_rejected():
    with pytest.raises(ParseError):
        parse_field("z + 1", M)


def test_trig_needs_circle_argument():
    with pytest.raises((ParseError, ValueError)):
        parse_field("cos(2*pi*y1)", M)


def test_bad_character_rejected():
    with pytest.raises(ParseError):
        parse_field("x1 $ 2", M)


def test_vector_requires_direction_tokens():
    with pytest.raises(ParseError):
        parse_vector("x1 + 2", M)


def test_form_degree_mismatch_in_sum():
    with pytest.raises(ParseError):
        parse_form("dx1 + dx1^dy1", M)


def test_zero_form_needs_degree_marker():
    z = parse_form("0@2", M)
    assert z.degree == 2 and z.is_zero()
    with pytest.raises(ParseError):
        parse_form("0", M)


def test_env_lets_scenes_reference_named_fields():
    f = parse_field("0.5*y2", M)
    g = parse_field("2*speed + x2", M, env={"speed": f})
    assert g == parse_field("y2 + x2", M)


def test_fractional_frequency_rejected():
    with pytest.raises(ParseError):
        parse_field("cos(2*pi*0.5*x1)", M)


def field_strategy():
    power = st.integers(min_value=0, max_value=2)
    freq = st.integers(min_value=-2, max_value=2)
    coeff = st.floats(min_value=-8, max_value=8, allow_nan=False,
                      allow_infinity=False).filter(lambda c: abs(c) > 1e-6)

    @st.composite
    def one(draw):
        terms = {}
        for _ in range(draw(st.integers(min_value=1, max_value=3))):
            powers = (0, 0)
            freqs = (draw(freq), draw(freq))
            phase = draw(st.sampled_from([COS, SIN]))
            terms[(powers, freqs, phase)] = draw(coeff)
        return ScalarField.build(T2, terms)

    return one()


@settings(max_examples=60, deadline=None)
@given(field_strategy())
def test_serialize_parse_roundtrip_exact(f):
    """repr-float serialization reparses to the identical canonical field."""
    assert parse_field(field_to_text(f), T2) == f
