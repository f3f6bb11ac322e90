import json

import pytest
from hypothesis import given, settings

from qdr.errors import ParseError, UndeclaredParameter
from qdr.jets import QDiffPoly, TruncationSpec
from qdr.serialize import format_qdp, from_structured, parse_qdp, to_structured

from strategies import qdiffpolys


def test_canonical_text():
    f = parse_qdp("u^2/2 + eps^2/24*u[1,2] - i*hbar/24")
    assert format_qdp(f) == "(1/2)*u[1,0]^2 + (1/24)*eps^2*u[1,2] + (-1/24*i)*hbar"
    assert format_qdp(QDiffPoly.zero()) == "0"


def test_aliases_and_second_symbol():
    f = parse_qdp("u[omega,2]*v[1,0]", nfields=2, aliases={"omega": 2})
    assert f == QDiffPoly({(0, 0, ((1, 0), (2, 2)), ()): 1}, nfields=2)
    assert format_qdp(f, "v") == "(1)*v[1,0]*v[2,2]"


@pytest.mark.parametrize("bad", ["", "u +", "u[1]", "u/u", "u/0", "(u", "u[3,0]", "u[omega,0]", "2 ^ u"])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        parse_qdp(bad)


def test_undeclared_parameter():
    with pytest.raises(UndeclaredParameter):
        parse_qdp("nu*u")


def test_parse_respects_truncation():
    f = parse_qdp("u^3 + eps^3*u", trunc=TruncationSpec(E=2, U=2))
    assert f.is_zero()


@settings(max_examples=100, deadline=None)
@given(qdiffpolys(nfields=2, params=True))
def test_text_round_trip(f):
    assert parse_qdp(format_qdp(f), nfields=2) == f


@settings(max_examples=100, deadline=None)
@given(qdiffpolys(nfields=2, params=True))
def test_structured_round_trip(f):
    doc = json.loads(json.dumps(to_structured(f)))
    assert from_structured(doc) == f
    assert set(doc) == {"setup", "truncation", "terms"}


def test_structured_schema():
    f = parse_qdp("-i*hbar/24*u", trunc=TruncationSpec(4, 2))
    doc = to_structured(f)
    assert doc["truncation"] == {"E": 4, "H": 2, "U": None}
    assert doc["terms"] == [
        {"eps": 0, "hbar": 1, "params": {}, "monomial": [[1, 0]], "coeff": {"re": "0", "im": "-1/24"}}
    ]


def test_malformed_structured():
    with pytest.raises(ParseError):
        from_structured({"terms": [{"eps": 0}]})
