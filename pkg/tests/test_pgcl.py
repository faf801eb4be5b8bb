from fractions import Fraction

import pytest

from probinv import corpus
from probinv.expectations.piecewise import INF
from probinv.pgcl import (
    PgclSyntaxError,
    ProbabilityError,
    UndeclaredVariable,
    UnderflowError,
    ast as A,
    format_program,
    outcomes,
    parse_expectation,
    parse_program,
    parse_property,
    path_conditions,
)

BRP = """
nat failed;
nat sent;
while(failed<5 & sent<8000000){
  {failed:=0; sent:=sent+1}[0.99]{failed:=failed+1}
}
"""


def test_brp_listing():
    p = parse_program(BRP)
    assert list(p.variables) == ["failed", "sent"]
    assert isinstance(p.body, A.PChoice)
    assert p.body.prob == Fraction(99, 100)


def test_skip_body():
    p = parse_program("nat x; while(x<1){skip}")
    assert isinstance(p.body, A.Skip)


def test_categorical_desugars_to_nested_choices():
    p = parse_program("nat s; nat x; while(x<3){ s := 1 : 1/5 + 2 : 1/5 + 3 : 1/5 + 4: 1/5 + 5 : 1/5; x:=x+1 }")
    dist = {}
    for s2, q in outcomes(p.body, {"s": 0, "x": 0}):
        dist[s2["s"]] = dist.get(s2["s"], 0) + q
    assert dist == {k: Fraction(1, 5) for k in range(1, 6)}
    weights = []
    node = A.flatten_seq(p.body)[0]
    while isinstance(node, A.PChoice):
        weights.append(node.prob)
        node = node.right
    assert weights == [Fraction(1, 5), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2)]


@pytest.mark.parametrize("name", corpus.names())
def test_corpus_roundtrip(name):
    p = corpus.load(name)
    again = parse_program(format_program(p))
    assert format_program(again) == format_program(p)
    assert again.variables == p.variables


@pytest.mark.parametrize("text,exc", [
    ("nat x; while(x<1){ x:=y }", UndeclaredVariable),
    ("nat x; while(x<1){ {x:=1}[1.5]{skip} }", ProbabilityError),
    ("nat x; while(x<1){ x := 1 : 1/2 + 2 : 1/3 }", ProbabilityError),
    ("nat x; while(x<1 { skip }", PgclSyntaxError),
    ("nat x; while(x<1){ x:=x*x }", PgclSyntaxError),
    ("nat x; while(x<1){ x:=1/2 }", PgclSyntaxError),
    ("nat x; nat y; while(x<5){ y:=y-1 }", UnderflowError),
])
def test_front_end_errors(text, exc):
    with pytest.raises(exc):
        parse_program(text)


def test_syntax_error_has_position():
    with pytest.raises(PgclSyntaxError) as info:
        parse_program("nat x;\nwhile(x<1){ x:= }")
    assert info.value.line == 2


def test_guarded_decrement_is_accepted():
    p = parse_program("nat x; while(0<x){ x:=x-1 }")
    assert outcomes(p.body, {"x": 3}) == [({"x": 2}, Fraction(1))]


def test_brp_property_expectations():
    p = parse_program(BRP)
    f = parse_expectation("[failed=5] + [!(failed=5)]*0", p)
    assert f.evaluate({"failed": 5, "sent": 3}) == 1
    assert f.evaluate({"failed": 4, "sent": 3}) == 0


def test_geo_property():
    p = corpus.load("geo")
    g = parse_expectation("[c=0]*(2*x+1) + [!(c=0)]*INF", p)
    assert g.evaluate({"c": 0, "x": 3}) == 7
    assert g.evaluate({"c": 1, "x": 3}) is INF
    assert len(parse_expectation("0", p)) == 1


@pytest.mark.parametrize("text,value", [
    ("-9/80000000*x + 1", Fraction(-9, 80000000) * 4 + 1),
    ("x*2 + 3/4", Fraction(35, 4)),
    ("2 x", Fraction(8)),
    ("x*1/2", Fraction(2)),
    ("0.25*x", Fraction(1)),
])
def test_coefficient_forms(text, value):
    p = parse_program("nat x; while(x<1){skip}")
    assert parse_expectation(text, p).evaluate({"x": 4}) == value


def test_printed_expectation_parses_back():
    loop, f, g = corpus.load_property("brp_overview", 1)
    I = parse_expectation("[fail<10 & sent<8000000]*(333/3306670*fail - 1/9920010*sent + 9/10) + [fail=10]", loop)
    again = parse_expectation(str(I), loop)
    for s in ({"fail": 3, "sent": 17}, {"fail": 10, "sent": 0}, {"fail": 11, "sent": 9}):
        assert again.evaluate(s) == I.evaluate(s)


def test_overlapping_pieces_rejected():
    p = parse_program("nat x; while(x<1){skip}")
    from probinv.pgcl import ExpectationError

    with pytest.raises(ExpectationError):
        parse_expectation("[x<3]*1 + [x<5]*2", p)


def test_negative_constant_piece_rejected():
    p = parse_program("nat x; while(x<1){skip}")
    from probinv.pgcl import ExpectationError

    with pytest.raises(ExpectationError):
        parse_expectation("[x<3]*(-1) + [!(x<3)]*0", p)


def test_property_file_pair():
    loop = corpus.load("toy")
    f, g = parse_property(corpus.property_text("toy", 1), loop)
    assert f.is_concrete() and g.is_concrete()


def test_path_conditions_cover_branches():
    loop = corpus.load("rw")
    conds = path_conditions(loop.body, loop.variables)
    assert len(conds) >= 2
