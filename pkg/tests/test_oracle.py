import io
from fractions import Fraction

import pytest

from probinv import corpus
from probinv.oracle import (
    OracleTooLarge,
    build_chain,
    dump_chain,
    exact_lfp,
    lfp_at,
    lookup_expectation,
    pointwise_check,
)
from probinv.pgcl import parse_expectation, parse_program
from probinv.smt.queries import INDUCTIVE


def test_rows_sum_to_one_and_frontier_absorbs():
    loop, f, g = corpus.load_property("gridsmall", 1)
    chain = build_chain(loop, f)
    assert len(chain) == 100
    for s in chain.guard_states:
        row = chain.succ[s]
        assert len(row) == 2 and all(p == Fraction(1, 2) for _, p in row)
    for t, v in chain.terminal.items():
        assert t not in chain.succ
        assert v == f.evaluate(chain.as_dict(t))


def test_gridsmall_half():
    loop, f, g = corpus.load_property("gridsmall", 1)
    assert lfp_at(loop, f, {"a": 0, "b": 0}) == Fraction(1, 2)


def test_toy_values():
    loop, f, g = corpus.load_property("toy", 1)
    chain = build_chain(loop, f)
    v = exact_lfp(chain)
    assert v[chain.key({"x": 0, "c": 0})] == Fraction(3, 4)
    assert v[chain.key({"x": 1, "c": 0})] == Fraction(1, 2)


def test_chain_closed_form():
    loop, f, g = corpus.load_property("chain_small", 1)
    chain = build_chain(loop, f)
    assert len(chain) == 1000
    assert all(len(chain.succ[s]) == 2 for s in chain.guard_states)
    assert exact_lfp(chain)[chain.key({"c": 0, "x": 0})] == 1 - Fraction(999, 1000) ** 1000


def test_empty_guard():
    p = parse_program("nat x [0,5]; while(x<0){x:=x+1}")
    f = parse_expectation("x", p)
    chain = build_chain(p, f)
    assert len(chain) == 0
    assert lfp_at(p, f, {"x": 3}) == 3


def test_cap_and_infinite_loops():
    loop, f, g = corpus.load_property("geo", 1)
    with pytest.raises(OracleTooLarge):
        build_chain(loop, f)
    loop, f, g = corpus.load_property("brp_overview", 1)
    with pytest.raises(OracleTooLarge):
        build_chain(loop, f, cap=1000)


def test_lookup_expectation_is_admissible():
    loop, f, g = corpus.load_property("gridsmall", 1)
    chain = build_chain(loop, f)
    values = exact_lfp(chain)
    I = lookup_expectation(loop, f, values, chain)
    assert pointwise_check(I, chain, g) is True


def test_zero_invariant_fails_near_target():
    loop, f, g = corpus.load_property("gridsmall", 1)
    chain = build_chain(loop, f)
    zero = parse_expectation("[a<10 & 10<=b] + [!(a<10 & 10<=b)]*0", loop)
    cex = pointwise_check(zero, chain, g)
    assert cex is not True and cex.kind == INDUCTIVE
    assert cex.state["b"] == 9


def test_synthesized_invariant_on_downscaled_brp():
    loop, f, g = corpus.load_property("brp_toy", 1)
    from probinv.cegis import cegis
    from probinv.refinement import initial_template

    res = cegis(initial_template(loop, f), loop, f, g)
    assert res.status == "invariant"
    assert pointwise_check(res.invariant, build_chain(loop, f), g) is True


def test_dump_format():
    loop, f, g = corpus.load_property("toy", 1)
    buf = io.StringIO()
    dump_chain(build_chain(loop, f), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# variables x,c"
    assert "0,0 0,1 1/2" in lines
    assert len(lines) == 1 + 4
