import random
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from _gen import rand_expectation, rand_state
from probinv import corpus
from probinv.expectations import LinExpr, Piecewise
from probinv.pgcl import outcomes, parse_expectation, parse_program
from probinv.refinement import initial_template
from probinv.smt.queries import check_partition
from probinv.wp import CharFunctional, char_fun, expected_value_oracle, wp, wp_piecewise


def test_skip_is_identity():
    p = parse_program("nat x; while(x<1){skip}")
    f = parse_expectation("[x<3]*(2*x+1) + [!(x<3)]*7", p)
    w = wp_piecewise(p.body, f)
    for x in range(6):
        assert w.evaluate({"x": x}) == f.evaluate({"x": x})


def test_assignment_substitutes():
    p = parse_program("nat x; while(x<1){x:=x+1}")
    w = wp_piecewise(p.body, parse_expectation("x", p))
    assert w.evaluate({"x": 4}) == 5
    assert wp(p.body, parse_expectation("x", p)).evaluate({"x": 0}) == 1


def test_brp_body_on_template():
    loop, f, g = corpus.load_property("brp_overview", 1)
    T = initial_template(loop, f)
    psi = char_fun(loop, f, T)
    s = {"fail": 9, "sent": 7999999}
    val = {a: Fraction(0) for a in T.tvars()}
    assert psi.evaluate(s, val) == Fraction(1, 1000)


def test_brp_body_shape():
    # 0.999 * I[sent/sent+1][fail/0] + 0.001 * I[fail/fail+1]
    loop = corpus.load("brp_overview")
    I = parse_expectation("[fail<10 & sent<8000000]*(3*sent + 5*fail + 1) + [!(fail<10 & sent<8000000)]*2", loop)
    w = wp_piecewise(loop.body, I)
    for s in ({"fail": 3, "sent": 10}, {"fail": 9, "sent": 7999999}, {"fail": 0, "sent": 0}):
        a = I.evaluate({"fail": 0, "sent": s["sent"] + 1})
        b = I.evaluate({"fail": s["fail"] + 1, "sent": s["sent"]})
        assert w.evaluate(s) == Fraction(999, 1000) * a + Fraction(1, 1000) * b


def test_geo_fixed_point():
    loop, f, g = corpus.load_property("geo", 1)
    I = parse_expectation("[c=0]*(x+1) + [!(c=0)]*x", loop)
    psi = char_fun(loop, f, I)
    for c in range(3):
        for x in range(20):
            s = {"c": c, "x": x}
            assert psi.evaluate(s) == I.evaluate(s)


def test_unsatisfiable_guard_returns_f():
    p = parse_program("nat x; while(x<0){x:=x+1}")
    f = parse_expectation("[x<4]*x + [!(x<4)]*1", p)
    psi = char_fun(p, f, Piecewise.constant(LinExpr.tvar("a")))
    assert all(psi.evaluate({"x": x}, {"a": Fraction(9)}) == f.evaluate({"x": x}) for x in range(8))


def test_brp_body_enumeration():
    loop = corpus.load("brp_overview")
    f = parse_expectation("[fail=10] + [!(fail=10)]*0", loop)
    assert expected_value_oracle(loop.body, f, {"fail": 9, "sent": 7999999}) == Fraction(1, 1000)


def test_rw_categorical_outcomes():
    loop = corpus.load("rw")
    dist = {(s["x"], s["s"]): p for s, p in outcomes(loop.body, {"x": 1, "s": 3})}
    want = {(0, 3): Fraction(1, 2)}
    want.update({(1 + k, k): Fraction(1, 10) for k in range(1, 6)})
    assert dist == want


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["toy", "geo", "brp_overview", "rw", "multchain", "kgeo"]), st.integers(0, 10**6))
def test_wp_matches_enumeration(name, seed):
    loop = corpus.load(name)
    rng = random.Random(seed)
    f = rand_expectation(loop, rng)
    w = wp_piecewise(loop.body, f)
    for _ in range(3):
        s = rand_state(loop, rng, True)
        assert w.evaluate(s) == expected_value_oracle(loop.body, f, s)


def test_charfun_is_partition():
    loop, f, g = corpus.load_property("multchain", 1)
    T = initial_template(loop, f)
    ok, why = check_partition(char_fun(loop, f, T), loop.variables)
    assert ok, why


def test_charfunctional_caches_and_agrees():
    loop, f, g = corpus.load_property("toy", 1)
    cf = CharFunctional(loop, f)
    T = initial_template(loop, f)
    assert cf.apply(T) is cf.apply(T)
    val = {a: Fraction(i + 1, 3) for i, a in enumerate(sorted(T.tvars()))}
    I = T.instantiate(val)
    for x in range(3):
        for c in range(2):
            s = {"x": x, "c": c}
            assert cf.apply_instance(T, val).evaluate(s) == cf.value_at(I, s)
