import os
from fractions import Fraction

import pytest

from probinv import corpus
from probinv.cegis import Verifier, synthesize_plain, verify
from probinv.expectations import LinExpr, Piecewise, less, select
from probinv.expectations.boolexpr import EMPTY_CUBE
from probinv.expectations.piecewise import Piece
from probinv.pgcl import parse_expectation
from probinv.refinement import initial_template, refine_dynamic
from probinv.smt.motzkin import UniversalImplication, motzkin_encode
from probinv.smt.queries import (
    INDUCTIVE,
    admissible_at_state,
    check_partition,
    check_well_defined,
    one_shot,
    solve,
    terminal_safe,
)
from probinv.smt.session import SmtError, SmtSession, SolverOptions, parse_sexpr, sexpr_value
from probinv.smt.terms import CTRUE, conj_c, le_c
from probinv.wp import char_fun

x = LinExpr.var("x")


def test_sexpr_parsing_and_values():
    assert parse_sexpr("((a 1) (b (- 3)))") == [["a", "1"], ["b", ["-", "3"]]]
    assert sexpr_value(["/", "1", "3"]) == Fraction(1, 3)
    assert sexpr_value(["-", ["/", "7", "2"]]) == Fraction(-7, 2)
    assert sexpr_value("2.5") == Fraction(5, 2)
    assert sexpr_value("true") is True


def test_session_push_pop_and_model():
    s = SmtSession(SolverOptions())
    try:
        s.declare("a", "Real")
        s.push()
        s.assert_("(> a 1)")
        s.assert_("(< a 1)")
        assert s.check() == "unsat"
        s.pop()
        s.assert_("(= (* 3 a) 1)")
        assert s.check() == "sat"
        assert s.get_values(["a"])["a"] == Fraction(1, 3)
    finally:
        s.close()


def test_missing_solver_is_reported():
    with pytest.raises(SmtError):
        s = SmtSession(SolverOptions(command="/nonexistent/solver-binary"))
        s.check()


def test_dump_dir_receives_scripts(tmp_path):
    solve(le_c(LinExpr.tvar("a"), 1), SolverOptions(dump_dir=str(tmp_path)))
    files = list(tmp_path.iterdir())
    assert files and "check-sat" in files[0].read_text()


def test_trivial_constraints():
    assert solve(CTRUE) == ("sat", {})
    a = LinExpr.tvar("a")
    assert solve(conj_c([le_c(LinExpr(), a), le_c(a, -1)]))[0] == "unsat"


def test_brp_constraint_at_counterexample():
    loop, f, g = corpus.load_property("brp_overview", 1)
    T = initial_template(loop, f)
    psi = char_fun(loop, f, T)
    c = admissible_at_state(T, psi, g, {"fail": 9, "sent": 7999999})
    body = T.evaluate({"fail": 9, "sent": 7999999}, {a: Fraction(0) for a in T.tvars()})
    assert body == 0
    # the all-zero valuation is excluded; Phi(I)(s) = 1/1000 > 0 = I(s)
    zero = conj_c([c] + [le_c(LinExpr.tvar(a), 0) for a in T.tvars()] +
                  [le_c(LinExpr(), LinExpr.tvar(a)) for a in T.tvars()])
    assert solve(zero)[0] == "unsat"
    assert solve(c)[0] == "sat"


def test_safety_at_initial_state():
    loop, f, g = corpus.load_property("brp_overview", 1)
    T = initial_template(loop, f)
    c = admissible_at_state(T, char_fun(loop, f, T), g, {"fail": 0, "sent": 0})
    const = [a for a in T.tvars() if a.endswith("_0")]
    assert len(const) == 1
    too_big = conj_c([c, le_c(Fraction(91, 100), LinExpr.tvar(const[0]))])
    assert solve(too_big)[0] == "unsat"


def test_verifier_finds_a_real_counterexample_for_zero():
    loop, f, g = corpus.load_property("brp_overview", 1)
    T = initial_template(loop, f)
    zero = T.instantiate({a: Fraction(0) for a in T.tvars()})
    cex = verify(zero, loop, f, g)
    assert cex is not True and cex.kind == INDUCTIVE
    assert cex.phi_value > cex.value


def test_hand_brp_invariant_is_admissible():
    loop, f, g = corpus.load_property("brp_overview", 1)
    I = parse_expectation("[fail<10 & sent<8000000]*(-9/80000000*sent + 79991/720000000*fail + 9/10) + [fail=10]",
                          loop)
    assert verify(I, loop, f, g) is True
    assert check_well_defined(I, variables=loop.variables) is True


def test_toy_synthesis_and_no_instance():
    loop, f, g = corpus.load_property("toy", 1)
    T = initial_template(loop, f)
    psi = char_fun(loop, f, T)
    states = [{"x": 0, "c": 0}, {"x": 1, "c": 0}]
    val = synthesize_plain(T, psi, g, loop, states)
    assert val is not None
    assert verify(T.instantiate(val), loop, f, g) is True
    loop2, f2, g2 = corpus.load_property("toy", 2)
    assert synthesize_plain(T, psi, g2, loop2, states) is None


def test_one_shot_on_toy():
    loop, f, g = corpus.load_property("toy", 1)
    T = initial_template(loop, f)
    r = one_shot(T, char_fun(loop, f, T), g, loop, f)
    assert r.status == "sat"
    assert verify(T.instantiate(r.valuation), loop, f, g) is True
    loop2, f2, g2 = corpus.load_property("toy", 2)
    assert one_shot(T, char_fun(loop2, f2, T), g2, loop2, f2).status == "unsat"


def test_one_shot_refuses_large_regions():
    loop, f, g = corpus.load_property("brp_overview", 1)
    T = initial_template(loop, f)
    assert one_shot(T, char_fun(loop, f, T), g, loop, f, cap=1000).status == "refused"


def test_terminal_safety():
    loop, f, g = corpus.load_property("toy", 1)
    assert terminal_safe(loop, f, g) is True
    bad = parse_expectation("[c=1]*0 + [!(c=1)]*INF", loop)
    assert terminal_safe(loop, f, bad) is False


@pytest.mark.parametrize("prem,target,ans", [
    ([x - 5], x - 10, "sat"),
    ([x - 5], x - 3, "unsat"),
    ([2 * x - 1, -x], x, "unsat"),        # true on the naturals, false at x = 1/2
])
def test_motzkin_examples(prem, target, ans):
    assert solve(motzkin_encode(UniversalImplication(tuple(prem), (), target)))[0] == ans


def test_motzkin_with_strict_premise():
    # x < 0 is infeasible together with x >= 0, so anything follows
    u = UniversalImplication((-x,), (x,), x - 100)
    assert solve(motzkin_encode(u))[0] == "sat"


def test_partition_check_detects_overlap_and_gap():
    ok = select(less(x, LinExpr.const(3)), Piecewise.constant(1), Piecewise.constant(2))
    assert check_partition(ok, ["x"])[0]
    overlap = Piecewise((Piece((EMPTY_CUBE,), LinExpr.const(1)),
                         *ok.pieces))
    assert not check_partition(overlap, ["x"])[0]
    gap = Piecewise(ok.pieces[:1])
    assert not check_partition(gap, ["x"])[0]


def test_partition_check_symbolic_boundaries():
    loop, f, g = corpus.load_property("geo", 1)
    ok, why = check_partition(refine_dynamic(loop, f, 3), loop.variables)
    assert ok, why


def test_verifier_session_reuse():
    loop, f, g = corpus.load_property("toy", 1)
    T = initial_template(loop, f)
    v = Verifier(loop, f, g)
    try:
        for k in range(5):
            I = T.instantiate({a: Fraction(k, 4) for a in T.tvars()})
            r = v.verify(I)
            assert r is True or r.kind in ("well-definedness", "inductivity", "safety")
    finally:
        v.close()


def test_solver_env_override(monkeypatch):
    monkeypatch.setenv("PROBINV_SOLVER", "/nonexistent/z3")
    with pytest.raises(SmtError):
        solve(CTRUE, SolverOptions())
    assert os.environ["PROBINV_SOLVER"] == "/nonexistent/z3"
