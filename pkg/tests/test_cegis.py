import json
from fractions import Fraction

import pytest

from probinv import corpus
from probinv.cegis import (
    CegisConfig,
    Counterexample,
    Synthesizer,
    TraceWriter,
    cegis,
    cverify,
    verify,
    violated,
)
from probinv.expectations.piecewise import INF
from probinv.refinement import initial_template, refine_dynamic
from probinv.smt.queries import INDUCTIVE, SAFE, WELL_DEFINED, manhattan
from probinv.wp import char_fun


def test_violation_kinds():
    assert violated(WELL_DEFINED, Fraction(-1), 0, 0)
    assert not violated(WELL_DEFINED, Fraction(0), 0, 0)
    assert violated(INDUCTIVE, Fraction(1), Fraction(2), INF)
    assert violated(INDUCTIVE, Fraction(1), INF, INF)
    assert not violated(INDUCTIVE, INF, INF, INF)
    assert violated(SAFE, Fraction(1), 0, Fraction(1, 2))
    assert not violated(SAFE, Fraction(10**9), 0, INF)


def test_counterexample_json():
    c = Counterexample({"x": 1}, INDUCTIVE, Fraction(1, 2), Fraction(3, 4), INF)
    assert c.to_json() == {"state": {"x": 1}, "kind": "inductivity", "I": "1/2", "Phi": "3/4", "g": "INF"}


def test_config_validation():
    with pytest.raises(ValueError):
        CegisConfig(mode="fancy")
    with pytest.raises(ValueError):
        CegisConfig(d=1)
    with pytest.raises(ValueError):
        CegisConfig(budget=0)


def test_brp_09_plain():
    loop, f, g = corpus.load_property("brp_overview", 1)
    res = cegis(initial_template(loop, f), loop, f, g)
    assert res.status == "invariant"
    assert res.invariant.evaluate({"fail": 0, "sent": 0}) <= Fraction(9, 10)
    assert verify(res.invariant, loop, f, g) is True
    assert all(c.kind in (WELL_DEFINED, INDUCTIVE, SAFE) for c in res.counterexamples)


def test_brp_09_safe_only_inductivity_counterexamples():
    loop, f, g = corpus.load_property("brp_overview", 1)
    res = cegis(initial_template(loop, f), loop, f, g, CegisConfig(mode="safe"))
    assert res.status == "invariant"
    assert all(c.kind == INDUCTIVE for c in res.counterexamples)


def test_non_cooperative_also_works():
    loop, f, g = corpus.load_property("geo", 1)
    res = cegis(initial_template(loop, f), loop, f, g, CegisConfig(cooperative=False))
    assert res.status == "invariant"


def test_no_instance_on_toy_half():
    loop, f, g = corpus.load_property("toy", 2)
    res = cegis(initial_template(loop, f), loop, f, g)
    assert res.status == "no-instance"


def test_budget_exhaustion_is_inconclusive():
    loop, f, g = corpus.load_property("brp_overview", 1)
    res = cegis(initial_template(loop, f), loop, f, g, CegisConfig(budget=2))
    assert res.status == "inconclusive"
    assert "budget" in res.message
    assert res.n_cex == 2


def test_counterexamples_are_distinct():
    loop, f, g = corpus.load_property("gridsmall", 1)
    res = cegis(initial_template(loop, f), loop, f, g, CegisConfig(budget=40))
    keys = [tuple(sorted(c.state.items())) for c in res.counterexamples]
    assert len(keys) == len(set(keys))


def test_synthesizer_rejects_repeated_state():
    loop, f, g = corpus.load_property("toy", 1)
    T = initial_template(loop, f)
    s = Synthesizer(T, char_fun(loop, f, T), g, loop, "plain", None)
    try:
        s.add({"x": 0, "c": 0})
        with pytest.raises(AssertionError):
            s.add({"x": 0, "c": 0})
    finally:
        s.close()


def test_safe_mode_rejects_variable_partitions():
    from probinv.cegis import NotApplicable

    loop, f, g = corpus.load_property("geo", 1)
    T = refine_dynamic(loop, f, 2)
    with pytest.raises(NotApplicable):
        Synthesizer(T, char_fun(loop, f, T), g, loop, "safe", None)


def test_cooperative_distance():
    loop, f, g = corpus.load_property("brp_overview", 1)
    T = initial_template(loop, f)
    zero = T.instantiate({a: Fraction(0) for a in T.tvars()})
    last = {"fail": 9, "sent": 7999999}
    r, achieved = cverify(zero, loop, f, g, last, Fraction(1000))
    assert r is not True
    if achieved:
        assert manhattan(r.state, last) >= 1000


def test_trace_lines(tmp_path):
    loop, f, g = corpus.load_property("geo", 1)
    path = tmp_path / "t.jsonl"
    tw = TraceWriter(path)
    cegis(initial_template(loop, f), loop, f, g, CegisConfig(trace=tw))
    tw.close()
    recs = [json.loads(l) for l in path.read_text().splitlines()]
    assert recs and recs[-1]["verdict"] == "admissible"
    assert all(r["event"] == "candidate" for r in recs)


def test_kgeo_safe_is_small():
    loop, f, g = corpus.load_property("kgeo", 1)
    res = cegis(initial_template(loop, f), loop, f, g, CegisConfig(mode="safe"))
    assert res.status == "invariant"
    assert res.n_cex <= 20
