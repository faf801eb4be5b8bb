import random
from fractions import Fraction

import pytest

from _gen import rand_state, rand_valuation
from probinv import corpus
from probinv.cegis import CegisConfig, cegis
from probinv.refinement import (
    OuterConfig,
    StrategyInapplicable,
    base_groups,
    boundary_chain,
    check_applicable,
    initial_template,
    is_natural,
    outer_loop,
    refine_dynamic,
    refine_inductivity,
    refine_static,
    split_interval,
    template_pieces,
)
from probinv.smt.queries import check_partition


def test_split_interval():
    assert split_interval(0, 9, 2) == [(0, 4), (5, 9)]
    parts = split_interval(0, 10, 3)
    assert parts[0][0] == 0 and parts[-1][1] == 10
    assert all(a[1] + 1 == b[0] for a, b in zip(parts, parts[1:]))


def test_boundary_chain_partitions_the_line():
    cubes = boundary_chain("x", ["d1", "d2"])
    rng = random.Random(0)
    from probinv.expectations.boolexpr import cube_holds

    for _ in range(200):
        val = {"d1": Fraction(rng.randint(0, 9)), "d2": Fraction(rng.randint(0, 9))}
        x = rng.randint(0, 12)
        assert sum(cube_holds(c, {"x": x}, val) for c in cubes) == 1


@pytest.mark.parametrize("name,pieces", [("brp_overview", 1), ("multchain", 6), ("rw", 2), ("geo", 1)])
def test_initial_template_sizes(name, pieces):
    loop, f, _ = corpus.load_property(name, 1)
    T = initial_template(loop, f)
    assert template_pieces(T) == pieces
    assert is_natural(T, loop, f)


def test_base_groups_are_disjoint_for_overlapping_path_conditions():
    # rw: one branch has no condition, the other tests x=1
    loop = corpus.load("rw")
    groups = base_groups(loop)
    assert len(groups) == 2
    rng = random.Random(1)
    from probinv.expectations.boolexpr import cube_holds

    for _ in range(300):
        s = rand_state(loop, rng, True)
        assert sum(any(cube_holds(c, s) for c in g) for g in groups) == 1


def test_static_splits():
    loop, f, _ = corpus.load_property("brp_overview", 1)
    T2 = refine_static(loop, f, 2)
    assert template_pieces(T2) == 4
    text = str(T2)
    assert "4000000" in text and "5" in text
    ok, why = check_partition(T2, loop.variables)
    assert ok, why


def test_static_needs_finite_state():
    loop, f, g = corpus.load_property("geo", 1)
    with pytest.raises(StrategyInapplicable):
        check_applicable(loop, OuterConfig(strategy="static"))


def test_dynamic_rejected_for_safe_mode():
    loop, f, g = corpus.load_property("geo", 1)
    with pytest.raises(StrategyInapplicable):
        check_applicable(loop, OuterConfig(strategy="dynamic", cegis=CegisConfig(mode="safe")))


def test_dynamic_round_one_is_initial():
    loop, f, _ = corpus.load_property("geo", 1)
    assert str(refine_dynamic(loop, f, 1)) == str(initial_template(loop, f))
    T3 = refine_dynamic(loop, f, 3)
    assert not T3.is_fixed_partition()
    assert any(a.startswith("d3_") for a in T3.tvars())


@pytest.mark.parametrize("name", ["geo", "toy", "multchain", "kgeo"])
def test_dynamic_partition_under_random_boundaries(name):
    loop, f, _ = corpus.load_property(name, 1)
    T = refine_dynamic(loop, f, 3)
    rng = random.Random(3)
    for _ in range(10):
        ok, why = check_partition(T.instantiate(rand_valuation(T, rng)), loop.variables)
        assert ok, why


def test_inductivity_split_grows_the_template():
    loop, f, g = corpus.load_property("gridsmall", 1)
    T = initial_template(loop, f)
    res = cegis(T, loop, f, g, CegisConfig(recheck=False))
    assert res.status == "no-instance"
    T2 = refine_inductivity(T, res.last_candidate, res.last_psi, loop, f)
    assert template_pieces(T2) > template_pieces(T)
    ok, why = check_partition(T2, loop.variables)
    assert ok, why


@pytest.mark.parametrize("strategy", ["static", "dynamic", "inductivity"])
def test_outer_loop_on_toy(strategy):
    loop, f, g = corpus.load_property("toy", 1)
    res = outer_loop(loop, f, g, OuterConfig(strategy=strategy))
    assert res.status == "invariant"
    assert res.rounds[0].round == 1


def test_outer_loop_exhausts_rounds():
    loop, f, g = corpus.load_property("toy", 2)
    res = outer_loop(loop, f, g, OuterConfig(strategy="static", round_cap=2))
    assert res.status == "exhausted"
    assert len(res.rounds) == 2


def test_outer_loop_timeout():
    loop, f, g = corpus.load_property("brp_overview", 2)
    res = outer_loop(loop, f, g, OuterConfig(strategy="dynamic", timeout=0.5))
    assert res.status in ("inconclusive", "exhausted")
    if res.status == "inconclusive":
        assert "timeout" in res.message


def test_template_hook_sees_every_round():
    loop, f, g = corpus.load_property("gridsmall", 1)
    seen = []
    res = outer_loop(loop, f, g, OuterConfig(strategy="dynamic", on_template=lambda r, T: seen.append(r)))
    assert seen == [r.round for r in res.rounds]
