from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from algebra import (compatible_orders, law_resolved_below_is_fixed, law_triangle_monotone,
                     law_triangle_order_independent, law_triangle_preserves_wellformedness)
from oscta.lattice import BOTTOM, SecType, real, sym
from oscta.secenv import (XL, IllFormedEnvironment, Policy, PolicyError, TypeEnv, UniverseError,
                          env_join, env_leq, env_leq_r, lookup_alpha, reachable, triangle_level,
                          triangle_level_set, triangle_set, triangle_var, well_formed)

O1, O2, O3 = sym("o1"), sym("o2"), sym("o3")
X, Z, U, H = real("x"), real("z"), real("u"), real("h")


def T(*atoms):
    return SecType.of(*atoms)


def env(outputs=("o1", "o2", "o3"), **types):
    names = ["x", "y", "z", "u", "h", "o1", "o2", "o3", XL]
    base = {n: BOTTOM for n in names}
    base.update(types)
    return TypeEnv(base, outputs)


def chain_policy() -> Policy:
    return Policy(vars={"x", "y", "z", "u", "o1", "o2", "o3"},
                  outputs={"o1", "o2", "o3"})


def test_lookup_alpha_uses_symbolic_atoms_for_outputs():
    g0 = chain_policy().initial_env()
    assert lookup_alpha(g0, {"o1", "z"}) == T(O1, Z)
    assert lookup_alpha(g0, set()) == BOTTOM
    assert lookup_alpha(g0, {"x"}) == T(X)
    with pytest.raises(UniverseError):
        lookup_alpha(g0, {"nope"})


def test_triangle_var_replaces_symbolic_atom():
    g = env(o1=T(O3, O2, X), o2=T(real("o2")))
    out = triangle_var(g, "o2")
    assert out["o1"] == T(O3, real("o2"), X)
    assert triangle_var(env(), "o1") == env()
    g = env(y=T(O1))
    assert triangle_var(g, "o1")["y"] == BOTTOM
    with pytest.raises(UniverseError):
        triangle_var(g, "x")


def test_triangle_level_examples():
    g4 = env(o2=T(real("o2")))
    p = triangle_level_set(T(O3, O2, X), g4, {"o1", "o2"})
    assert p == T(O3, real("o2"), X)
    assert triangle_level(BOTTOM, g4, "o1") == BOTTOM
    assert triangle_level(T(X), g4, "o1") == T(X)


def test_triangle_set_needs_compatible_order():
    g = env(o2=T(O1), o1=T(H))
    assert triangle_level_set(T(O2), g, {"o1", "o2"}) == T(H)
    assert g.compatible_order({"o1", "o2"}) == ["o2", "o1"]
    # the other order would leave ~o1 behind
    wrong = g.triangle_level(g.triangle_level(T(O2), "o1"), "o2")
    assert wrong == T(O1)
    assert triangle_set(g, set()) == g


def test_well_formedness():
    assert not well_formed(env(o1=T(O2), o2=T(O1)))
    assert well_formed(env())
    with pytest.raises(IllFormedEnvironment):
        triangle_set(env(o1=T(O2), o2=T(O1)), {"o1"})


def test_reachable():
    assert reachable(env(), "o1") == frozenset()
    chain = env(o2=T(O1), o3=T(O2))
    assert reachable(chain, "o1") == {"o2", "o3"}


def test_orderings():
    g = env(x=T(X))
    assert env_leq_r(g, g)
    grown = g.update(x=T(X, O1))
    assert env_leq(g, grown) and not env_leq_r(g, grown)
    assert env_join(g, grown) == grown
    with pytest.raises(UniverseError):
        env_leq(g, env(outputs=("o1",)))


def test_universe_is_fixed():
    g = env()
    with pytest.raises(UniverseError):
        g.update(x=T(real("nowhere")))
    with pytest.raises(UniverseError):
        g.update(nowhere=BOTTOM)


def test_policy_validation():
    with pytest.raises(PolicyError):
        Policy(vars={"a"}, arrays={"a": 2}).initial_env()
    with pytest.raises(PolicyError):
        Policy(arrays={"a": 2}, outputs={"a"}).initial_env()
    with pytest.raises(PolicyError):
        Policy(vars={XL}).initial_env()
    with pytest.raises(PolicyError):
        Policy.from_dict({"vars": ["a"], "bogus": []})
    with pytest.raises(PolicyError):
        Policy.from_dict({"arrays": {"a": -1}})
    pol = Policy.from_dict({"vars": ["a", "b"], "inputs": ["a"], "outputs": ["b"]})
    assert Policy.from_dict(pol.to_dict()) == pol
    assert pol.allowed() == T(real("a"), sym("b"))


def test_compatible_orders_enumeration():
    g = env(o2=T(O1), o3=T(O1))
    orders = compatible_orders(g, {"o1", "o2", "o3"})
    assert all(o[-1] == "o1" for o in orders) and len(orders) == 2


@given(st.randoms(use_true_random=False))
def test_resolution_is_order_independent(r):
    law_triangle_order_independent(r)


@given(st.randoms(use_true_random=False))
def test_resolution_preserves_wellformedness(r):
    law_triangle_preserves_wellformedness(r)


@given(st.randoms(use_true_random=False))
def test_resolution_is_monotone(r):
    law_triangle_monotone(r)


@given(st.randoms(use_true_random=False))
def test_resolution_fixes_restricted_upper_bounds(r):
    law_resolved_below_is_fixed(r)
