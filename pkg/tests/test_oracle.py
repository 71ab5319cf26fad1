from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from oscta.gen import WhileShape, random_while
from oscta.oracle import (BudgetExceeded, EnumSpec, check_osct, check_osni, enumerate_stores,
                          minimize)
from oscta.secenv import XL, Policy
from oscta.trace import Branch
from oscta.whilelang.ast import Skip
from oscta.whilelang.instrument import instrument
from oscta.whilelang.interp import run
from oscta.whilelang.parser import parse_while

SPEC = EnumSpec(domain=2)


def password(data):
    return parse_while((data / "password_check.whl").read_text())


def test_skip_holds():
    pol = Policy(vars={"x"}, leaks={XL})
    assert check_osct(Skip(), pol, SPEC).holds
    assert check_osni(Skip(), pol, SPEC).holds


def test_direct_leak_is_found():
    pol = Policy(vars={"l"}, arrays={"secret": 1}, leaks={"l"})
    res = check_osni(parse_while("l := secret[0]"), pol, SPEC)
    assert not res.holds and res.counterexample.variable == "l"


def test_constant_time_swap_holds():
    pol = Policy(vars={"t"}, arrays={"k": 2}, leaks={XL})
    c = parse_while("t := k[0]; k[0] := k[1]; k[1] := t")
    assert check_osct(c, pol, SPEC).holds


def test_password_checker_with_output_holds(data):
    pol = Policy.load(data / "password_check.pol")
    res = check_osct(password(data), pol, EnumSpec(domain=2))
    assert res.holds and res.runs == 2 ** 7


def test_password_checker_without_output_leaks_at_the_good_branch(data):
    pol = Policy.load(data / "password_check_noout.pol")
    c = password(data)
    res = check_osct(c, pol, EnumSpec(domain=2))
    assert not res.holds
    cex = res.counterexample
    # 3 assignments, two loop iterations of 4 events, the loop exit, then the test of !good
    assert cex.position == 13
    assert cex.observed_first[:13] == cex.observed_second[:13]
    assert (cex.observed_first[13], cex.observed_second[13]) == (Branch(0), Branch(1))


def test_timeouts_are_excluded_with_a_warning():
    pol = Policy(vars={"h"}, leaks={XL})
    res = check_osct(parse_while("while h do skip od"), pol, EnumSpec(domain=2, step_cap=50))
    assert res.holds and res.excluded == 1 and res.warnings


def test_budget_is_enforced():
    pol = Policy(vars={f"v{i}" for i in range(20)}, leaks={XL})
    with pytest.raises(BudgetExceeded):
        check_osct(Skip(), pol, EnumSpec(domain=2, budget=1000))


def test_enumeration_is_canonical_and_complete():
    pol = Policy(vars={"a", "b"}, arrays={"m": 1})
    stores = list(enumerate_stores(pol, EnumSpec(domain=3)))
    assert len(stores) == 27 and len(set(stores)) == 27
    assert stores == list(enumerate_stores(pol, EnumSpec(domain=3)))


def test_minimized_counterexample_still_violates():
    pol = Policy(vars={"h", "x"}, arrays={"a": 4}, leaks={XL})
    c = parse_while("x := a[h]")
    spec = EnumSpec(domain=4)
    res = check_osct(c, pol, spec)
    small = minimize(c, pol, res.counterexample, spec)
    r1, r2 = run(c, small.first), run(c, small.second)
    assert r1.trace != r2.trace
    assert sum(small.first.scalars.values()) <= sum(res.counterexample.first.scalars.values())


@settings(max_examples=40)
@given(st.randoms(use_true_random=False))
def test_constant_time_reduces_to_noninterference_of_instrumented_program(r):
    policy, c = random_while(r, WhileShape(max_scalars=3, max_depth=3))
    policy = policy.with_leaks({XL})
    spec = EnumSpec(domain=2, step_cap=500)
    ct = check_osct(c, policy, spec)
    ni = check_osni(instrument(c), policy, EnumSpec(domain=2, step_cap=2000))
    assert ct.holds == ni.holds
