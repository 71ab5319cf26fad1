"""Brute-force dynamic checks of output-sensitive security definitions.

All initial stores over a small value domain are enumerated in a canonical
order (cells sorted by name and index, values counting up from 0, the last
cell varying fastest).  Runs are grouped by their public-input projection and
then by their final public-output projection; within a group every run must
agree on the observed quantity:

* ``osni`` -- the final values of the leakage variables;
* ``osct`` -- the complete leak trace.

Runs hitting the step cap or faulting are left out of the comparison and
reported as warnings.  A counterexample is the canonically smallest violating
pair ``(i, j)``, ``i < j``.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, Sequence

from .secenv import XL, Policy
from .trace import ExecError, LeakTrace, render_trace
from .whilelang.ast import Cmd
from .whilelang.interp import DEFAULT_STEP_CAP, Program, Store

DEFAULT_BUDGET = 1 << 16


class BudgetExceeded(RuntimeError):
    pass


def default_budget() -> int:
    raw = os.environ.get("OSCTA_BUDGET")
    return int(raw) if raw else DEFAULT_BUDGET


@dataclass(frozen=True)
class EnumSpec:
    domain: int = 2
    step_cap: int = DEFAULT_STEP_CAP
    pins: Mapping[str, Any] = field(default_factory=dict)
    budget: int | None = None

    def limit(self) -> int:
        return self.budget if self.budget is not None else default_budget()


@dataclass(frozen=True)
class Counterexample:
    first: Any
    second: Any
    observed_first: Any
    observed_second: Any
    position: int | None = None  # first differing trace index (osct)
    variable: str | None = None  # first differing leakage variable (osni)

    def to_json(self) -> dict:
        out = {"first": _json(self.first), "second": _json(self.second),
               "observed_first": _json(self.observed_first),
               "observed_second": _json(self.observed_second)}
        if self.position is not None:
            out["position"] = self.position
        if self.variable is not None:
            out["variable"] = self.variable
        return out


@dataclass(frozen=True)
class OracleResult:
    holds: bool
    counterexample: Counterexample | None
    runs: int
    excluded: int
    warnings: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"verdict": "Holds" if self.holds else "Counterexample",
                "runs": self.runs, "excluded": self.excluded,
                "warnings": list(self.warnings),
                "counterexample": self.counterexample.to_json() if self.counterexample else None}


def _json(x: Any) -> Any:
    if hasattr(x, "to_json"):
        return x.to_json()
    if isinstance(x, tuple):
        return [str(e) for e in x]
    if isinstance(x, dict):
        return {k: _json(v) for k, v in x.items()}
    return x


def first_difference(t1: Sequence, t2: Sequence) -> int:
    for i, (a, b) in enumerate(zip(t1, t2)):
        if a != b:
            return i
    return min(len(t1), len(t2))


Execute = Callable[[Any], tuple[Hashable, Any]]
"""Maps an initial state to (public-output projection, observed quantity)."""


def check_groups(states: Iterable[tuple[Hashable, Any]], execute: Execute,
                 max_warnings: int = 10) -> tuple[tuple[int, int, Any, Any, Any, Any] | None,
                                                  int, int, list[str]]:
    """Core pairwise check over ``(input_key, state)`` pairs in canonical order.

    Returns the smallest violating ``(i, j, state_i, state_j, obs_i, obs_j)``
    or ``None``, plus run/exclusion counts and warnings.
    """
    # bucket -> (index of first member, its state, its observation, first disagreeing member)
    buckets: dict[tuple[Hashable, Hashable], list] = {}
    runs = excluded = 0
    warnings: list[str] = []
    for idx, (in_key, state) in enumerate(states):
        try:
            out_key, obs = execute(state)
        except ExecError as exc:
            excluded += 1
            if len(warnings) < max_warnings:
                warnings.append(f"run {idx} excluded: {exc}")
            continue
        runs += 1
        key = (in_key, out_key)
        entry = buckets.get(key)
        if entry is None:
            buckets[key] = [idx, state, obs, None]
        elif entry[3] is None and obs != entry[2]:
            entry[3] = (idx, state, obs)
    best = None
    for i, s_i, o_i, other in buckets.values():
        if other is None:
            continue
        j, s_j, o_j = other
        if best is None or (i, j) < (best[0], best[1]):
            best = (i, j, s_i, s_j, o_i, o_j)
    return best, runs, excluded, warnings


# -- While programs -----------------------------------------------------------

def while_cells(policy: Policy, pins: Mapping[str, Any]) -> list[tuple[str, int | None]]:
    cells: list[tuple[str, int | None]] = [(v, None) for v in sorted(policy.vars) if v not in pins]
    for a in sorted(policy.arrays):
        if a not in pins:
            cells.extend((a, i) for i in range(policy.arrays[a]))
    return cells


def enumerate_stores(policy: Policy, spec: EnumSpec) -> Iterator[Store]:
    """All stores over ``range(spec.domain)`` in canonical order."""
    cells = while_cells(policy, spec.pins)
    total = spec.domain ** len(cells)
    if total > spec.limit():
        raise BudgetExceeded(f"{total} stores exceed the budget of {spec.limit()}")
    pinned_scalars = {k: v for k, v in spec.pins.items() if k not in policy.arrays}
    pinned_arrays = {k: v for k, v in spec.pins.items() if k in policy.arrays}
    for values in itertools.product(range(spec.domain), repeat=len(cells)):
        scalars = dict(pinned_scalars)
        arrays = {a: [0] * n for a, n in policy.arrays.items()}
        arrays.update({k: list(v) for k, v in pinned_arrays.items()})
        for (name, i), val in zip(cells, values):
            if i is None:
                scalars[name] = val
            else:
                arrays[name][i] = val
        yield Store(scalars, arrays)


def _projection(store: Store, names: Iterable[str]) -> tuple:
    return tuple((n, store[n]) for n in sorted(names))


def _while_check(c: Cmd, policy: Policy, spec: EnumSpec, observe: str) -> OracleResult:
    prog = Program(c)
    inputs = sorted(n for n in policy.inputs if n != XL)
    outputs = sorted(policy.outputs)
    leaks = sorted(policy.leaks)

    def execute(store: Store):
        res = prog.run(store, spec.step_cap)
        out_key = _projection(res.store, outputs)
        if observe == "trace":
            return out_key, res.trace
        return out_key, tuple(res.store.get(l) for l in leaks)

    states = ((_projection(s, inputs), s) for s in enumerate_stores(policy, spec))
    best, runs, excluded, warnings = check_groups(states, execute)
    if best is None:
        return OracleResult(True, None, runs, excluded, tuple(warnings))
    _, _, s1, s2, o1, o2 = best
    if observe == "trace":
        cex = Counterexample(s1, s2, o1, o2, position=first_difference(o1, o2))
    else:
        var = next(l for l, a, b in zip(leaks, o1, o2) if a != b)
        cex = Counterexample(s1, s2, o1, o2, variable=var)
    return OracleResult(False, cex, runs, excluded, tuple(warnings))


def check_osni(c: Cmd, policy: Policy, spec: EnumSpec = EnumSpec()) -> OracleResult:
    """Runs agreeing on inputs and final outputs agree on every leakage variable.

    If ``xl`` is a leakage variable it is pinned to the empty trace.
    """
    if XL in policy.leaks and XL not in spec.pins:
        spec = EnumSpec(spec.domain, spec.step_cap, {**spec.pins, XL: ()}, spec.budget)
    return _while_check(c, policy, spec, "leaks")


def check_osct(c: Cmd, policy: Policy, spec: EnumSpec = EnumSpec()) -> OracleResult:
    """Runs agreeing on inputs and final outputs have identical leak traces."""
    return _while_check(c, policy, spec, "trace")


def minimize(c: Cmd, policy: Policy, cex: Counterexample, spec: EnumSpec = EnumSpec(),
             observe: str = "trace") -> Counterexample:
    """Greedily lowers store values towards 0 while the pair stays a violation."""
    prog = Program(c)
    inputs = [n for n in policy.inputs if n != XL]

    def violates(s1: Store, s2: Store) -> tuple | None:
        if _projection(s1, inputs) != _projection(s2, inputs):
            return None
        try:
            r1, r2 = prog.run(s1, spec.step_cap), prog.run(s2, spec.step_cap)
        except ExecError:
            return None
        if _projection(r1.store, policy.outputs) != _projection(r2.store, policy.outputs):
            return None
        if observe == "trace":
            o1, o2 = r1.trace, r2.trace
        else:
            o1 = tuple(r1.store.get(l) for l in sorted(policy.leaks))
            o2 = tuple(r2.store.get(l) for l in sorted(policy.leaks))
        return (o1, o2) if o1 != o2 else None

    s1, s2 = cex.first, cex.second
    obs = violates(s1, s2)
    if obs is None:
        return cex
    changed = True
    while changed:
        changed = False
        for which in (0, 1):
            for name, i in while_cells(policy, spec.pins):
                pair = [s1, s2]
                cur = pair[which][name] if i is None else pair[which][name][i]
                if not isinstance(cur, int) or cur == 0:
                    continue
                new_val = cur - 1
                for k in ((which,) if name not in inputs else (0, 1)):
                    s = pair[k]
                    if i is None:
                        pair[k] = s.set(name, new_val)
                    else:
                        arr = list(s[name])
                        arr[i] = new_val
                        pair[k] = s.set(name, arr)
                o = violates(*pair)
                if o is not None:
                    s1, s2 = pair
                    obs = o
                    changed = True
    o1, o2 = obs
    if observe == "trace":
        return Counterexample(s1, s2, o1, o2, position=first_difference(o1, o2))
    return Counterexample(s1, s2, o1, o2, variable=cex.variable)


def describe(result: OracleResult) -> str:
    if result.holds:
        text = f"Holds ({result.runs} runs, {result.excluded} excluded)"
    else:
        cex = result.counterexample
        assert cex is not None
        lines = [f"Counterexample ({result.runs} runs, {result.excluded} excluded)",
                 f"  first:  {_json(cex.first)}", f"  second: {_json(cex.second)}"]
        if cex.position is not None:
            lines.append(f"  trace 1: {render_trace(cex.observed_first)}")
            lines.append(f"  trace 2: {render_trace(cex.observed_second)}")
            lines.append(f"  traces differ at position {cex.position}")
        else:
            lines.append(f"  leakage variable {cex.variable} differs: "
                         f"{_json(cex.observed_first)} vs {_json(cex.observed_second)}")
        text = "\n".join(lines)
    for w in result.warnings:
        text += f"\n  warning: {w}"
    return text


def trace_of(c: Cmd, store: Store, step_cap: int = DEFAULT_STEP_CAP) -> LeakTrace:
    return Program(c).run(store, step_cap).trace
