"""Reifying leakage as explicit assignments to the leakage variable ``xl``.

``instrument(c)`` inserts, before every assignment and every test, an update
``xl := xl : <events>`` that appends exactly the events the labeled semantics
would emit at that point.  Running the instrumented program from a store with
``xl = ()`` therefore ends with ``xl`` holding the leak trace of ``c``, and
constant time of ``c`` reduces to noninterference of ``instrument(c)`` with
``xl`` as the only leakage variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..lattice import BOTTOM
from ..secenv import XL, Policy, TypeEnv
from ..trace import ExecError
from .ast import (ArrAssign, Assign, BranchEv, Cmd, Cons, Expr, If, ReadEv, Seq, Skip, Var,
                  While, WriteEv, cmd_vars, index_exprs)
from .interp import Program, Store
from .typecheck import Checker, Mode


class InstrumentError(ValueError):
    pass


def _leak_update(*events: Expr) -> Assign:
    rhs: Expr = Var(XL)
    for ev in events:
        rhs = Cons(rhs, ev)
    return Assign(XL, rhs)


def _reads(e: Expr) -> ReadEv:
    return ReadEv(tuple(index_exprs(e)))


def instrument(c: Cmd) -> Cmd:
    if XL in cmd_vars(c):
        raise InstrumentError(f"{XL!r} already occurs in the program")
    return _omega(c)


def _omega(c: Cmd) -> Cmd:
    if isinstance(c, Skip):
        return c
    if isinstance(c, Assign):
        return Seq(_leak_update(_reads(c.expr)), c)
    if isinstance(c, ArrAssign):
        return Seq(_leak_update(WriteEv(c.index), _reads(c.expr)), c)
    if isinstance(c, Seq):
        return Seq(_omega(c.first), _omega(c.second))
    if isinstance(c, If):
        test = _leak_update(BranchEv(c.cond), _reads(c.cond))
        return Seq(test, If(c.cond, _omega(c.then), _omega(c.orelse)))
    if isinstance(c, While):
        test = _leak_update(BranchEv(c.cond), _reads(c.cond))
        return Seq(test, While(c.cond, Seq(_omega(c.body), test)))
    raise TypeError(f"not a command: {c!r}")


def is_leak_update(c: Cmd) -> bool:
    return isinstance(c, Assign) and c.target == XL


def erase(c: Cmd) -> Cmd:
    """Removes every assignment to ``xl``; ``erase(instrument(c)) == c``."""
    if is_leak_update(c):
        return Skip()
    if isinstance(c, Seq):
        if is_leak_update(c.first):
            return erase(c.second)
        if is_leak_update(c.second):
            return erase(c.first)
        return Seq(erase(c.first), erase(c.second))
    if isinstance(c, If):
        return If(c.cond, erase(c.then), erase(c.orelse))
    if isinstance(c, While):
        return While(c.cond, erase(c.body))
    return c


@dataclass
class EquivalenceReport:
    """Outcome of comparing a program against its instrumented version."""

    typing_mismatches: list[tuple[str, str, str]] = field(default_factory=list)
    trace_mismatches: list[dict] = field(default_factory=list)
    stores_checked: int = 0
    stores_skipped: int = 0

    @property
    def ok(self) -> bool:
        return not self.typing_mismatches and not self.trace_mismatches


def typing_agreement(c: Cmd, env: TypeEnv, mode: Mode = Mode.CT) -> list[tuple[str, str, str]]:
    """Variables on which ``mode``-typing ``c`` differs from base-typing ``instrument(c)``."""
    ct = Checker(mode).type_cmd(BOTTOM, env, c)
    base = Checker(Mode.BASE).type_cmd(BOTTOM, env, instrument(c))
    return [(v, str(ct[v]), str(base[v])) for v in env if ct[v] != base[v]]


def check_equivalences(c: Cmd, policy: Policy, sample_stores: Iterable[Store],
                       step_cap: int = 10_000, mode: Mode = Mode.CT) -> EquivalenceReport:
    """Checks that instrumentation preserves both typing and semantics of ``c``.

    (a) typing ``c`` in ``mode`` and base-typing ``instrument(c)`` give equal
    environments; (b) for every sample store, the trace of ``c`` equals the
    final ``xl`` of ``instrument(c)`` and the remaining variables agree.
    """
    report = EquivalenceReport()
    report.typing_mismatches = typing_agreement(c, policy.initial_env(), mode)
    plain, instr = Program(c), Program(instrument(c))
    for store in sample_stores:
        try:
            r1 = plain.run(store, step_cap)
        except ExecError:
            report.stores_skipped += 1
            continue
        # the instrumented program runs a few more steps per original step
        r2 = instr.run(store.set(XL, ()), 2 * step_cap + 1)
        report.stores_checked += 1
        if r2.store[XL] != r1.trace or r2.store.without(XL) != r1.store:
            report.trace_mismatches.append({
                "store": store.to_json(),
                "trace": [str(e) for e in r1.trace],
                "xl": [str(e) for e in r2.store[XL]],
            })
    return report
