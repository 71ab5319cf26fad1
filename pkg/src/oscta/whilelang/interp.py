"""Labeled small-step interpreter for the While language.

Every assignment leaks the values of the array indexes read by its right-hand
side; an array store additionally leaks the written index first; every
conditional test leaks the condition value followed by its index reads.
Sequencing and ``skip`` are silent.

A condition holds iff it evaluates to exactly 1.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from ..secenv import XL, Policy
from ..trace import Branch, LeakTrace, Read, RuntimeFault, Timeout, Write
from .ast import (ArrAssign, ArrRead, Assign, Binop, BranchEv, Cmd, Cons, Expr, If, IntLit,
                  ReadEv, Seq, Skip, Unop, Var, While, WriteEv, index_exprs)

DEFAULT_STEP_CAP = 10_000

Value = Any  # int for program variables; a tuple of events for the leakage variable


@dataclass(frozen=True)
class Store:
    """Scalars map to integers, arrays to fixed-length integer tuples."""

    scalars: Mapping[str, Value] = field(default_factory=dict)
    arrays: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "scalars", dict(self.scalars))
        object.__setattr__(self, "arrays", {k: tuple(v) for k, v in self.arrays.items()})

    def __hash__(self) -> int:
        return hash((frozenset(self.scalars.items()), frozenset(self.arrays.items())))

    def __getitem__(self, name: str) -> Value:
        if name in self.scalars:
            return self.scalars[name]
        return self.arrays[name]

    def get(self, name: str, default: Value = None) -> Value:
        try:
            return self[name]
        except KeyError:
            return default

    def set(self, name: str, value: Value) -> Store:
        if name in self.arrays:
            return Store(self.scalars, {**self.arrays, name: tuple(value)})
        return Store({**self.scalars, name: value}, self.arrays)

    def without(self, name: str) -> Store:
        return Store({k: v for k, v in self.scalars.items() if k != name},
                     {k: v for k, v in self.arrays.items() if k != name})

    def project(self, names) -> dict[str, Value]:
        return {n: self[n] for n in sorted(names) if n in self.scalars or n in self.arrays}

    @classmethod
    def zeros(cls, policy: Policy) -> Store:
        return cls({v: 0 for v in policy.vars},
                   {a: (0,) * n for a, n in policy.arrays.items()})

    @classmethod
    def from_json(cls, doc: Mapping[str, Any], policy: Policy) -> Store:
        """Builds a store from ``name -> int | [int, ...]``; missing names are 0."""
        unknown = set(doc) - policy.variables
        if unknown:
            raise ValueError(f"store names not in the policy: {sorted(unknown)}")
        scalars = {}
        for v in policy.vars:
            val = doc.get(v, 0)
            if not isinstance(val, int) or isinstance(val, bool):
                raise ValueError(f"scalar {v!r} needs an integer, got {val!r}")
            scalars[v] = val
        arrays = {}
        for a, n in policy.arrays.items():
            val = doc.get(a, [0] * n)
            if (not isinstance(val, list) or len(val) != n
                    or not all(isinstance(x, int) and not isinstance(x, bool) for x in val)):
                raise ValueError(f"array {a!r} needs a list of {n} integers, got {val!r}")
            arrays[a] = tuple(val)
        return cls(scalars, arrays)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for k, v in sorted(self.scalars.items()):
            out[k] = [str(e) for e in v] if isinstance(v, tuple) else v
        for k, v in sorted(self.arrays.items()):
            out[k] = list(v)
        return out


@dataclass(frozen=True)
class RunResult:
    store: Store
    trace: LeakTrace
    steps: int


# -- compilation to closures ----------------------------------------------

_BINOPS: dict[str, Callable[[Any, Any], Any]] = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "<": lambda a, b: int(a < b),
    "<=": lambda a, b: int(a <= b),
    "&": operator.and_,
    "|": operator.or_,
}

Env = dict  # mutable name -> int | list[int] | tuple[event, ...]
Thunk = Callable[[Env], Any]


def _array_cell(arr: list[int], name: str, idx: Any) -> int:
    if not isinstance(idx, int) or not 0 <= idx < len(arr):
        raise RuntimeFault(f"index {idx!r} out of bounds for array {name!r} of length {len(arr)}")
    return arr[idx]


def compile_expr(e: Expr) -> Thunk:
    if isinstance(e, IntLit):
        v = e.value
        return lambda m: v
    if isinstance(e, Var):
        name = e.name
        return lambda m: m[name]
    if isinstance(e, ArrRead):
        name, idx = e.array, compile_expr(e.index)
        return lambda m: _array_cell(m[name], name, idx(m))
    if isinstance(e, Unop):
        arg = compile_expr(e.arg)
        return lambda m: int(arg(m) != 1)
    if isinstance(e, Binop):
        fn, left, right = _BINOPS[e.op], compile_expr(e.left), compile_expr(e.right)
        return lambda m: fn(left(m), right(m))
    if isinstance(e, Cons):
        left, right = compile_expr(e.left), compile_expr(e.right)
        return lambda m: left(m) + (right(m),)
    if isinstance(e, BranchEv):
        cond = compile_expr(e.cond)
        return lambda m: Branch(cond(m))
    if isinstance(e, ReadEv):
        parts = [compile_expr(f) for f in e.indexes]
        return lambda m: Read(tuple(p(m) for p in parts))
    if isinstance(e, WriteEv):
        idx = compile_expr(e.index)
        return lambda m: Write(idx(m))
    raise TypeError(f"not an expression: {e!r}")


def _index_reads(e: Expr) -> Thunk:
    parts = [compile_expr(f) for f in index_exprs(e)]
    return lambda m: Read(tuple(p(m) for p in parts))


class Program:
    """A command compiled once for repeated execution."""

    def __init__(self, cmd: Cmd) -> None:
        self.cmd = cmd
        self._root = self._compile(cmd)

    def _compile(self, c: Cmd) -> tuple:
        if isinstance(c, Skip):
            return ("skip",)
        if isinstance(c, Assign):
            return ("assign", c.target, compile_expr(c.expr), _index_reads(c.expr))
        if isinstance(c, ArrAssign):
            return ("store", c.target, compile_expr(c.index), compile_expr(c.expr),
                    _index_reads(c.expr))
        if isinstance(c, Seq):
            return ("seq", self._compile(c.first), self._compile(c.second))
        if isinstance(c, If):
            return ("if", compile_expr(c.cond), _index_reads(c.cond),
                    self._compile(c.then), self._compile(c.orelse))
        if isinstance(c, While):
            return ("while", compile_expr(c.cond), _index_reads(c.cond), self._compile(c.body))
        raise TypeError(f"not a command: {c!r}")

    def run(self, store: Store, step_cap: int = DEFAULT_STEP_CAP) -> RunResult:
        m: Env = dict(store.scalars)
        for a, vals in store.arrays.items():
            m[a] = list(vals)
        trace: list = []
        stack = [self._root]
        steps = 0
        while stack:
            node = stack.pop()
            tag = node[0]
            if tag == "seq":
                stack.append(node[2])
                stack.append(node[1])
                continue
            steps += 1
            if steps > step_cap:
                raise Timeout(step_cap)
            if tag == "assign":
                val = node[2](m)
                trace.append(node[3](m))
                m[node[1]] = val
            elif tag == "store":
                name = node[1]
                arr = m[name]
                idx = node[2](m)
                val = node[3](m)
                _array_cell(arr, name, idx)
                trace.append(Write(idx))
                trace.append(node[4](m))
                arr[idx] = val
            elif tag == "if":
                v = node[1](m)
                trace.append(Branch(v))
                trace.append(node[2](m))
                stack.append(node[3] if v == 1 else node[4])
            elif tag == "while":
                v = node[1](m)
                trace.append(Branch(v))
                trace.append(node[2](m))
                if v == 1:
                    stack.append(node)
                    stack.append(node[3])
        arrays = {a: tuple(m.pop(a)) for a in store.arrays}
        return RunResult(Store(m, arrays), tuple(trace), steps)


def run(c: Cmd, store: Store, step_cap: int = DEFAULT_STEP_CAP) -> RunResult:
    """Executes ``c`` from ``store``; raises Timeout or RuntimeFault."""
    return Program(c).run(store, step_cap)


def eval_expr(e: Expr, store: Store) -> Any:
    m: Env = dict(store.scalars)
    for a, vals in store.arrays.items():
        m[a] = list(vals)
    return compile_expr(e)(m)


def initial_store_with_trace(store: Store) -> Store:
    """``store`` extended with an empty leakage trace in ``xl``."""
    return store.set(XL, ())

