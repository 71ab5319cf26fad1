"""Independent reference implementations used as test oracles.

The oracles reuse none of the package's evaluators or graph algorithms: the
While evaluator is a direct recursive interpreter, and the CFG facts are
computed by enumerating paths, straight from their definitions.  Only
``cfg_mismatches`` calls into the package, to compare it against them.
"""

from __future__ import annotations

import itertools
from typing import Any, Iterator

from oscta.ir.graphs import compute_dominators, dep, hammock_region
from oscta.ir.program import Block, Cond, Goto, Imm, IrProgram, Op
from oscta.trace import Branch, Read, RuntimeFault, Write
from oscta.whilelang.ast import (ArrAssign, ArrRead, Assign, Binop, Cmd, Expr, If, IntLit, Seq,
                                 Skip, Unop, Var, While)
from oscta.whilelang.interp import Store

# -- While ------------------------------------------------------------------------


def _eval(e: Expr, m: dict) -> Any:
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, Var):
        return m[e.name]
    if isinstance(e, ArrRead):
        i = _eval(e.index, m)
        arr = m[e.array]
        if not 0 <= i < len(arr):
            raise RuntimeFault("out of bounds")
        return arr[i]
    if isinstance(e, Unop):
        return 0 if _eval(e.arg, m) == 1 else 1
    if isinstance(e, Binop):
        a, b = _eval(e.left, m), _eval(e.right, m)
        return {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
                "==": lambda: 1 if a == b else 0, "!=": lambda: 1 if a != b else 0,
                "<": lambda: 1 if a < b else 0, "<=": lambda: 1 if a <= b else 0,
                "&": lambda: a & b, "|": lambda: a | b}[e.op]()
    raise TypeError(e)


def _indexes(e: Expr) -> list[Expr]:
    """Index expressions of array reads in ``e``, left to right."""
    if isinstance(e, ArrRead):
        return [e.index]
    if isinstance(e, Unop):
        return _indexes(e.arg)
    if isinstance(e, Binop):
        return _indexes(e.left) + _indexes(e.right)
    return []


def run_reference(c: Cmd, store: Store, fuel: int = 10_000):
    """Returns (final store, trace); raises RuntimeFault or RecursionError/ValueError."""
    m: dict = dict(store.scalars)
    for a, vals in store.arrays.items():
        m[a] = list(vals)
    trace: list = []
    steps = [0]

    def tick() -> None:
        steps[0] += 1
        if steps[0] > fuel:
            raise ValueError("out of fuel")

    def reads(e: Expr) -> Read:
        return Read(tuple(_eval(f, m) for f in _indexes(e)))

    def go(c: Cmd) -> None:
        if isinstance(c, Skip):
            tick()
        elif isinstance(c, Assign):
            tick()
            v = _eval(c.expr, m)
            trace.append(reads(c.expr))
            m[c.target] = v
        elif isinstance(c, ArrAssign):
            tick()
            i, v = _eval(c.index, m), _eval(c.expr, m)
            if not 0 <= i < len(m[c.target]):
                raise RuntimeFault("out of bounds")
            trace.extend([Write(i), reads(c.expr)])
            m[c.target][i] = v
        elif isinstance(c, Seq):
            go(c.first)
            go(c.second)
        elif isinstance(c, If):
            tick()
            v = _eval(c.cond, m)
            trace.extend([Branch(v), reads(c.cond)])
            go(c.then if v == 1 else c.orelse)
        elif isinstance(c, While):
            while True:
                tick()
                v = _eval(c.cond, m)
                trace.extend([Branch(v), reads(c.cond)])
                if v != 1:
                    break
                go(c.body)

    go(c)
    arrays = {a: tuple(m.pop(a)) for a in store.arrays}
    return Store(m, arrays), tuple(trace)


# -- CFG shapes ---------------------------------------------------------------------

Shape = dict[str, tuple[str, ...]]


def shape_program(succ: Shape, entry: str, exit_: str) -> IrProgram:
    """An IR program with the given CFG; conditions are dummy fresh registers."""
    blocks = {}
    for i, (b, ss) in enumerate(succ.items()):
        if len(ss) == 2:
            r = f"%c{i}"
            instrs = (Op(r, "eq", (Imm(0), Imm(0))), Cond(r, ss[0], ss[1]))
        elif len(ss) == 1:
            instrs = (Goto(ss[0]),)
        else:
            instrs = ()
        blocks[b] = Block(b, instrs)
    return IrProgram(blocks, entry, exit_)


def _reach(succ: Shape, a: str) -> set[str]:
    seen, stack = {a}, [a]
    while stack:
        for m in succ[stack.pop()]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def valid_shape(succ: Shape, entry: str, exit_: str) -> bool:
    live = _reach(succ, entry)
    return all(exit_ in _reach(succ, b) for b in live)


def all_shapes(n: int) -> Iterator[Shape]:
    """Every CFG of the generator family on ``n`` blocks B0..B{n-1}.

    Non-exit blocks end in a goto (any target) or a two-way cond (distinct
    targets); the exit B{n-1} has no successors.  Only shapes whose exit is
    reachable from every reachable block are produced.
    """
    names = [f"B{i}" for i in range(n)]
    choices = [(t,) for t in names] + list(itertools.combinations(names, 2))
    for combo in itertools.product(choices, repeat=n - 1):
        succ = dict(zip(names[:-1], combo))
        succ[names[-1]] = ()
        if valid_shape(succ, names[0], names[-1]):
            yield succ


def _relabel(succ: Shape, mapping: dict[str, str]) -> tuple:
    return tuple(sorted((mapping[b], tuple(sorted(mapping[t] for t in ss)))
                        for b, ss in succ.items()))


def shapes_up_to_relabelling(n: int) -> Iterator[Shape]:
    """One representative of every class of :func:`all_shapes` under renaming
    of the interior blocks (entry and exit keep their names).

    Dominance, ``dep`` and hammock regions are defined on the graph alone, so
    checking one representative per class covers the whole class.
    """
    names = [f"B{i}" for i in range(n)]
    interior = names[1:-1]
    perms = [dict(zip(interior, p), **{names[0]: names[0], names[-1]: names[-1]})
             for p in itertools.permutations(interior)]
    for succ in all_shapes(n):
        key = _relabel(succ, perms[0])
        if all(key <= _relabel(succ, m) for m in perms[1:]):
            yield succ


def random_shape(rng, n: int) -> Shape:
    names = [f"B{i}" for i in range(n)]
    choices = [(t,) for t in names] + list(itertools.combinations(names, 2))
    while True:
        succ = {b: rng.choice(choices) for b in names[:-1]}
        succ[names[-1]] = ()
        if valid_shape(succ, names[0], names[-1]):
            return succ


# -- path-enumeration oracles -----------------------------------------------------


def simple_paths(succ: Shape, src: str, dst: str) -> Iterator[list[str]]:
    stack = [(src, [src])]
    while stack:
        n, path = stack.pop()
        if n == dst:
            yield path
            continue
        for m in succ[n]:
            if m not in path:
                stack.append((m, path + [m]))


def walks(succ: Shape, src: str, dst: str, max_len: int) -> Iterator[list[str]]:
    """Walks src -> ... -> dst with at least one edge and at most ``max_len`` edges."""
    stack = [(src, [src])]
    while stack:
        n, path = stack.pop()
        if len(path) > 1 and n == dst:
            yield path
        if len(path) - 1 < max_len:
            for m in succ[n]:
                stack.append((m, path + [m]))


def dominates(succ: Shape, entry: str, a: str, b: str) -> bool:
    return all(a in p for p in simple_paths(succ, entry, b))


def postdominates(succ: Shape, exit_: str, a: str, b: str) -> bool:
    return all(a in p for p in simple_paths(succ, b, exit_))


def dep_oracle(succ: Shape, entry: str, exit_: str, b: str, inclusive: bool = True) -> set[str]:
    n = len(succ)
    out = set()
    for bp in succ:
        if len(succ[bp]) != 2 or not dominates(succ, entry, bp, b):
            continue
        between = set()
        for w in walks(succ, bp, b, 2 * n):
            between.update(w[1:-1])
        between.discard(bp)
        if inclusive:
            between.add(b)
        else:
            between.discard(b)
        if not any(postdominates(succ, exit_, x, bp) for x in between):
            out.add(bp)
    return out


def region_oracle(succ: Shape, bp: str, b: str, c: str) -> set[str]:
    n = len(succ)
    bad = {x for x in succ if c in _reach(succ, x)}
    out = set()
    for w in walks(succ, bp, b, 2 * n):
        interior = w[1:-1]
        if interior and not any(x in bad for x in interior):
            out.update(interior)
    return out - {bp, b}


def idom_oracle(succ: Shape, entry: str, b: str) -> str | None:
    live = _reach(succ, entry)
    strict = [a for a in live if a != b and dominates(succ, entry, a, b)]
    for a in strict:
        if all(dominates(succ, entry, d, a) for d in strict):
            return a
    return None


# -- comparison ---------------------------------------------------------------------


def cfg_mismatches(succ: Shape) -> list[str]:
    """Where the package's dominators, ``dep`` (both readings) and hammock
    regions disagree with the path-enumeration oracles on one CFG shape."""
    names = list(succ)
    entry, exit_ = names[0], names[-1]
    p = shape_program(succ, entry, exit_)
    d = compute_dominators(p)
    bad = []
    for b in names:
        if b not in d.dom:
            continue
        for inclusive in (True, False):
            if dep(p, d, b, inclusive=inclusive) != dep_oracle(succ, entry, exit_, b, inclusive):
                bad.append(f"dep {b} {inclusive}")
        if d.idom[b] != idom_oracle(succ, entry, b):
            bad.append(f"idom {b}")
        if d.idom[b] is None:
            continue
        for c in names:
            if b in succ[c] and c in d.dom:
                if hammock_region(p, d.idom[b], b, (c, b)) != region_oracle(succ, d.idom[b], b, c):
                    bad.append(f"region {c}->{b}")
    return bad
