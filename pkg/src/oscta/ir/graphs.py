"""Control-flow analyses feeding the IR type system.

Dominance and post-dominance use the classic iterative set-intersection
algorithm, which is ample for small CFGs.  ``dep(b)`` is the set of branching
blocks whose outcome decides whether ``b`` executes; ``hammock_region`` finds
the blocks on alternative paths into a merge point; ``points_to`` is a
flow-insensitive inclusion-based analysis at memory-block granularity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

from .program import BlockRef, Cond, IrError, IrProgram, Load, Op, Operand, Reg, Store


class UnresolvedAddress(IrError):
    pass


def successors(p: IrProgram) -> dict[str, tuple[str, ...]]:
    return {b: blk.successors for b, blk in p.blocks.items()}


def predecessors(p: IrProgram) -> dict[str, list[str]]:
    preds: dict[str, list[str]] = {b: [] for b in p.blocks}
    for b, blk in p.blocks.items():
        for s in blk.successors:
            preds[s].append(b)
    return preds


def reachable_from(succ: Mapping[str, Iterable[str]], start: str) -> set[str]:
    """Nodes reachable from ``start`` by zero or more edges."""
    seen = {start}
    stack = [start]
    while stack:
        n = stack.pop()
        for m in succ[n]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def _dominator_sets(nodes: list[str], root: str,
                    preds: Mapping[str, Iterable[str]]) -> dict[str, frozenset[str]]:
    universe = frozenset(nodes)
    dom = {n: universe for n in nodes}
    dom[root] = frozenset([root])
    changed = True
    while changed:
        changed = False
        for n in nodes:
            if n == root:
                continue
            ps = [dom[q] for q in preds[n] if q in dom]
            new = frozenset([n]) | (frozenset.intersection(*ps) if ps else frozenset())
            if new != dom[n]:
                dom[n] = new
                changed = True
    return dom


def _immediate(dom: Mapping[str, frozenset[str]]) -> dict[str, str | None]:
    out: dict[str, str | None] = {}
    for n, ds in dom.items():
        strict = ds - {n}
        # the closest strict dominator is the one dominated by all the others
        out[n] = max(strict, key=lambda d: len(dom[d])) if strict else None
    return out


@dataclass(frozen=True)
class DomInfo:
    dom: Mapping[str, frozenset[str]]      # block -> its dominators (reflexive)
    pdom: Mapping[str, frozenset[str]]     # block -> its post-dominators (reflexive)
    idom: Mapping[str, str | None]
    ipdom: Mapping[str, str | None]

    def dominates(self, a: str, b: str) -> bool:
        return a in self.dom.get(b, ())

    def postdominates(self, a: str, b: str) -> bool:
        return a in self.pdom.get(b, ())


def compute_dominators(p: IrProgram) -> DomInfo:
    succ = successors(p)
    preds = predecessors(p)
    fwd = [b for b in p.blocks if b in reachable_from(succ, p.entry)]
    dom = _dominator_sets(fwd, p.entry, {b: [q for q in preds[b] if q in fwd] for b in fwd})
    rev_reach = reachable_from(preds, p.exit)
    bwd = [b for b in p.blocks if b in rev_reach]
    pdom = _dominator_sets(bwd, p.exit, {b: [s for s in succ[b] if s in rev_reach] for b in bwd})
    return DomInfo(dom, pdom, _immediate(dom), _immediate(pdom))


def br(p: IrProgram, b: str) -> str:
    """The branching register of a block ending in ``cond``."""
    t = p.blocks[b].terminator
    if not isinstance(t, Cond):
        raise IrError(f"block {b!r} does not end in a conditional jump")
    return t.reg


def between(p: IrProgram, b_prime: str, b: str, *, inclusive: bool = True) -> set[str]:
    """Blocks after ``b_prime`` on some path ``b_prime -> ... -> b``.

    ``b_prime`` itself is never a candidate; ``b`` is one iff ``inclusive``.
    """
    succ = successors(p)
    preds = predecessors(p)
    after = set()
    for s in succ[b_prime]:
        after |= reachable_from(succ, s)
    before = reachable_from(preds, b)
    out = (after & before) - {b_prime}
    if inclusive:
        out.add(b)
    else:
        out.discard(b)
    return out


def dep(p: IrProgram, dom: DomInfo, b: str, *, inclusive: bool = True) -> frozenset[str]:
    """Conditional blocks dominating ``b`` not yet resolved by a post-dominator."""
    out = set()
    for bp in dom.dom.get(b, ()):
        if not isinstance(p.blocks[bp].terminator, Cond):
            continue
        if not any(dom.postdominates(x, bp) for x in between(p, bp, b, inclusive=inclusive)):
            out.add(bp)
    return frozenset(out)


def hammock_region(p: IrProgram, b_prime: str, b: str, edge: tuple[str, str]) -> frozenset[str]:
    """Interior blocks of paths ``b_prime -> b1 -> ... -> bn -> b`` none of whose
    interior blocks can reach the source of ``edge``.

    Reachability is reflexive, so the source of ``edge`` never qualifies;
    ``b_prime`` and ``b`` themselves are excluded.
    """
    c, target = edge
    if target != b:
        raise ValueError(f"edge {edge} does not enter {b!r}")
    succ = successors(p)
    preds = predecessors(p)
    avoid = reachable_from(preds, c)  # blocks that can reach c
    allowed = set(p.blocks) - avoid
    fwd: set[str] = set()
    stack = [s for s in succ[b_prime] if s in allowed]
    while stack:
        n = stack.pop()
        if n in fwd:
            continue
        fwd.add(n)
        stack.extend(s for s in succ[n] if s in allowed)
    bwd: set[str] = set()
    stack = [q for q in preds[b] if q in allowed]
    while stack:
        n = stack.pop()
        if n in bwd:
            continue
        bwd.add(n)
        stack.extend(q for q in preds[n] if q in allowed)
    return frozenset((fwd & bwd) - {b_prime, b})


# -- points-to ---------------------------------------------------------------

@dataclass(frozen=True)
class PtsMap:
    """Flow-insensitive points-to facts: registers and memory contents."""

    regs: Mapping[str, frozenset[str]]
    contents: Mapping[str, frozenset[str]]

    def of(self, v: Operand) -> frozenset[str]:
        if isinstance(v, Reg):
            return self.regs.get(v.name, frozenset())
        if isinstance(v, BlockRef):
            return frozenset([v.block])
        return frozenset()

    def to_json(self) -> dict:
        return {"registers": {r: sorted(s) for r, s in sorted(self.regs.items()) if s},
                "memory": {b: sorted(s) for b, s in sorted(self.contents.items()) if s}}


def points_to(p: IrProgram, *, check: bool = True) -> PtsMap:
    regs: dict[str, set[str]] = {r: set() for r in p.registers}
    contents: dict[str, set[str]] = {b: set() for b in p.memory}
    for d in p.decls:
        regs[d.register].add(d.block)
    for r, blks in p.ptsto.items():
        regs[r] = set(blks)

    def of(v: Operand) -> set[str]:
        if isinstance(v, Reg):
            return regs[v.name]
        if isinstance(v, BlockRef):
            return {v.block}
        return set()

    instrs = [ins for blk in p.blocks.values() for ins in blk.instrs]
    changed = True
    while changed:
        changed = False
        for ins in instrs:
            if isinstance(ins, Op) and ins.opname == "gep" and ins.dest not in p.ptsto:
                new = of(ins.operands[0]) - regs[ins.dest]
                if new:
                    regs[ins.dest] |= new
                    changed = True
            elif isinstance(ins, Load) and ins.dest not in p.ptsto:
                new: set[str] = set()
                for blk in of(ins.addr):
                    new |= contents.get(blk, set())
                new -= regs[ins.dest]
                if new:
                    regs[ins.dest] |= new
                    changed = True
            elif isinstance(ins, Store):
                src = of(ins.value)
                for blk in of(ins.addr):
                    if blk in contents and not src <= contents[blk]:
                        contents[blk] |= src
                        changed = True
    pts = PtsMap({r: frozenset(s) for r, s in regs.items()},
                 {b: frozenset(s) for b, s in contents.items()})
    if check:
        for b, blk in p.blocks.items():
            for n, ins in enumerate(blk.instrs):
                if isinstance(ins, (Load, Store)) and not pts.of(ins.addr):
                    raise UnresolvedAddress(
                        f"unresolved address {ins.addr} at ({b}, {n}): empty points-to set")
    return pts


class Graphs:
    """All CFG facts the type system needs, computed once per program."""

    def __init__(self, p: IrProgram, *, dep_inclusive: bool = True) -> None:
        self.program = p
        self.dom = compute_dominators(p)
        self.pts = points_to(p)
        self.preds = predecessors(p)
        self.dep_inclusive = dep_inclusive

    @cached_property
    def deps(self) -> dict[str, frozenset[str]]:
        return {b: dep(self.program, self.dom, b, inclusive=self.dep_inclusive)
                for b in self.program.blocks if b in self.dom.dom}

    @cached_property
    def branch_registers(self) -> dict[str, tuple[str, ...]]:
        return {b: tuple(sorted(br(self.program, d) for d in ds)) for b, ds in self.deps.items()}

    def assigned_outputs(self, blocks: Iterable[str], outputs: frozenset[str]) -> frozenset[str]:
        out: set[str] = set()
        for b in blocks:
            for ins in self.program.blocks[b].instrs:
                if isinstance(ins, (Op, Load)) and ins.dest in outputs:
                    out.add(ins.dest)
                elif isinstance(ins, Store):
                    out |= self.pts.of(ins.addr) & outputs
        return frozenset(out)

    def region(self, edge: tuple[str, str]) -> frozenset[str]:
        _, b = edge
        idom = self.dom.idom.get(b)
        if idom is None:
            return frozenset()
        return hammock_region(self.program, idom, b, edge)

    def to_json(self) -> dict:
        p = self.program
        return {
            "idom": {b: d for b, d in sorted(self.dom.idom.items())},
            "ipdom": {b: d for b, d in sorted(self.dom.ipdom.items())},
            "dep": {b: sorted(d) for b, d in sorted(self.deps.items())},
            "regions": {f"{c}->{b}": sorted(self.region((c, b))) for c, b in p.edges()},
            "ptsto": self.pts.to_json(),
        }

