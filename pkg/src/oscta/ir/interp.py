"""Labeled small-step interpreter for IR programs and its oracle adapter.

A configuration is a control point ``(b, n)``, a register file and a memory
mapping each memory block to a fixed-length list of cells.  Addresses are
``Addr(block, offset)`` values; ``gep`` adds integer indexes to the offset of
its base address.  ``load`` emits ``r(addr)``, ``store`` emits ``w(addr)`` and
``cond`` emits ``j(1)`` or ``j(0)``; everything else is silent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

from ..oracle import (BudgetExceeded, Counterexample, EnumSpec, OracleResult, check_groups,
                      first_difference)
from ..secenv import XL, Policy
from ..trace import Jump, LeakEvent, LeakTrace, Read, RuntimeFault, Timeout, Write
from ..whilelang.interp import DEFAULT_STEP_CAP
from .program import Cond, Goto, Imm, IrProgram, Load, Op, Operand, Reg, Store


@dataclass(frozen=True, order=True)
class Addr:
    block: str
    offset: int

    def __str__(self) -> str:
        return f"({self.block},{self.offset})"


Value = Any  # int | Addr


@dataclass(frozen=True)
class IrState:
    """Final (or initial) register file and memory of a run."""

    registers: Mapping[str, Value]
    memory: Mapping[str, tuple[Value, ...]]

    def __getitem__(self, name: str) -> Value:
        if name in self.memory:
            return self.memory[name]
        return self.registers.get(name, 0)

    def project(self, names) -> tuple:
        return tuple((n, self[n]) for n in sorted(names))

    def to_json(self) -> dict:
        def conv(v):
            if isinstance(v, tuple):
                return [conv(x) for x in v]
            return v if isinstance(v, int) else str(v)
        return {"registers": {r: conv(v) for r, v in sorted(self.registers.items())},
                "memory": {b: conv(v) for b, v in sorted(self.memory.items())}}


@dataclass(frozen=True)
class IrRun:
    state: IrState
    trace: LeakTrace
    steps: int
    path: tuple[str, ...] = field(default=())


def initial_state(p: IrProgram, memory: Mapping[str, Any] | None = None) -> IrState:
    """Registers are 0 except address registers; memory defaults to zeros."""
    memory = dict(memory or {})
    mem = {}
    for b, n in p.memory.items():
        cells = tuple(memory.pop(b, (0,) * n))
        if len(cells) != n:
            raise ValueError(f"memory block {b} needs {n} cells, got {len(cells)}")
        mem[b] = cells
    if memory:
        raise ValueError(f"unknown memory blocks {sorted(memory)}")
    regs: dict[str, Value] = {r: 0 for r in p.registers}
    for d in p.decls:
        regs[d.register] = Addr(d.block, 0)
    return IrState(regs, mem)


def _int(v: Value, what: str) -> int:
    if not isinstance(v, int):
        raise RuntimeFault(f"{what} applied to address {v}")
    return v


def apply_op(name: str, args: list[Value]) -> Value:
    if name == "gep":
        base = args[0]
        if not isinstance(base, Addr):
            raise RuntimeFault(f"gep base {base} is not an address")
        return Addr(base.block, base.offset + sum(_int(a, "gep index") for a in args[1:]))
    if name == "eq":
        return int(args[0] == args[1])
    if name == "not":
        return int(_int(args[0], "not") != 1)
    a, b = (_int(x, name) for x in args)
    if name == "add":
        return a + b
    if name == "sub":
        return a - b
    if name == "mul":
        return a * b
    if name == "lt":
        return int(a < b)
    if name == "and":
        return a & b
    raise RuntimeFault(f"unknown operation {name}")


def run_ir(p: IrProgram, init: IrState | None = None,
           step_cap: int = DEFAULT_STEP_CAP) -> IrRun:
    """Executes from ``(entry, 0)`` until the end of the exit block."""
    state = init or initial_state(p)
    regs = dict(state.registers)
    mem = {b: list(cells) for b, cells in state.memory.items()}
    trace: list[LeakEvent] = []
    path = [p.entry]

    def val(v: Operand) -> Value:
        if isinstance(v, Imm):
            return v.value
        if isinstance(v, Reg):
            return regs.get(v.name, 0)
        return Addr(v.block, 0)

    def cell(v: Operand) -> Addr:
        ad = val(v)
        if not isinstance(ad, Addr) or ad.block not in mem:
            raise RuntimeFault(f"{v} = {ad} does not name a memory block")
        if not 0 <= ad.offset < len(mem[ad.block]):
            raise RuntimeFault(f"address {ad} out of bounds")
        return ad

    b, n, steps = p.entry, 0, 0
    blocks = p.blocks
    while True:
        instrs = blocks[b].instrs
        if n >= len(instrs):
            if b == p.exit:
                break
            raise RuntimeFault(f"fell off the end of block {b}")
        steps += 1
        if steps > step_cap:
            raise Timeout(step_cap)
        ins = instrs[n]
        if isinstance(ins, Op):
            regs[ins.dest] = apply_op(ins.opname, [val(v) for v in ins.operands])
        elif isinstance(ins, Load):
            ad = cell(ins.addr)
            trace.append(Read((ad,)))
            regs[ins.dest] = mem[ad.block][ad.offset]
        elif isinstance(ins, Store):
            ad = cell(ins.addr)
            trace.append(Write(ad))
            mem[ad.block][ad.offset] = val(ins.value)
        elif isinstance(ins, Cond):
            v = regs.get(ins.reg, 0)
            if v == 1 and isinstance(v, int):
                trace.append(Jump(1))
                b = ins.then_block
            elif v == 0 and isinstance(v, int):
                trace.append(Jump(0))
                b = ins.else_block
            else:
                raise RuntimeFault(f"branching register {ins.reg} holds {v}, not 0 or 1")
            n = 0
            path.append(b)
            continue
        elif isinstance(ins, Goto):
            b, n = ins.target, 0
            path.append(b)
            continue
        n += 1
    final = IrState(regs, {k: tuple(v) for k, v in mem.items()})
    return IrRun(final, tuple(trace), steps, tuple(path))


# -- oracle --------------------------------------------------------------------

def ir_cells(p: IrProgram) -> list[tuple[str, int]]:
    return [(b, i) for b in sorted(p.memory) for i in range(p.memory[b])]


def enumerate_memories(p: IrProgram, spec: EnumSpec) -> Iterator[IrState]:
    """All initial memories over ``range(spec.domain)`` in canonical order."""
    cells = [c for c in ir_cells(p) if c[0] not in spec.pins]
    total = spec.domain ** len(cells)
    if total > spec.limit():
        raise BudgetExceeded(f"{total} memories exceed the budget of {spec.limit()}")
    base = initial_state(p)
    for values in itertools.product(range(spec.domain), repeat=len(cells)):
        mem = {b: list(v) for b, v in base.memory.items()}
        for b, v in spec.pins.items():
            mem[b] = list(v)
        for (b, i), x in zip(cells, values):
            mem[b][i] = x
        yield IrState(base.registers, {b: tuple(v) for b, v in mem.items()})


def check_ir_osct(p: IrProgram, policy: Policy, spec: EnumSpec = EnumSpec()) -> OracleResult:
    """Runs with equal public-input memory and equal final outputs leak identically."""
    inputs = sorted(n for n in policy.inputs if n != XL)
    outputs = sorted(policy.outputs)

    def execute(state: IrState):
        res = run_ir(p, state, spec.step_cap)
        return res.state.project(outputs), res.trace

    states = ((s.project(inputs), s) for s in enumerate_memories(p, spec))
    best, runs, excluded, warnings = check_groups(states, execute)
    if best is None:
        return OracleResult(True, None, runs, excluded, tuple(warnings))
    _, _, s1, s2, o1, o2 = best
    # registers always start the same, so the initial memories identify the runs
    cex = Counterexample(_memory_json(s1), _memory_json(s2), o1, o2,
                         position=first_difference(o1, o2))
    return OracleResult(False, cex, runs, excluded, tuple(warnings))


def _memory_json(state: IrState) -> dict:
    return {b: list(v) for b, v in sorted(state.memory.items())}
