"""Programs of the simplified IR: basic blocks over five instruction forms.

Registers are named ``%r`` or ``@g``; memory blocks are plain identifiers.
``global @g -> blk n`` and ``alloca %r -> blk n`` declare a memory block of
``n`` integer cells together with a register holding its base address.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

OPS_ARITY = {"add": 2, "sub": 2, "mul": 2, "eq": 2, "lt": 2, "and": 2, "not": 1}
VARIADIC_OPS = {"gep": 2}  # name -> minimum operand count


class IrError(ValueError):
    """Malformed or invalid IR program."""


@dataclass(frozen=True)
class Imm:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Reg:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class BlockRef:
    """The address of the first cell of a memory block, used as a literal."""

    block: str

    def __str__(self) -> str:
        return self.block


Operand = Union[Imm, Reg, BlockRef]


@dataclass(frozen=True)
class Op:
    dest: str
    opname: str
    operands: tuple[Operand, ...]

    def __str__(self) -> str:
        return f"{self.dest} = op {self.opname} " + " ".join(map(str, self.operands))


@dataclass(frozen=True)
class Load:
    dest: str
    addr: Operand

    def __str__(self) -> str:
        return f"{self.dest} = load {self.addr}"


@dataclass(frozen=True)
class Store:
    value: Operand
    addr: Operand

    def __str__(self) -> str:
        return f"store {self.value} {self.addr}"


@dataclass(frozen=True)
class Cond:
    reg: str
    then_block: str
    else_block: str

    def __str__(self) -> str:
        return f"cond {self.reg} {self.then_block} {self.else_block}"


@dataclass(frozen=True)
class Goto:
    target: str

    def __str__(self) -> str:
        return f"goto {self.target}"


Instr = Union[Op, Load, Store, Cond, Goto]
Terminator = Union[Cond, Goto]


@dataclass(frozen=True)
class Block:
    name: str
    instrs: tuple[Instr, ...]

    @property
    def terminator(self) -> Terminator | None:
        if self.instrs and isinstance(self.instrs[-1], (Cond, Goto)):
            return self.instrs[-1]  # type: ignore[return-value]
        return None

    @property
    def successors(self) -> tuple[str, ...]:
        t = self.terminator
        if isinstance(t, Cond):
            return (t.then_block, t.else_block) if t.then_block != t.else_block else (t.then_block,)
        if isinstance(t, Goto):
            return (t.target,)
        return ()


@dataclass(frozen=True)
class MemDecl:
    register: str
    block: str
    length: int
    kind: str  # "global" or "alloca"


@dataclass(frozen=True)
class IrProgram:
    blocks: Mapping[str, Block]
    entry: str
    exit: str
    decls: tuple[MemDecl, ...] = ()
    ptsto: Mapping[str, frozenset[str]] = field(default_factory=dict)

    @property
    def memory(self) -> dict[str, int]:
        """Memory block name -> number of cells."""
        return {d.block: d.length for d in self.decls}

    @property
    def address_registers(self) -> dict[str, str]:
        return {d.register: d.block for d in self.decls}

    @property
    def registers(self) -> frozenset[str]:
        regs = set(self.address_registers)
        for b in self.blocks.values():
            for ins in b.instrs:
                if isinstance(ins, (Op, Load)):
                    regs.add(ins.dest)
                if isinstance(ins, Cond):
                    regs.add(ins.reg)
                for v in operands_of(ins):
                    if isinstance(v, Reg):
                        regs.add(v.name)
        regs.update(self.ptsto)
        return frozenset(regs)

    @property
    def variables(self) -> frozenset[str]:
        return self.registers | frozenset(self.memory)

    def points(self) -> list[tuple[str, int]]:
        return [(b, n) for b, blk in self.blocks.items() for n in range(len(blk.instrs))]

    def edges(self) -> list[tuple[str, str]]:
        return [(b, s) for b, blk in self.blocks.items() for s in blk.successors]

    def render(self) -> str:
        lines = []
        for d in self.decls:
            lines.append(f"{d.kind} {d.register} -> {d.block} {d.length}")
        lines.append(f"entry {self.entry}")
        lines.append(f"exit {self.exit}")
        for r, blks in sorted(self.ptsto.items()):
            lines.append(f"ptsto {r} {{{', '.join(sorted(blks))}}}")
        for b in self.blocks.values():
            lines.append(f"block {b.name}:")
            lines.extend(f"  {ins}" for ins in b.instrs)
        return "\n".join(lines) + "\n"


def operands_of(ins: Instr) -> tuple[Operand, ...]:
    if isinstance(ins, Op):
        return ins.operands
    if isinstance(ins, Load):
        return (ins.addr,)
    if isinstance(ins, Store):
        return (ins.value, ins.addr)
    if isinstance(ins, Cond):
        return (Reg(ins.reg),)
    return ()


def defined_register(ins: Instr) -> str | None:
    return ins.dest if isinstance(ins, (Op, Load)) else None
