"""Seeded random generators for While programs, IR programs and their policies.

Generated programs are small enough for exhaustive oracle checks: few
variables, arrays of length 2 with indexes masked into range, and loops that
mostly run a bounded number of times.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .secenv import XL, Policy
from .whilelang.ast import (ArrAssign, ArrRead, Assign, Binop, Cmd, Expr, If, IntLit, Seq,
                            Skip, Unop, Var, While)


@dataclass(frozen=True)
class WhileShape:
    max_scalars: int = 4
    max_arrays: int = 1
    array_len: int = 2
    max_depth: int = 4
    allow_branching: bool = True
    allow_loops: bool = True


def random_policy(rng: random.Random, shape: WhileShape) -> Policy:
    n = rng.randint(1, shape.max_scalars)
    scalars = [f"v{i}" for i in range(n)]
    arrays = {f"a{i}": shape.array_len for i in range(rng.randint(0, shape.max_arrays))}
    names = scalars + sorted(arrays)
    inputs = frozenset(v for v in names if rng.random() < 0.4)
    outputs = frozenset(v for v in scalars if rng.random() < 0.35)
    return Policy(frozenset(scalars), arrays, inputs, outputs, frozenset([XL]))


class _WhileGen:
    def __init__(self, rng: random.Random, policy: Policy, shape: WhileShape) -> None:
        self.rng = rng
        self.scalars = sorted(policy.vars)
        self.arrays = sorted(policy.arrays)
        self.shape = shape

    def index(self) -> Expr:
        r = self.rng.random()
        if r < 0.3:
            return IntLit(self.rng.randint(0, self.shape.array_len - 1))
        # masking keeps every index inside an array of length 2
        return Binop("&", Var(self.rng.choice(self.scalars)), IntLit(1))

    def expr(self, depth: int = 2) -> Expr:
        r = self.rng.random()
        if depth == 0 or r < 0.3:
            r2 = self.rng.random()
            if self.arrays and r2 < 0.25:
                return ArrRead(self.rng.choice(self.arrays), self.index())
            if r2 < 0.45:
                return IntLit(self.rng.randint(0, 2))
            return Var(self.rng.choice(self.scalars))
        if r < 0.4:
            return Unop("!", self.expr(depth - 1))
        op = self.rng.choice(["+", "-", "*", "==", "!=", "<", "<=", "&", "|"])
        return Binop(op, self.expr(depth - 1), self.expr(depth - 1))

    def cond(self) -> Expr:
        op = self.rng.choice(["==", "<", "&", "!="])
        return Binop(op, self.expr(1), self.expr(1))

    def simple(self) -> Cmd:
        r = self.rng.random()
        if self.arrays and r < 0.2:
            return ArrAssign(self.rng.choice(self.arrays), self.index(), self.expr())
        if r < 0.25:
            return Skip()
        return Assign(self.rng.choice(self.scalars), self.expr())

    def cmd(self, depth: int) -> Cmd:
        if depth <= 1:
            return self.simple()
        r = self.rng.random()
        if r < 0.35:
            return Seq(self.cmd(depth - 1), self.cmd(depth - 1))
        if r < 0.6 and self.shape.allow_branching:
            return If(self.cond(), self.cmd(depth - 1), self.cmd(depth - 1))
        if r < 0.78 and self.shape.allow_branching and self.shape.allow_loops:
            return self.loop(depth)
        return self.simple()

    def loop(self, depth: int) -> Cmd:
        k = self.rng.choice(self.scalars)
        if self.rng.random() < 0.8:
            # counted loop: at most two iterations unless the body resets the counter
            body = Seq(self.cmd(depth - 2) if depth > 2 else Skip(),
                       Assign(k, Binop("+", Var(k), IntLit(1))))
            return While(Binop("<", Var(k), IntLit(2)), body)
        return While(Binop("==", Var(k), IntLit(1)),
                     Seq(self.cmd(depth - 2) if depth > 2 else Skip(), Assign(k, IntLit(0))))


def random_while(rng: random.Random, shape: WhileShape = WhileShape(),
                 policy: Policy | None = None) -> tuple[Policy, Cmd]:
    policy = policy or random_policy(rng, shape)
    gen = _WhileGen(rng, policy, shape)
    return policy, gen.cmd(rng.randint(1, shape.max_depth))


def while_corpus(seed: int, count: int, shape: WhileShape = WhileShape()):
    rng = random.Random(seed)
    for _ in range(count):
        yield random_while(rng, shape)


# -- IR programs ----------------------------------------------------------------

@dataclass(frozen=True)
class IrShape:
    max_blocks: int = 6
    max_memory: int = 2
    block_len: int = 2
    max_instrs: int = 3
    back_edge_prob: float = 0.2


class _IrGen:
    def __init__(self, rng: random.Random, shape: IrShape) -> None:
        self.rng = rng
        self.shape = shape
        self.memory = [f"m{i}" for i in range(rng.randint(1, shape.max_memory))]
        self.bases = {m: f"@g{i}" for i, m in enumerate(self.memory)}
        self.values: list[str] = []   # registers holding integers
        self.count = 0

    def fresh(self) -> str:
        self.count += 1
        return f"%r{self.count}"

    def operand(self) -> str:
        if self.values and self.rng.random() < 0.7:
            return self.rng.choice(self.values)
        return str(self.rng.randint(0, 1))

    def address(self, out: list[str]) -> str:
        base = self.bases[self.rng.choice(self.memory)]
        if self.rng.random() < 0.3:
            return base
        idx = self.operand()
        masked = self.fresh()
        out.append(f"{masked} = op and {idx} 1")
        addr = self.fresh()
        out.append(f"{addr} = op gep {base} {masked}")
        return addr

    def value_dest(self) -> str:
        if self.values and self.rng.random() < 0.15:
            return self.rng.choice(self.values)  # a multiply-assigned register
        r = self.fresh()
        return r

    def instr(self, out: list[str]) -> None:
        r = self.rng.random()
        if r < 0.35:
            addr = self.address(out)
            d = self.value_dest()
            out.append(f"{d} = load {addr}")
        elif r < 0.6:
            addr = self.address(out)
            out.append(f"store {self.operand()} {addr}")
        else:
            op = self.rng.choice(["add", "sub", "mul", "eq", "lt", "and", "not"])
            d = self.value_dest()
            args = self.operand() if op == "not" else f"{self.operand()} {self.operand()}"
            out.append(f"{d} = op {op} {args}")
        if out and "=" in out[-1]:
            dest = out[-1].split()[0]
            if dest not in self.values:
                self.values.append(dest)

    def program(self) -> str:
        n = self.rng.randint(1, self.shape.max_blocks)
        names = [f"B{i}" for i in range(n)]
        lines = [f"global {self.bases[m]} -> {m} {self.shape.block_len}" for m in self.memory]
        lines += [f"entry {names[0]}", f"exit {names[-1]}"]
        for i, b in enumerate(names):
            body: list[str] = []
            for _ in range(self.rng.randint(0, self.shape.max_instrs)):
                self.instr(body)
            if i < n - 1:
                fwd = names[self.rng.randint(i + 1, n - 1)]
                if self.rng.random() < 0.55:
                    if self.rng.random() < self.shape.back_edge_prob:
                        other = names[self.rng.randint(0, i)]
                    else:
                        other = names[self.rng.randint(i + 1, n - 1)]
                    raw = self.fresh()
                    op = self.rng.choice(["eq", "lt", "and"])
                    body.append(f"{raw} = op {op} {self.operand()} {self.operand()}")
                    cond = self.fresh()
                    body.append(f"{cond} = op and {raw} 1")
                    targets = [fwd, other]
                    self.rng.shuffle(targets)
                    body.append(f"cond {cond} {targets[0]} {targets[1]}")
                else:
                    body.append(f"goto {fwd}")
            lines.append(f"block {b}:")
            lines.extend(f"  {x}" for x in body)
        return "\n".join(lines) + "\n"


def random_ir(rng: random.Random, shape: IrShape = IrShape()):
    """A random IR program (as text and parsed) with a random policy."""
    from .ir.parser import parse_ir

    gen = _IrGen(rng, shape)
    text = gen.program()
    prog = parse_ir(text)
    regs = sorted(r for r in prog.registers if r not in prog.address_registers)
    inputs = frozenset(m for m in gen.memory if rng.random() < 0.4)
    outputs = frozenset([m for m in gen.memory if rng.random() < 0.3]
                        + [r for r in regs if rng.random() < 0.15])
    return Policy(inputs=inputs, outputs=outputs, leaks=frozenset([XL])), prog, text


def ir_corpus(seed: int, count: int, shape: IrShape = IrShape()):
    rng = random.Random(seed)
    for _ in range(count):
        yield random_ir(rng, shape)
