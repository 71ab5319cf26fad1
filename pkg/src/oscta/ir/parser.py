"""Line-oriented textual format for IR programs.

::

    global @q -> b1 10        # register @q holds the address of block b1 (10 cells)
    alloca %x -> b2 1
    entry main
    exit done
    ptsto %r {b1, b2}         # optional points-to override
    block main:
      %1 = load %x
      %2 = op gep @q 0 %1
      store %1 %2
      cond %c then_blk else_blk
      goto done
    block done:

Every block but the exit ends with ``cond`` or ``goto``; the exit block has no
terminator and execution stops at its end.
"""

from __future__ import annotations

import re

from .graphs import compute_dominators, predecessors, reachable_from, successors
from .program import (OPS_ARITY, VARIADIC_OPS, Block, BlockRef, Cond, Goto, Imm, Instr,
                      IrError, IrProgram, Load, MemDecl, Op, Operand, Reg, Store, defined_register)

_NAME = r"[A-Za-z_][A-Za-z0-9_.]*"
_REG = r"[%@][A-Za-z0-9_.]+"
_DECL = re.compile(rf"^(global|alloca)\s+({_REG})\s*->\s*({_NAME})\s+(\d+)$")
_PTSTO = re.compile(rf"^ptsto\s+({_REG})\s*\{{([^}}]*)\}}$")
_BLOCK = re.compile(rf"^block\s+({_NAME})\s*:$")
_ASSIGN = re.compile(rf"^({_REG})\s*=\s*(.*)$")


class IrParseError(IrError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def _operand(tok: str, memory: set[str], line: int) -> Operand:
    if re.fullmatch(r"-?\d+", tok):
        return Imm(int(tok))
    if re.fullmatch(_REG, tok):
        return Reg(tok)
    if tok in memory:
        return BlockRef(tok)
    raise IrParseError(f"bad operand {tok!r}", line)


def parse_ir(text: str, *, validate: bool = True) -> IrProgram:
    lines = text.splitlines()
    # first pass: memory declarations, so block-address literals resolve anywhere
    memory: set[str] = set()
    for raw in lines:
        m = _DECL.match(raw.split("#", 1)[0].strip())
        if m:
            memory.add(m.group(3))

    decls: list[MemDecl] = []
    ptsto: dict[str, frozenset[str]] = {}
    blocks: dict[str, list[Instr]] = {}
    block_line: dict[str, int] = {}
    entry = exit_ = None
    current: str | None = None
    for lineno, raw in enumerate(lines, 1):
        text_ = raw.split("#", 1)[0].strip()
        if not text_:
            continue
        if m := _DECL.match(text_):
            kind, reg, blk, n = m.groups()
            if reg in {d.register for d in decls}:
                raise IrParseError(f"register {reg} declared twice", lineno)
            if blk in {d.block for d in decls}:
                raise IrParseError(f"memory block {blk} declared twice", lineno)
            decls.append(MemDecl(reg, blk, int(n), kind))
            continue
        if m := _PTSTO.match(text_):
            names = frozenset(x.strip() for x in m.group(2).split(",") if x.strip())
            unknown = names - memory
            if unknown:
                raise IrParseError(f"unknown memory blocks {sorted(unknown)}", lineno)
            ptsto[m.group(1)] = names
            continue
        if m := _BLOCK.match(text_):
            current = m.group(1)
            if current in blocks:
                raise IrParseError(f"block {current} defined twice", lineno)
            blocks[current] = []
            block_line[current] = lineno
            continue
        words = text_.split()
        if words[0] in ("entry", "exit") and len(words) == 2 and current is None:
            if words[0] == "entry":
                entry = words[1]
            else:
                exit_ = words[1]
            continue
        if current is None:
            raise IrParseError(f"instruction outside a block: {text_!r}", lineno)
        body = blocks[current]
        if body and isinstance(body[-1], (Cond, Goto)):
            raise IrParseError(f"instruction after the terminator of block {current}", lineno)
        body.append(_instruction(text_, memory, lineno))

    if entry is None or exit_ is None:
        raise IrParseError("missing 'entry' or 'exit' declaration", len(lines))
    for name in (entry, exit_):
        if name not in blocks:
            raise IrParseError(f"undefined block {name!r}", len(lines))
    for b, body in blocks.items():
        term = body[-1] if body and isinstance(body[-1], (Cond, Goto)) else None
        if b == exit_ and term is not None:
            raise IrParseError(f"exit block {b} must not end in a jump", block_line[b])
        if b != exit_ and term is None:
            raise IrParseError(f"block {b} has no terminator", block_line[b])
        targets = [term.target] if isinstance(term, Goto) else (
            [term.then_block, term.else_block] if isinstance(term, Cond) else [])
        for t in targets:
            if t not in blocks:
                raise IrParseError(f"jump to unknown block {t!r} in block {b}", block_line[b])
    prog = IrProgram({b: Block(b, tuple(ins)) for b, ins in blocks.items()},
                     entry, exit_, tuple(decls), ptsto)
    if validate:
        validate_program(prog)
    return prog


def _instruction(text: str, memory: set[str], line: int) -> Instr:
    words = text.split()
    if m := _ASSIGN.match(text):
        dest, rhs = m.group(1), m.group(2).split()
        if not rhs:
            raise IrParseError("empty right-hand side", line)
        if rhs[0] == "load" and len(rhs) == 2:
            return Load(dest, _operand(rhs[1], memory, line))
        if rhs[0] == "op" and len(rhs) >= 2:
            name, args = rhs[1], tuple(_operand(t, memory, line) for t in rhs[2:])
            if name in OPS_ARITY:
                if len(args) != OPS_ARITY[name]:
                    raise IrParseError(f"op {name} takes {OPS_ARITY[name]} operands", line)
            elif name in VARIADIC_OPS:
                if len(args) < VARIADIC_OPS[name]:
                    raise IrParseError(f"op {name} takes at least {VARIADIC_OPS[name]} operands",
                                       line)
            else:
                raise IrParseError(f"unknown operation {name!r}", line)
            return Op(dest, name, args)
        raise IrParseError(f"cannot parse {text!r}", line)
    if words[0] == "store" and len(words) == 3:
        return Store(_operand(words[1], memory, line), _operand(words[2], memory, line))
    if words[0] == "cond" and len(words) == 4:
        if not re.fullmatch(_REG, words[1]):
            raise IrParseError("cond needs a register", line)
        return Cond(words[1], words[2], words[3])
    if words[0] == "goto" and len(words) == 2:
        return Goto(words[1])
    raise IrParseError(f"cannot parse {text!r}", line)


def validate_program(p: IrProgram) -> None:
    """Structural checks that the type system relies on."""
    addr_regs = p.address_registers
    defs: dict[str, list[tuple[str, int]]] = {}
    for b, blk in p.blocks.items():
        for n, ins in enumerate(blk.instrs):
            d = defined_register(ins)
            if d is None:
                continue
            if d in addr_regs:
                raise IrError(f"address register {d} is redefined at ({b}, {n})")
            defs.setdefault(d, []).append((b, n))

    succ, preds = successors(p), predecessors(p)
    live = reachable_from(succ, p.entry)
    reaches_exit = reachable_from(preds, p.exit)
    stuck = sorted(live - reaches_exit)
    if stuck:
        raise IrError(f"exit block unreachable from {stuck}")

    dom = compute_dominators(p)
    for b, blk in p.blocks.items():
        t = blk.terminator
        if not isinstance(t, Cond) or b not in live:
            continue
        sites = defs.get(t.reg, [])
        if len(sites) != 1:
            raise IrError(f"branching register {t.reg} must be assigned exactly once "
                          f"(found {len(sites)} assignments)")
        (db, dn), = sites
        if db == b:
            ok = dn < len(blk.instrs) - 1
        else:
            ok = dom.dominates(db, b)
        if not ok:
            raise IrError(f"definition of branching register {t.reg} does not precede its use")


def load_ir(path: str) -> IrProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_ir(fh.read())
