"""Abstract syntax of the While language with arrays and leakage-trace expressions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

BINOPS = ("+", "-", "*", "==", "!=", "<", "<=", "&", "|")


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class ArrRead:
    array: str
    index: Expr


@dataclass(frozen=True)
class Unop:
    op: str
    arg: Expr


@dataclass(frozen=True)
class Binop:
    op: str
    left: Expr
    right: Expr


# Leakage-trace expressions: only ever produced by the instrumentation.

@dataclass(frozen=True)
class BranchEv:
    cond: Expr


@dataclass(frozen=True)
class ReadEv:
    indexes: tuple[Expr, ...]


@dataclass(frozen=True)
class WriteEv:
    index: Expr


@dataclass(frozen=True)
class Cons:
    """``left : right`` -- append the event ``right`` to the trace ``left``."""

    left: Union[Var, Cons]
    right: Union[BranchEv, ReadEv, WriteEv]


Expr = Union[IntLit, Var, ArrRead, Unop, Binop, BranchEv, ReadEv, WriteEv, Cons]


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr


@dataclass(frozen=True)
class ArrAssign:
    target: str
    index: Expr
    expr: Expr


@dataclass(frozen=True)
class Seq:
    first: Cmd
    second: Cmd


@dataclass(frozen=True)
class If:
    cond: Expr
    then: Cmd
    orelse: Cmd


@dataclass(frozen=True)
class While:
    cond: Expr
    body: Cmd


Cmd = Union[Skip, Assign, ArrAssign, Seq, If, While]


def seq(*cmds: Cmd) -> Cmd:
    """Right-nested sequence of ``cmds``; the empty sequence is ``skip``."""
    if not cmds:
        return Skip()
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Seq(c, out)
    return out


def flatten(c: Cmd) -> list[Cmd]:
    """The non-Seq commands of ``c`` in execution order."""
    if isinstance(c, Seq):
        return flatten(c.first) + flatten(c.second)
    return [c]


# -- expression queries -------------------------------------------------------

def _subexprs(e: Expr) -> Iterator[Expr]:
    if isinstance(e, ArrRead):
        yield e.index
    elif isinstance(e, Unop):
        yield e.arg
    elif isinstance(e, Binop):
        yield e.left
        yield e.right
    elif isinstance(e, Cons):
        yield e.left
        yield e.right
    elif isinstance(e, BranchEv):
        yield e.cond
    elif isinstance(e, ReadEv):
        yield from e.indexes
    elif isinstance(e, WriteEv):
        yield e.index


def free_vars(e: Expr) -> frozenset[str]:
    """Variables read by ``e``, array names included."""
    out: set[str] = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, Var):
            out.add(x.name)
        elif isinstance(x, ArrRead):
            out.add(x.array)
        stack.extend(_subexprs(x))
    return frozenset(out)


def index_exprs(e: Expr) -> list[Expr]:
    """Every array index occurring in ``e``, left to right."""
    out: list[Expr] = []

    def walk(x: Expr) -> None:
        if isinstance(x, ArrRead):
            out.append(x.index)
        for sub in _subexprs(x):
            walk(sub)

    walk(e)
    return out


def index_free_vars(e: Expr) -> frozenset[str]:
    acc: frozenset[str] = frozenset()
    for f in index_exprs(e):
        acc |= free_vars(f)
    return acc


def has_array_read(e: Expr) -> bool:
    return bool(index_exprs(e))


# -- command queries ----------------------------------------------------------

def assigned_vars(c: Cmd) -> frozenset[str]:
    """Variables (array names included) assigned somewhere in ``c``."""
    if isinstance(c, Assign):
        return frozenset([c.target])
    if isinstance(c, ArrAssign):
        return frozenset([c.target])
    if isinstance(c, Seq):
        return assigned_vars(c.first) | assigned_vars(c.second)
    if isinstance(c, If):
        return assigned_vars(c.then) | assigned_vars(c.orelse)
    if isinstance(c, While):
        return assigned_vars(c.body)
    return frozenset()


def cmd_vars(c: Cmd) -> frozenset[str]:
    """Every variable mentioned by ``c``."""
    if isinstance(c, Assign):
        return frozenset([c.target]) | free_vars(c.expr)
    if isinstance(c, ArrAssign):
        return frozenset([c.target]) | free_vars(c.index) | free_vars(c.expr)
    if isinstance(c, Seq):
        return cmd_vars(c.first) | cmd_vars(c.second)
    if isinstance(c, If):
        return free_vars(c.cond) | cmd_vars(c.then) | cmd_vars(c.orelse)
    if isinstance(c, While):
        return free_vars(c.cond) | cmd_vars(c.body)
    return frozenset()


def array_vars(c: Cmd) -> frozenset[str]:
    """Names used as arrays (indexed or assigned at an index) in ``c``."""
    out: set[str] = set()

    def expr(e: Expr) -> None:
        stack = [e]
        while stack:
            x = stack.pop()
            if isinstance(x, ArrRead):
                out.add(x.array)
            stack.extend(_subexprs(x))

    def cmd(s: Cmd) -> None:
        if isinstance(s, Assign):
            expr(s.expr)
        elif isinstance(s, ArrAssign):
            out.add(s.target)
            expr(s.index)
            expr(s.expr)
        elif isinstance(s, Seq):
            cmd(s.first)
            cmd(s.second)
        elif isinstance(s, If):
            expr(s.cond)
            cmd(s.then)
            cmd(s.orelse)
        elif isinstance(s, While):
            expr(s.cond)
            cmd(s.body)

    cmd(c)
    return frozenset(out)


def size(c: Cmd) -> int:
    if isinstance(c, Seq):
        return size(c.first) + size(c.second)
    if isinstance(c, If):
        return 1 + size(c.then) + size(c.orelse)
    if isinstance(c, While):
        return 1 + size(c.body)
    return 1


# -- pretty printing ----------------------------------------------------------

_PREC = {"|": 1, "&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, "+": 5, "-": 5, "*": 6}


def show_expr(e: Expr, ctx: int = 0) -> str:
    if isinstance(e, IntLit):
        # there is no unary minus in the concrete syntax
        return str(e.value) if e.value >= 0 else f"(0 - {-e.value})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ArrRead):
        return f"{e.array}[{show_expr(e.index)}]"
    if isinstance(e, Unop):
        return f"{e.op}{show_expr(e.arg, 7)}"
    if isinstance(e, Binop):
        prec = _PREC[e.op]
        # binary operators are left-associative: the right operand binds tighter
        text = f"{show_expr(e.left, prec)} {e.op} {show_expr(e.right, prec + 1)}"
        return f"({text})" if prec < ctx else text
    if isinstance(e, Cons):
        return f"{show_expr(e.left)} : {show_expr(e.right)}"
    if isinstance(e, BranchEv):
        return f"b({show_expr(e.cond)})"
    if isinstance(e, ReadEv):
        return "r(" + ", ".join(show_expr(f) for f in e.indexes) + ")"
    if isinstance(e, WriteEv):
        return f"w({show_expr(e.index)})"
    raise TypeError(f"not an expression: {e!r}")


def show_cmd(c: Cmd, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(c, Skip):
        return pad + "skip"
    if isinstance(c, Assign):
        return f"{pad}{c.target} := {show_expr(c.expr)}"
    if isinstance(c, ArrAssign):
        return f"{pad}{c.target}[{show_expr(c.index)}] := {show_expr(c.expr)}"
    if isinstance(c, Seq):
        return ";\n".join(show_cmd(x, indent) for x in flatten(c))
    if isinstance(c, If):
        return (f"{pad}if {show_expr(c.cond)} then\n{show_cmd(c.then, indent + 1)}\n"
                f"{pad}else\n{show_cmd(c.orelse, indent + 1)}\n{pad}fi")
    if isinstance(c, While):
        return f"{pad}while {show_expr(c.cond)} do\n{show_cmd(c.body, indent + 1)}\n{pad}od"
    raise TypeError(f"not a command: {c!r}")
