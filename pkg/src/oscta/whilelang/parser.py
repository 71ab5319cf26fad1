"""Recursive-descent parser for the While language.

Grammar::

    cmd   := simple (";" simple)* [";"]
    simple:= "skip" | id ":=" expr | id "[" expr "]" ":=" expr
           | "if" expr "then" cmd "else" cmd "fi" | "while" expr "do" cmd "od"
    expr  := binary expressions over | & (== !=) (< <=) (+ -) *, unary "!",
             integer literals, variables, ``a[e]`` and parentheses

``#`` starts a comment running to the end of the line.  With
``allow_trace=True`` the leakage-trace forms ``xl : b(e) : r(e1, e2) : w(e)``
produced by the instrumentation are accepted as right-hand sides.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..secenv import XL, Policy
from .ast import (ArrAssign, ArrRead, Assign, Binop, BranchEv, Cmd, Cons, Expr, If, IntLit,
                  ReadEv, Seq, Skip, Unop, Var, While, WriteEv, cmd_vars, has_array_read, seq)

KEYWORDS = frozenset({"skip", "if", "then", "else", "fi", "while", "do", "od"})

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<=|[-+*<&|!()\[\];:,])
""", re.VERBOSE)

# binary precedence levels, loosest first
_LEVELS: tuple[tuple[str, ...], ...] = (("|",), ("&",), ("==", "!="), ("<", "<="), ("+", "-"), ("*",))


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            tok = m.group()
            if kind == "id" and tok in KEYWORDS:
                kind = "kw"
            out.append(Token(kind, tok, line, pos - line_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str, allow_trace: bool) -> None:
        self.toks = tokenize(text)
        self.i = 0
        self.allow_trace = allow_trace

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("kw", "op")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self) -> Token:
        if self.tok.kind != "id":
            raise self.error(f"expected an identifier, found {self.tok.text or 'end of input'!r}")
        tok = self.tok
        self.i += 1
        return tok

    # -- commands ----------------------------------------------------------

    def program(self) -> Cmd:
        c = self.cmd()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return c

    def cmd(self) -> Cmd:
        parts = [self.simple()]
        while self.at(";"):
            self.i += 1
            if self.tok.kind == "eof" or self.tok.text in ("else", "fi", "od"):
                break
            parts.append(self.simple())
        return seq(*parts)

    def simple(self) -> Cmd:
        tok = self.tok
        if tok.kind == "kw":
            if tok.text == "skip":
                self.i += 1
                return Skip()
            if tok.text == "if":
                self.i += 1
                cond = self.expr()
                self.expect("then")
                then = self.cmd()
                self.expect("else")
                orelse = self.cmd()
                self.expect("fi")
                return If(cond, then, orelse)
            if tok.text == "while":
                self.i += 1
                cond = self.expr()
                self.expect("do")
                body = self.cmd()
                self.expect("od")
                return While(cond, body)
            raise self.error(f"unexpected keyword {tok.text!r}")
        name = self.ident()
        if self.at("["):
            self.i += 1
            idx = self.expr()
            self.expect("]")
            self.expect(":=")
            return ArrAssign(name.text, idx, self.expr())
        self.expect(":=")
        if self.allow_trace and name.text == XL:
            return Assign(name.text, self.trace())
        return Assign(name.text, self.expr())

    # -- expressions -------------------------------------------------------

    def expr(self, level: int = 0) -> Expr:
        if level == len(_LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        while self.tok.kind == "op" and self.tok.text in _LEVELS[level]:
            op = self.tok.text
            self.i += 1
            left = Binop(op, left, self.expr(level + 1))
        return left

    def unary(self) -> Expr:
        if self.at("!"):
            self.i += 1
            return Unop("!", self.unary())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return IntLit(int(tok.text))
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "id":
            self.i += 1
            if self.at("["):
                self.i += 1
                idx = self.expr()
                self.expect("]")
                if has_array_read(idx):
                    raise ParseError("array index must not read an array", tok.line, tok.col)
                return ArrRead(tok.text, idx)
            return Var(tok.text)
        raise self.error(f"expected an expression, found {tok.text or 'end of input'!r}")

    def trace(self) -> Expr:
        head = self.ident()
        if head.text != XL:
            raise ParseError(f"trace expressions start with {XL!r}", head.line, head.col)
        acc: Expr = Var(XL)
        while self.at(":"):
            self.i += 1
            ev = self.ident()
            self.expect("(")
            if ev.text == "b":
                acc = Cons(acc, BranchEv(self.expr()))
            elif ev.text == "w":
                acc = Cons(acc, WriteEv(self.expr()))
            elif ev.text == "r":
                args: list[Expr] = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.at(","):
                        self.i += 1
                        args.append(self.expr())
                acc = Cons(acc, ReadEv(tuple(args)))
            else:
                raise ParseError(f"unknown trace event {ev.text!r}", ev.line, ev.col)
            self.expect(")")
        return acc


def parse_while(text: str, policy: Policy | None = None, *, allow_trace: bool = False) -> Cmd:
    """Parses ``text``; with a policy, also checks every name against it."""
    cmd = _Parser(text, allow_trace).program()
    if policy is not None:
        check_scope(cmd, policy, allow_xl=allow_trace)
    return cmd


def parse_expr(text: str) -> Expr:
    p = _Parser(text, False)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return e


class ScopeError(ValueError):
    pass


def check_scope(c: Cmd, policy: Policy, *, allow_xl: bool = False) -> None:
    """Every scalar is declared, arrays are only indexed, scalars never indexed."""
    scalars = set(policy.vars) | ({XL} if allow_xl else set())
    arrays = set(policy.arrays)

    def expr(e: Expr) -> None:
        if isinstance(e, Var):
            if e.name in arrays:
                raise ScopeError(f"array {e.name!r} used as a scalar")
            if e.name not in scalars:
                raise ScopeError(f"unknown variable {e.name!r}")
        elif isinstance(e, ArrRead):
            if e.array not in arrays:
                raise ScopeError(f"{e.array!r} is not a declared array")
            expr(e.index)
        elif isinstance(e, Unop):
            expr(e.arg)
        elif isinstance(e, Binop):
            expr(e.left)
            expr(e.right)
        elif isinstance(e, Cons):
            expr(e.left)
            expr(e.right)
        elif isinstance(e, BranchEv):
            expr(e.cond)
        elif isinstance(e, ReadEv):
            for f in e.indexes:
                expr(f)
        elif isinstance(e, WriteEv):
            expr(e.index)

    def target(name: str, indexed: bool) -> None:
        if name == XL and not allow_xl:
            raise ScopeError(f"{XL!r} is reserved for the leakage variable")
        if indexed and name not in arrays:
            raise ScopeError(f"{name!r} is not a declared array")
        if not indexed and name not in scalars:
            raise ScopeError(f"cannot assign to array {name!r} as a scalar" if name in arrays
                             else f"unknown variable {name!r}")

    def cmd(c: Cmd) -> None:
        if isinstance(c, Assign):
            target(c.target, False)
            expr(c.expr)
        elif isinstance(c, ArrAssign):
            target(c.target, True)
            if has_array_read(c.index):
                raise ScopeError("array index must not read an array")
            expr(c.index)
            expr(c.expr)
        elif isinstance(c, Seq):
            cmd(c.first)
            cmd(c.second)
        elif isinstance(c, If):
            expr(c.cond)
            cmd(c.then)
            cmd(c.orelse)
        elif isinstance(c, While):
            expr(c.cond)
            cmd(c.body)

    if not allow_xl:
        for v in cmd_vars(c):
            if v == XL:
                raise ScopeError(f"{XL!r} is reserved for the leakage variable")
    cmd(c)

