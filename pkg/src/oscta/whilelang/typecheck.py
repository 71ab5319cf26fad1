"""Flow-sensitive output-sensitive type systems for the While language.

Two modes share one rule engine:

``Mode.BASE``
    output-sensitive noninterference: the judgement ``p |- env {c} env'``
    tracks, for every variable, which initial values (real atoms) and which
    current output values (symbolic atoms) it may depend on.

``Mode.CT``
    constant time: additionally maintains the leakage variable ``xl``, which
    accumulates everything a branch condition, a read index or a written
    index exposes.  Each leakage update is typed exactly like the assignment
    ``xl := xl : <events>`` that the instrumentation inserts, so typing ``c``
    in this mode agrees with base-typing its instrumented version.

``Mode.CT_DIRECT`` keeps the alternative formulation in which the leakage
variable is updated in place, without the program-counter level, and the loop
rule joins the unsubstituted entry environment.  It disagrees with typing the
instrumented program and is kept for comparison only.

Loops are typed by Kleene iteration to the least environment satisfying the
loop rule; every iteration count is recorded.  Like the level of a
conditional, the level of a loop guard has the symbolic atoms of outputs
assigned in the body resolved against the loop-head environment: inside the
body those atoms would otherwise denote the *new* values of the outputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..lattice import BOTTOM, SecType, sym
from ..secenv import XL, IllFormedEnvironment, Policy, TypeEnv
from . import ast
from .ast import (ArrAssign, Assign, Cmd, Expr, If, Seq, Skip, While, free_vars,
                  index_free_vars, show_expr)


class Mode(enum.Enum):
    BASE = "base"
    CT = "ct"
    CT_DIRECT = "ct-direct"

    @property
    def tracks_leakage(self) -> bool:
        return self is not Mode.BASE


class FixpointDivergence(RuntimeError):
    """A loop fixpoint did not stabilise within its iteration bound."""


@dataclass(frozen=True)
class Judgement:
    """One rule application ``pc |- pre {cmd} post``."""

    rule: str
    pc: SecType
    pre: TypeEnv
    cmd: Cmd
    post: TypeEnv
    extra: Mapping[str, SecType] = field(default_factory=dict)


@dataclass(frozen=True)
class LoopStat:
    cond: str
    iterations: int
    bound: int


def assigned_vars(c: Cmd, outputs: Iterable[str] = ()) -> tuple[frozenset[str], frozenset[str]]:
    """``(def(c), def(c) ∩ outputs)``."""
    all_ = ast.assigned_vars(c)
    return all_, all_ & frozenset(outputs)


class Checker:
    """Applies the typing rules of one mode; optionally logs every judgement."""

    def __init__(self, mode: Mode = Mode.BASE, *, record: bool = False,
                 check_wellformed: bool = True) -> None:
        self.mode = mode
        self.record = record
        self.check_wellformed = check_wellformed
        self.judgements: list[Judgement] = []
        self.loops: list[LoopStat] = []

    # -- helpers ------------------------------------------------------------

    def _log(self, rule: str, pc: SecType, pre: TypeEnv, c: Cmd, post: TypeEnv,
             **extra: SecType) -> TypeEnv:
        if self.check_wellformed and not post.well_formed():
            raise IllFormedEnvironment(f"rule {rule} produced an ill-formed environment:\n"
                                       + post.render())
        if self.record:
            self.judgements.append(Judgement(rule, pc, pre, c, post, dict(extra)))
        return post

    def _leak(self, pc: SecType, env: TypeEnv, names: Iterable[str]) -> TypeEnv:
        """Types ``xl := xl : <events over names>`` as a plain assignment."""
        return env.update({XL: pc | env[XL] | env.lookup_alpha(names)})

    # -- assignments ----------------------------------------------------------

    def _assign(self, pc: SecType, env: TypeEnv, x: str, e: Expr) -> tuple[str, TypeEnv]:
        fv = free_vars(e)
        if x not in env.outputs:
            return "As1", env.update({x: pc | env.lookup_alpha(fv)})
        g1 = env.triangle_var(x)
        if x not in fv:
            return "As2", g1.update({x: pc | g1.lookup_alpha(fv)})
        return "As3", g1.update({x: pc | env[x] | g1.lookup_alpha(fv - {x})})

    def _array_store(self, pc: SecType, env: TypeEnv, c: ArrAssign) -> TypeEnv:
        p1 = env.lookup_alpha(free_vars(c.index) | free_vars(c.expr))
        return env.update({c.target: pc | env[c.target] | p1})

    # -- main entry -----------------------------------------------------------

    def type_cmd(self, pc: SecType, env: TypeEnv, c: Cmd) -> TypeEnv:
        if isinstance(c, Skip):
            return self._log("Skip", pc, env, c, env)
        if isinstance(c, Seq):
            mid = self.type_cmd(pc, env, c.first)
            return self._log("Seq", pc, env, c, self.type_cmd(pc, mid, c.second))
        if isinstance(c, Assign):
            return self._type_assign(pc, env, c)
        if isinstance(c, ArrAssign):
            return self._type_array_store(pc, env, c)
        if isinstance(c, If):
            return self._type_if(pc, env, c)
        if isinstance(c, While):
            return self._type_while(pc, env, c)
        raise TypeError(f"not a command: {c!r}")

    def _type_assign(self, pc: SecType, env: TypeEnv, c: Assign) -> TypeEnv:
        if self.mode is Mode.BASE:
            rule, post = self._assign(pc, env, c.target, c.expr)
            return self._log(rule, pc, env, c, post)
        fidx = index_free_vars(c.expr)
        if self.mode is Mode.CT:
            rule, post = self._assign(pc, self._leak(pc, env, fidx), c.target, c.expr)
            return self._log(rule + "'", pc, env, c, post)
        rule, post = self._assign(pc, env, c.target, c.expr)
        g1 = env.triangle_var(c.target) if c.target in env.outputs else env
        post = post.update({XL: g1[XL] | g1.lookup_alpha(fidx)})
        return self._log(rule + "'", pc, env, c, post)

    def _type_array_store(self, pc: SecType, env: TypeEnv, c: ArrAssign) -> TypeEnv:
        if self.mode is Mode.BASE:
            return self._log("Ast", pc, env, c, self._array_store(pc, env, c))
        leaked = free_vars(c.index) | index_free_vars(c.expr)
        if self.mode is Mode.CT:
            post = self._array_store(pc, self._leak(pc, env, leaked), c)
        else:
            post = self._array_store(pc, env, c).update(
                {XL: env[XL] | env.lookup_alpha(leaked)})
        return self._log("Ast'", pc, env, c, post)

    def _type_if(self, pc: SecType, env: TypeEnv, c: If) -> TypeEnv:
        fv = free_vars(c.cond)
        if self.mode is Mode.CT:
            env_in = self._leak(pc, env, fv)
        elif self.mode is Mode.CT_DIRECT:
            env_in = env.update({XL: env[XL] | env.lookup_alpha(fv)})
        else:
            env_in = env
        _, u1 = assigned_vars(c.then, env.outputs)
        _, u2 = assigned_vars(c.orelse, env.outputs)
        # the branch level resolves the symbolic atoms of outputs either branch may overwrite
        p_branch = env.triangle_level_set(env.lookup_alpha(fv), u1 | u2)
        inner = pc | p_branch
        g1 = self.type_cmd(inner, env_in, c.then)
        g2 = self.type_cmd(inner, env_in, c.orelse)
        post = g1.triangle_set(u2).join(g2.triangle_set(u1))
        return self._log("If", pc, env, c, post, branch_pc=p_branch, inner_pc=inner)

    def _type_while(self, pc: SecType, env: TypeEnv, c: While) -> TypeEnv:
        fv = free_vars(c.cond)
        _, u = assigned_vars(c.body, env.outputs)
        bound = len(env) * len(env.atom_universe) + 1

        if self.mode is Mode.CT_DIRECT:
            base = env.update({XL: env[XL] | env.lookup_alpha(fv)})

            def step(g: TypeEnv) -> TypeEnv:
                p_e = g.triangle_level_set(g.lookup_alpha(fv), u)
                body_out = self.type_cmd(pc | p_e, g.update({XL: env[XL] | p_e}), c.body)
                return base.join(body_out.update({XL: body_out[XL] | p_e}).triangle_set(u))
        else:
            entry = self._leak(pc, env, fv) if self.mode is Mode.CT else env
            base = entry.triangle_set(u)

            def step(g: TypeEnv) -> TypeEnv:
                p_e = g.triangle_level_set(g.lookup_alpha(fv), u)
                body_out = self.type_cmd(pc | p_e, g, c.body)
                if self.mode is Mode.CT:
                    body_out = self._leak(pc | p_e, body_out, fv)
                return base.join(body_out.triangle_set(u))

        current = base
        for k in range(1, bound + 1):
            nxt = step(current)
            if nxt == current:
                self.loops.append(LoopStat(show_expr(c.cond), k, bound))
                return self._log("Wh", pc, env, c, current)
            current = nxt
        raise FixpointDivergence(
            f"loop on {show_expr(c.cond)!r} did not stabilise within {bound} iterations")


def type_cmd(mode: Mode, pc: SecType, env: TypeEnv, c: Cmd) -> TypeEnv:
    return Checker(mode).type_cmd(pc, env, c)


def while_fixpoint(mode: Mode, pc: SecType, env: TypeEnv, cond: Expr, body: Cmd) -> TypeEnv:
    return Checker(mode).type_cmd(pc, env, While(cond, body))


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    mode: Mode
    leaks: tuple[str, ...]
    witness: SecType
    per_leak: Mapping[str, SecType]
    allowed: SecType
    initial_env: TypeEnv
    final_env: TypeEnv
    loops: tuple[LoopStat, ...]
    judgements: tuple[Judgement, ...] = ()

    def to_json(self) -> dict:
        return {
            "verdict": "Accept" if self.accepted else "Reject",
            "mode": self.mode.value,
            "leaks": list(self.leaks),
            "leak_witness": [str(a) for a in self.witness],
            "final_env": self.final_env.to_json(),
            "fixpoint_iterations": [{"loop": s.cond, "iterations": s.iterations,
                                     "bound": s.bound} for s in self.loops],
        }


def verdict(mode: Mode, policy: Policy, c: Cmd, *, record: bool = False,
            env: TypeEnv | None = None) -> Verdict:
    """Types ``c`` from the canonical initial environment and checks the leaks.

    In BASE mode every variable of ``policy.leaks`` is checked; in the
    constant-time modes only ``xl``.
    """
    init = env if env is not None else policy.initial_env()
    checker = Checker(mode, record=record)
    final = checker.type_cmd(BOTTOM, init, c)
    allowed = SecType(frozenset(sym(o) for o in policy.outputs))
    for x in sorted(policy.inputs - {XL}):
        allowed = allowed | init[x]
    leaks = tuple(sorted(policy.leaks)) if mode is Mode.BASE else (XL,)
    per_leak = {l: final[l].without(allowed.atoms) for l in leaks}
    witness = SecType(frozenset().union(*(t.atoms for t in per_leak.values())))
    return Verdict(not witness, mode, leaks, witness, per_leak, allowed, init, final,
                   tuple(checker.loops), tuple(checker.judgements))
