"""Flow-sensitive security typing of IR programs.

Each instruction has a transfer function over type environments whose
domain is all registers, all memory blocks and ``xl``.  ``kildall`` computes
block-entry environments by worklist iteration: the environment leaving a
block along an edge ``(c, b)`` is first resolved with ``⊲`` over the outputs
assigned on alternative paths into ``b`` (its hammock region) and then joined
into the entry environment of ``b``.  ``check_welltyped`` re-verifies the
resulting family edge by edge and ``ir_verdict`` compares the leakage type at
the end of the exit block against what the policy allows.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..lattice import BOTTOM, SecType, real, sym
from ..secenv import XL, IllFormedEnvironment, Policy, PolicyError, TypeEnv
from .graphs import Graphs
from .program import Cond, Goto, Instr, IrProgram, Load, Op, Operand, Reg, Store


class KildallDivergence(RuntimeError):
    """The worklist iteration exceeded its visit bound."""


@dataclass(frozen=True)
class RuleConfig:
    """Switches that disable parts of the rules; used to seed known-bad checkers."""

    drop_op_control: bool = False        # omit τ0 when typing a non-output Op
    drop_memory_leak: bool = False       # do not add load/store addresses to xl
    drop_jump_leak: bool = False         # do not add the branch register to xl on cond
    skip_merge_resolution: bool = False  # join edges into blocks without ⊲ over A


SOUND = RuleConfig()


# -- environments ------------------------------------------------------------

def validate_ir_policy(p: IrProgram, policy: Policy) -> None:
    mem = frozenset(p.memory)
    bad_in = policy.inputs - mem - {XL}
    if bad_in:
        raise PolicyError(f"inputs must be memory blocks: {sorted(bad_in)}")
    bad_out = policy.outputs - p.variables
    if bad_out:
        raise PolicyError(f"outputs must be registers or memory blocks: {sorted(bad_out)}")
    if XL in p.variables:
        raise PolicyError("'xl' is reserved for the leakage variable")


def ir_initial_env(p: IrProgram, policy: Policy) -> TypeEnv:
    """Memory blocks depend on their own initial contents; registers and xl start at bottom.

    Registers hold 0 (or a constant block address) before being assigned, so
    they carry no dependency.
    """
    validate_ir_policy(p, policy)
    types = {r: BOTTOM for r in p.registers}
    types.update({b: SecType.of(real(b)) for b in p.memory})
    types[XL] = BOTTOM
    universe = frozenset([real(n) for n in p.variables] + [sym(o) for o in policy.outputs])
    return TypeEnv(types, policy.outputs, universe)


def allowed_type(init: TypeEnv, policy: Policy) -> SecType:
    acc = BOTTOM
    for x in sorted(policy.inputs - {XL}):
        acc = acc | init[x]
    return acc | SecType(frozenset(sym(o) for o in policy.outputs))


def _names(vs: Iterable[Operand]) -> list[str]:
    return [v.name for v in vs if isinstance(v, Reg)]


# -- transfer functions ------------------------------------------------------

class Transfer:
    """The typing rules, specialised to one program and its CFG facts."""

    def __init__(self, graphs: Graphs, config: RuleConfig = SOUND) -> None:
        self.g = graphs
        self.config = config

    def control(self, b: str) -> tuple[str, ...]:
        """Branching registers of the blocks ``b`` depends on."""
        return self.g.branch_registers.get(b, ())

    def _assign(self, env: TypeEnv, r: str, names: Iterable[str],
                extra: SecType = BOTTOM, xl_names: Iterable[str] | None = None,
                xl_extra: SecType = BOTTOM) -> TypeEnv:
        """Assigns ``r`` from ``names`` (plus ``extra``), optionally leaking into xl.

        For an output ``r`` the environment is first resolved with ``⊲ r``; a
        right-hand side mentioning ``r`` itself then uses ``r``'s current type
        rather than its symbolic atom.
        """
        names = list(names)
        if r in env.outputs:
            env1 = env.triangle_var(r)
            rest = [n for n in names if n != r]
            tau = env1.lookup_alpha(rest) | extra
            if r in names:
                tau = tau | env1[r]
        else:
            env1 = env
            tau = env.lookup_alpha(names) | extra
        changes = {}
        if xl_names is not None:
            xl_rest = [n for n in xl_names if n != r or r not in env.outputs]
            leak = env1.lookup_alpha(xl_rest) | xl_extra
            if r in env.outputs and r in xl_names:
                leak = leak | env1[r]
            changes[XL] = env1[XL] | leak
            tau = tau | leak
        changes[r] = tau
        return env1.update(changes)

    def apply(self, env: TypeEnv, b: str, ins: Instr) -> TypeEnv:
        ctrl = self.control(b)
        if isinstance(ins, Op):
            names = _names(ins.operands)
            if not (self.config.drop_op_control and ins.dest not in env.outputs):
                names += ctrl
            return self._assign(env, ins.dest, names)
        if isinstance(ins, Load):
            blocks = sorted(self.g.pts.of(ins.addr))
            addr = _names([ins.addr]) + list(ctrl)
            if self.config.drop_memory_leak:
                return self._assign(env, ins.dest, blocks + addr)
            return self._assign(env, ins.dest, blocks, xl_names=addr)
        if isinstance(ins, Store):
            targets = self.g.pts.of(ins.addr)
            env1 = env.triangle_set(targets & env.outputs)
            tau1 = env1.lookup_alpha(_names([ins.addr]) + list(ctrl))
            tau2 = env1.lookup_alpha(_names([ins.value]))
            changes = {m: env1[m] | tau2 | tau1 for m in sorted(targets)}
            if not self.config.drop_memory_leak:
                changes[XL] = env1[XL] | tau1
            return env1.update(changes)
        if isinstance(ins, Cond):
            if self.config.drop_jump_leak:
                return env
            return env.update({XL: env[XL] | env.lookup_alpha([ins.reg])})
        if isinstance(ins, Goto):
            return env
        raise TypeError(f"not an instruction: {ins!r}")


def transfer(graphs: Graphs, env: TypeEnv, point: tuple[str, int],
             config: RuleConfig = SOUND) -> TypeEnv:
    """Environment after the instruction at ``point`` given the one before it."""
    b, n = point
    return Transfer(graphs, config).apply(env, b, graphs.program.blocks[b].instrs[n])


# -- fixpoint ----------------------------------------------------------------

@dataclass(frozen=True)
class EdgeCertificate:
    edge: tuple[str, str]
    gamma: TypeEnv          # environment leaving the source block
    merge: frozenset[str]   # outputs resolved before joining
    ok: bool
    reason: str = ""

    def to_json(self) -> dict:
        out = {"edge": list(self.edge), "merge": sorted(self.merge), "ok": self.ok,
               "gamma": _nonbottom(self.gamma)}
        if self.reason:
            out["reason"] = self.reason
        return out


@dataclass
class FlowState:
    program: IrProgram
    graphs: Graphs
    init: TypeEnv
    entry_envs: dict[str, TypeEnv]
    visits: int
    bound: int
    config: RuleConfig = SOUND
    extra_merge: Mapping[tuple[str, str], frozenset[str]] = field(default_factory=dict)
    rounds: int = 1
    failure: str | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def block_envs(self, b: str) -> list[TypeEnv]:
        """Environments at every control point of ``b`` (replayed on demand)."""
        if b not in self._cache:
            env = self.entry_envs[b]
            out = [env]
            tr = Transfer(self.graphs, self.config)
            for ins in self.program.blocks[b].instrs:
                env = tr.apply(env, b, ins)
                out.append(env)
            self._cache[b] = out
        return self._cache[b]

    def exit_env(self, b: str) -> TypeEnv:
        return self.block_envs(b)[-1]

    def hammock_merge(self, edge: tuple[str, str]) -> frozenset[str]:
        """Outputs assigned on the alternative paths into the target of ``edge``."""
        if self.config.skip_merge_resolution:
            return frozenset()
        return self.graphs.assigned_outputs(self.graphs.region(edge), self.init.outputs)

    def merge_set(self, edge: tuple[str, str]) -> frozenset[str]:
        return self.hammock_merge(edge) | self.extra_merge.get(edge, frozenset())


def _fixpoint(p: IrProgram, graphs: Graphs, init: TypeEnv, config: RuleConfig,
              extra: Mapping[tuple[str, str], frozenset[str]]) -> FlowState:
    n_atoms = len(init.atom_universe)
    bound = len(p.points()) * max(n_atoms, 1) * len(init) + 1
    reachable = [b for b in p.blocks if b in graphs.dom.dom]
    state = FlowState(p, graphs, init, {p.entry: init}, 0, bound, config, dict(extra))
    order = {b: i for i, b in enumerate(reachable)}
    work = deque([p.entry])
    queued = {p.entry}
    tr = Transfer(graphs, config)
    while work:
        b = work.popleft()
        queued.discard(b)
        state.visits += 1
        if state.visits > bound:
            raise KildallDivergence(f"more than {bound} block visits")
        env = state.entry_envs[b]
        try:
            for ins in p.blocks[b].instrs:
                env = tr.apply(env, b, ins)
                if not env.well_formed():
                    raise IllFormedEnvironment(f"in block {b} after '{ins}'")
            for s in sorted(p.blocks[b].successors, key=order.__getitem__):
                incoming = env.triangle_set(state.merge_set((b, s)))
                old = state.entry_envs.get(s)
                new = incoming if old is None else old | incoming
                if not new.well_formed():
                    raise IllFormedEnvironment(f"at the entry of block {s}")
                if new != old:
                    state.entry_envs[s] = new
                    if s not in queued:
                        queued.add(s)
                        work.append(s)
        except IllFormedEnvironment as exc:
            state.failure = f"ill-formed environment {exc}"
            break
    return state


def _disagreeing_outputs(envs: list[TypeEnv]) -> frozenset[str]:
    """Outputs whose symbolic atom occurs in some but not all of ``envs`` for some name."""
    out: set[str] = set()
    for x in envs[0].names:
        syms = [frozenset(a.name for a in e[x].atoms if a.symbolic) for e in envs]
        out |= frozenset.union(*syms) - frozenset.intersection(*syms)
    return frozenset(out)


def kildall(p: IrProgram, graphs: Graphs, init: TypeEnv, config: RuleConfig = SOUND,
            *, adaptive: bool = True) -> FlowState:
    """Worklist iteration over block-entry environments.

    Edges are merged with ``⊲`` over the outputs assigned in their hammock
    region.  With ``adaptive`` set, whenever the environments arriving at a
    block disagree on symbolic atoms (so the restricted order could not
    hold), the disagreeing outputs are added to the merge sets of all edges
    into that block and the iteration restarts.  Resolving more outputs only
    trades symbolic atoms for the real types they stand for.

    An ill-formed environment stops the iteration and is recorded in
    ``failure``; exceeding the visit bound raises ``KildallDivergence``.
    """
    extra: dict[tuple[str, str], frozenset[str]] = {}
    rounds = 0
    max_rounds = len(p.edges()) * len(init.outputs) + 1
    while True:
        rounds += 1
        state = _fixpoint(p, graphs, init, config, extra)
        state.rounds = rounds
        if not adaptive or state.failure or rounds > max_rounds:
            return state
        grown = False
        for s in p.blocks:
            if s not in state.entry_envs:
                continue
            edges = [(b, s) for b in state.graphs.preds[s] if b in state.entry_envs]
            arriving = [state.exit_env(e[0]).triangle_set(state.merge_set(e)) for e in edges]
            if s == p.entry:
                arriving.append(init)
            if len(arriving) < 2:
                continue
            diff = _disagreeing_outputs(arriving)
            for e in edges:
                cur = extra.get(e, frozenset())
                if not diff <= cur | state.hammock_merge(e):
                    extra[e] = cur | diff
                    grown = True
        if not grown:
            return state


def check_welltyped(state: FlowState) -> tuple[bool, list[EdgeCertificate]]:
    """Re-checks every CFG edge: the resolved outgoing environment must be
    below the target's entry environment without adding symbolic atoms."""
    certs: list[EdgeCertificate] = []
    if state.failure:
        return False, certs
    ok = True
    p = state.program
    for b in p.blocks:
        if b not in state.entry_envs:
            continue
        envs = state.block_envs(b)
        for env in envs:
            if not env.well_formed():
                return False, certs
        gamma = envs[-1]
        for s in p.blocks[b].successors:
            merge = state.merge_set((b, s))
            target = state.entry_envs[s]
            try:
                resolved = gamma.triangle_set(merge)
            except IllFormedEnvironment:
                certs.append(EdgeCertificate((b, s), gamma, merge, False, "ill-formed"))
                ok = False
                continue
            good = resolved.leq_r(target)
            reason = ""
            if not good:
                bad = sorted(x for x in target.names if not resolved[x].leq_r(target[x]))
                reason = "restricted order fails for " + ", ".join(bad)
                ok = False
            certs.append(EdgeCertificate((b, s), gamma, merge, good, reason))
    if p.entry in state.entry_envs and not state.init.leq_r(state.entry_envs[p.entry]):
        ok = False
        certs.append(EdgeCertificate(("<start>", p.entry), state.init, frozenset(), False,
                                     "initial environment not below the entry environment"))
    return ok, certs


# -- verdict ---------------------------------------------------------------------

@dataclass(frozen=True)
class IrVerdict:
    accepted: bool
    welltyped: bool
    witness: SecType
    allowed: SecType
    initial_env: TypeEnv
    final_env: TypeEnv | None
    state: FlowState
    certificates: tuple[EdgeCertificate, ...]
    reason: str = ""

    def to_json(self) -> dict:
        st = self.state
        return {
            "verdict": "Accept" if self.accepted else "Reject",
            "well_typed": self.welltyped,
            "reason": self.reason,
            "leak_witness": [str(a) for a in self.witness],
            "allowed": [str(a) for a in self.allowed],
            "final_env": _nonbottom(self.final_env) if self.final_env else None,
            "block_envs": {b: _nonbottom(e) for b, e in sorted(st.entry_envs.items())},
            "certificates": [c.to_json() for c in self.certificates],
            "kildall": {"visits": st.visits, "bound": st.bound, "rounds": st.rounds},
        }


def _nonbottom(env: TypeEnv) -> dict[str, list[str]]:
    return {k: [str(a) for a in t] for k, t in env.items() if t.atoms}


def ir_verdict(p: IrProgram, policy: Policy, *, graphs: Graphs | None = None,
               config: RuleConfig = SOUND, dep_inclusive: bool = True,
               adaptive: bool = True) -> IrVerdict:
    """Accept iff the program is well typed and the final leakage type is allowed."""
    init = ir_initial_env(p, policy)
    graphs = graphs or Graphs(p, dep_inclusive=dep_inclusive)
    state = kildall(p, graphs, init, config, adaptive=adaptive)
    allowed = allowed_type(init, policy)
    welltyped, certs = check_welltyped(state)
    final = state.exit_env(p.exit) if (p.exit in state.entry_envs and not state.failure) else None
    if final is None:
        witness = BOTTOM
        reason = state.failure or "exit block unreachable"
        return IrVerdict(False, False, witness, allowed, init, None, state, tuple(certs), reason)
    witness = final[XL].without(allowed.atoms)
    reason = ""
    if not welltyped:
        failed = [c for c in certs if not c.ok]
        reason = (f"edge {failed[0].edge[0]}->{failed[0].edge[1]}: {failed[0].reason}"
                  if failed else "ill-formed environment")
    elif witness.atoms:
        reason = "leakage exceeds the allowed level"
    return IrVerdict(welltyped and not witness.atoms, welltyped, witness, allowed, init, final,
                     state, tuple(certs), reason)


def env_steps(state: FlowState, b: str) -> list[tuple[str, Mapping[str, SecType]]]:
    """Per instruction of ``b``: its text and the entries it changed."""
    envs = state.block_envs(b)
    out = []
    for ins, before, after in zip(state.program.blocks[b].instrs, envs, envs[1:]):
        changed = {k: after[k] for k in after.names if after[k] != before[k]}
        out.append((str(ins), changed))
    return out
