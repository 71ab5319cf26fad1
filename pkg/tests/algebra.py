"""Random generators and algebraic laws of the type lattice and environments.

Every law is a function of a ``random.Random`` that draws its own inputs and
raises ``AssertionError`` on a violation.  The same laws are driven by
hypothesis in the unit tests (``st.randoms()``) and by a plain seeded loop in
the acceptance suite, where each one runs over at least 10⁴ cases.
"""

from __future__ import annotations

import itertools
import random
from typing import Callable, Iterable

from oscta.gen import IrShape, WhileShape, random_ir, random_while
from oscta.ir.graphs import Graphs
from oscta.ir.typecheck import ir_initial_env, transfer
from oscta.lattice import BOTTOM, Atom, SecType, join_all, real, sym
from oscta.secenv import XL, TypeEnv
from oscta.whilelang.ast import assigned_vars
from oscta.whilelang.typecheck import Mode, type_cmd

SCALARS = ("x0", "x1", "x2")
OUTPUTS = ("o0", "o1", "o2")
NAMES = SCALARS + OUTPUTS + (XL,)
REAL_ATOMS = tuple(real(n) for n in SCALARS + OUTPUTS)
SYM_ATOMS = tuple(sym(o) for o in OUTPUTS)
ATOMS = REAL_ATOMS + SYM_ATOMS
TOP = SecType(frozenset(ATOMS))


# -- generators -------------------------------------------------------------------

def rand_type(r: random.Random, atoms: Iterable[Atom] = ATOMS, density: float = 0.35) -> SecType:
    return SecType(frozenset(a for a in atoms if r.random() < density))


def rand_subtype(r: random.Random, t: SecType, keep: float = 0.7) -> SecType:
    return SecType(frozenset(a for a in t.atoms if r.random() < keep))


def rand_wf_env(r: random.Random, names: Iterable[str] = NAMES,
                outputs: Iterable[str] = OUTPUTS,
                atom_universe: frozenset[Atom] | None = None,
                density: float = 0.35) -> TypeEnv:
    """A random well-formed environment.

    A random ranking of the outputs is drawn first; an output's type may only
    mention the symbolic atoms of lower-ranked outputs, so G(Γ) is acyclic.
    Non-output variables may mention any symbolic atom.
    """
    names, outputs = list(names), list(outputs)
    if atom_universe is None:
        atom_universe = frozenset([real(n) for n in names if n != XL]
                                  + [sym(o) for o in outputs])
    reals = sorted(a for a in atom_universe if not a.symbolic)
    ranking = outputs[:]
    r.shuffle(ranking)
    rank = {o: i for i, o in enumerate(ranking)}
    types = {}
    for n in names:
        if n in rank:
            syms = [sym(o) for o in outputs if rank[o] < rank[n]]
        else:
            syms = [sym(o) for o in outputs]
        types[n] = rand_type(r, reals + syms, density)
    return TypeEnv(types, outputs, atom_universe)


def rand_sub_env(r: random.Random, env: TypeEnv) -> TypeEnv:
    """Pointwise random subsets; a subgraph of an acyclic graph stays acyclic."""
    return env.update({n: rand_subtype(r, t) for n, t in env.items()})


def rand_real_growth(r: random.Random, env: TypeEnv) -> TypeEnv:
    """Adds random real atoms only, so the result is ``⊑_r``-above ``env``."""
    reals = [a for a in env.atom_universe if not a.symbolic]
    return env.update({n: t | rand_type(r, reals, 0.2) for n, t in env.items()})


def rand_outputs(r: random.Random, outputs: Iterable[str] = OUTPUTS) -> frozenset[str]:
    return frozenset(o for o in outputs if r.random() < 0.5)


def compatible_orders(env: TypeEnv, xs: Iterable[str]) -> list[tuple[str, ...]]:
    """Every ordering of ``xs`` in which no earlier variable reaches a later one."""
    out = []
    for perm in itertools.permutations(sorted(xs)):
        if all(perm[k] not in env.reachable(perm[j])
               for j in range(len(perm)) for k in range(j + 1, len(perm))):
            out.append(perm)
    return out


def graph_paths2(env: TypeEnv) -> set[tuple[str, str]]:
    edges = env.graph_edges()
    return set(edges) | {(a, c) for a, b in edges for b2, c in edges if b == b2}


# -- lattice laws --------------------------------------------------------------------

def law_join(r: random.Random) -> None:
    a, b, c = rand_type(r), rand_type(r), rand_type(r)
    assert a | b == b | a
    assert (a | b) | c == a | (b | c)
    assert a | a == a
    assert a | BOTTOM == a and BOTTOM | a == a
    assert a | TOP == TOP
    assert join_all([a, b, c]) == a | b | c


def law_order(r: random.Random) -> None:
    a = rand_type(r)
    b = a | rand_type(r, density=0.2)
    c = b | rand_type(r, density=0.2)
    x, y = rand_type(r), rand_type(r)
    assert a <= a
    assert a <= b <= c and a <= c
    assert (x <= y and y <= x) == (x == y)
    assert (x <= y) == (x | y == y)
    assert BOTTOM <= x <= TOP


def law_symbolic_atoms_incomparable(r: random.Random) -> None:
    a, b = r.sample(SYM_ATOMS, 2)
    assert not SecType.of(a) <= SecType.of(b)
    assert not SecType.of(b) <= SecType.of(a)


def law_symbolic_atoms_prime(r: random.Random) -> None:
    t_o = SecType.of(r.choice(SYM_ATOMS))
    t1, t2 = rand_type(r), rand_type(r)
    if t_o <= t1 | t2:
        assert t_o <= t1 or t_o <= t2


def law_symbolic_atom_decomposition(r: random.Random) -> None:
    o = r.choice(SYM_ATOMS)
    t1 = rand_type(r) | SecType.of(o)
    t = t1.without({o})
    assert t1 == t | SecType.of(o)
    assert not SecType.of(o) <= t


def law_restricted_order(r: random.Random) -> None:
    a = rand_type(r)
    b = a | rand_type(r, density=0.2) if r.random() < 0.5 else rand_type(r)
    if a.leq_r(b):
        assert a <= b
        assert not (b.symbolic() - a.symbolic())
    if a <= b and not (b.symbolic() - a.symbolic()):
        assert a.leq_r(b)
    # environment form
    e2 = rand_wf_env(r)
    e1 = rand_sub_env(r, e2)
    if e1.leq_r(e2):
        assert e1 <= e2


def law_subst(r: random.Random) -> None:
    t, new = rand_type(r), rand_type(r)
    t0 = r.choice(SYM_ATOMS)
    res = t.subst(t0, new)
    if t0 not in t:
        assert res == t
    else:
        assert res == t.without({t0}) | new
    if t0 not in new:
        assert t0 not in res
    assert t.subst(t0, SecType.of(t0)) == t


# -- environment laws ----------------------------------------------------------------

def law_triangle_order_independent(r: random.Random) -> None:
    env = rand_wf_env(r)
    xs = rand_outputs(r)
    expected = env.triangle_set(xs)
    p = rand_type(r)
    expected_p = env.triangle_level_set(p, xs)
    orders = compatible_orders(env, xs)
    assert orders
    for order in orders:
        e, q = env, p
        for x in order:
            q = e.triangle_level(q, x)
            e = e.triangle_var(x)
        assert e == expected
        assert q == expected_p


def law_triangle_preserves_wellformedness(r: random.Random) -> None:
    env = rand_wf_env(r)
    x = r.choice(OUTPUTS)
    res = env.triangle_var(x)
    assert res.well_formed()
    assert res.graph_edges() <= graph_paths2(env)
    assert not any(a == x for a, _ in res.graph_edges())
    assert all(sym(x) not in res[y] for y in res.names)
    assert sym(x) not in env.triangle_level(rand_type(r), x)
    xs = rand_outputs(r)
    assert env.triangle_set(xs).well_formed()


def law_triangle_monotone(r: random.Random) -> None:
    e2 = rand_wf_env(r)
    e1 = rand_sub_env(r, e2)
    xs = rand_outputs(r)
    assert e1.triangle_set(xs) <= e2.triangle_set(xs)
    p1 = rand_type(r)
    p2 = p1 | rand_type(r, REAL_ATOMS, 0.3)
    assert p1.leq_r(p2)
    assert e1.triangle_level_set(p1, xs) <= e2.triangle_level_set(p2, xs)


def law_resolved_below_is_fixed(r: random.Random) -> None:
    g1 = rand_wf_env(r)
    xs = rand_outputs(r)
    g3 = rand_real_growth(r, g1.triangle_set(xs))
    assert g1.triangle_set(xs).leq_r(g3)
    assert g3.triangle_set(xs) == g3


# -- transfer-function monotonicity ---------------------------------------------------

_SMALL_WHILE = WhileShape(max_scalars=3, max_arrays=1, array_len=2, max_depth=3)


def law_while_transfer_monotone(r: random.Random) -> None:
    policy, c = random_while(r, _SMALL_WHILE)
    init = policy.initial_env()
    e2 = rand_wf_env(r, init.names, init.outputs, init.atom_universe)
    e1 = rand_sub_env(r, e2)
    # a context level never mentions the symbolic atom of an output the command
    # assigns: the rules resolve branch levels over those outputs first
    assigned = assigned_vars(c)
    pc_atoms = sorted(a for a in init.atom_universe if not (a.symbolic and a.name in assigned))
    pc2 = rand_type(r, pc_atoms, 0.15)
    pc1 = rand_subtype(r, pc2)
    mode = r.choice((Mode.BASE, Mode.CT))
    assert type_cmd(mode, pc1, e1, c) <= type_cmd(mode, pc2, e2, c)


_SMALL_IR = IrShape(max_blocks=4)


def law_ir_transfer_monotone(r: random.Random) -> None:
    policy, p, _ = random_ir(r, _SMALL_IR)
    while not p.points():
        policy, p, _ = random_ir(r, _SMALL_IR)
    graphs = Graphs(p)
    init = ir_initial_env(p, policy)
    e2 = rand_wf_env(r, init.names, init.outputs, init.atom_universe)
    e1 = rand_sub_env(r, e2)
    point = r.choice(p.points())
    assert transfer(graphs, e1, point) <= transfer(graphs, e2, point)


LAWS: dict[str, Callable[[random.Random], None]] = {
    "join is commutative, associative, idempotent, with neutral bottom and absorbing top":
        law_join,
    "order is a partial order agreeing with join": law_order,
    "distinct symbolic atoms are incomparable": law_symbolic_atoms_incomparable,
    "a symbolic atom below a join is below one side": law_symbolic_atoms_prime,
    "a type above a symbolic atom splits off that atom": law_symbolic_atom_decomposition,
    "restricted order implies order": law_restricted_order,
    "substitution identities": law_subst,
    "environment resolution is order independent": law_triangle_order_independent,
    "resolution preserves well-formedness": law_triangle_preserves_wellformedness,
    "resolution is monotone": law_triangle_monotone,
    "resolution fixes environments restricted-above a resolved one":
        law_resolved_below_is_fixed,
    "While typing rules are monotone": law_while_transfer_monotone,
    "IR transfer functions are monotone": law_ir_transfer_monotone,
}
