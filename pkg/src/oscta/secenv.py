"""Type environments over a fixed variable universe.

An environment maps every variable of the universe (program variables plus the
leakage variable ``xl``) to a :class:`~oscta.lattice.SecType`.  Output
variables additionally own a symbolic atom ``~o``; reading an output inside an
expression contributes that atom instead of the output's own type.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .lattice import BOTTOM, Atom, SecType, real, sym

XL = "xl"


class PolicyError(ValueError):
    pass


class UniverseError(KeyError):
    """A variable or atom outside the environment's universe was used."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown name"


class IllFormedEnvironment(Exception):
    """The symbolic-dependency graph of an environment has a cycle."""


@dataclass(frozen=True)
class Policy:
    """Variable declarations together with the input/output/leakage partition.

    ``vars`` are scalars, ``arrays`` map array names to their length.  For IR
    programs both are left empty and the names come from the program text.
    """

    vars: frozenset[str] = frozenset()
    arrays: Mapping[str, int] = field(default_factory=dict)
    inputs: frozenset[str] = frozenset()
    outputs: frozenset[str] = frozenset()
    leaks: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        for name in ("vars", "inputs", "outputs", "leaks"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        object.__setattr__(self, "arrays", dict(self.arrays))

    @classmethod
    def from_dict(cls, doc: Mapping) -> Policy:
        unknown = set(doc) - {"vars", "arrays", "inputs", "outputs", "leaks"}
        if unknown:
            raise PolicyError(f"unknown policy keys: {sorted(unknown)}")
        arrays = doc.get("arrays", {}) or {}
        if not isinstance(arrays, Mapping):
            raise PolicyError("'arrays' must map names to lengths")
        for name, length in arrays.items():
            if not isinstance(length, int) or isinstance(length, bool) or length < 0:
                raise PolicyError(f"array {name!r} needs a natural length, got {length!r}")
        lists = {}
        for key in ("vars", "inputs", "outputs", "leaks"):
            val = doc.get(key, []) or []
            if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
                raise PolicyError(f"{key!r} must be a list of names")
            lists[key] = frozenset(val)
        return cls(arrays=arrays, **lists)

    @classmethod
    def load(cls, path: str | Path) -> Policy:
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise PolicyError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "vars": sorted(self.vars),
            "arrays": dict(sorted(self.arrays.items())),
            "inputs": sorted(self.inputs),
            "outputs": sorted(self.outputs),
            "leaks": sorted(self.leaks),
        }

    def with_outputs(self, outputs: Iterable[str]) -> Policy:
        return Policy(self.vars, self.arrays, self.inputs, frozenset(outputs), self.leaks)

    def with_leaks(self, leaks: Iterable[str]) -> Policy:
        return Policy(self.vars, self.arrays, self.inputs, self.outputs, frozenset(leaks))

    @property
    def variables(self) -> frozenset[str]:
        return self.vars | frozenset(self.arrays)

    def validate_while(self) -> None:
        """Checks the constraints a While-language policy must satisfy."""
        clash = self.vars & set(self.arrays)
        if clash:
            raise PolicyError(f"names declared both scalar and array: {sorted(clash)}")
        if XL in self.variables:
            raise PolicyError(f"{XL!r} is reserved for the leakage variable")
        bad = self.outputs - self.vars
        if bad:
            raise PolicyError(f"outputs must be declared scalars: {sorted(bad)}")
        bad = self.inputs - self.variables
        if bad:
            raise PolicyError(f"undeclared inputs: {sorted(bad)}")
        bad = self.leaks - self.variables - {XL}
        if bad:
            raise PolicyError(f"undeclared leakage variables: {sorted(bad)}")

    def initial_env(self) -> TypeEnv:
        """Every variable depends on its own initial value; ``xl`` starts at bottom."""
        self.validate_while()
        types = {v: SecType.of(real(v)) for v in self.variables}
        types[XL] = BOTTOM
        return TypeEnv(types, self.outputs)

    def allowed(self) -> SecType:
        """Join of the input variables' initial types and the outputs' symbolic atoms."""
        return SecType(frozenset(real(v) for v in self.inputs if v != XL)
                       | frozenset(sym(o) for o in self.outputs))


class TypeEnv:
    """An immutable total map from the variable universe to security types."""

    __slots__ = ("_types", "outputs", "atom_universe", "_hash")

    def __init__(self, types: Mapping[str, SecType], outputs: Iterable[str],
                 atom_universe: frozenset[Atom] | None = None) -> None:
        self._types = dict(types)
        self.outputs = frozenset(outputs)
        missing = self.outputs - self._types.keys()
        if missing:
            raise UniverseError(f"outputs outside the universe: {sorted(missing)}")
        if atom_universe is None:
            atom_universe = frozenset(
                [real(v) for v in self._types if v != XL] + [sym(o) for o in self.outputs])
        self.atom_universe = atom_universe
        for name, t in self._types.items():
            self._check_atoms(name, t)
        self._hash = None

    def _check_atoms(self, name: str, t: SecType) -> None:
        if not t.atoms <= self.atom_universe:
            extra = ", ".join(str(a) for a in sorted(t.atoms - self.atom_universe))
            raise UniverseError(f"type of {name!r} mentions atoms outside the universe: {extra}")

    def _derive(self, types: dict[str, SecType]) -> TypeEnv:
        env = TypeEnv.__new__(TypeEnv)
        env._types = types
        env.outputs = self.outputs
        env.atom_universe = self.atom_universe
        env._hash = None
        return env

    # -- mapping protocol ---------------------------------------------------

    def __getitem__(self, name: str) -> SecType:
        try:
            return self._types[name]
        except KeyError:
            raise UniverseError(f"unknown variable {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._types

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._types))

    def __len__(self) -> int:
        return len(self._types)

    def items(self):
        return sorted(self._types.items())

    @property
    def names(self) -> frozenset[str]:
        return frozenset(self._types)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TypeEnv):
            return NotImplemented
        return self._types == other._types and self.outputs == other.outputs

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((frozenset(self._types.items()), self.outputs))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in self.items())
        return f"TypeEnv({body})"

    def update(self, changes: Mapping[str, SecType] | None = None, **kw: SecType) -> TypeEnv:
        types = dict(self._types)
        for mapping in (changes or {}), kw:
            for name, t in mapping.items():
                if name not in types:
                    raise UniverseError(f"unknown variable {name!r}")
                self._check_atoms(name, t)
                types[name] = t
        return self._derive(types)

    # -- alpha ----------------------------------------------------------------

    def alpha(self, o: str) -> Atom:
        if o not in self.outputs:
            raise UniverseError(f"{o!r} is not an output variable")
        return sym(o)

    def lookup_alpha(self, names: Iterable[str]) -> SecType:
        """Type of an expression over ``names``: outputs give their symbolic atom."""
        acc: set[Atom] = set()
        for v in names:
            if v in self.outputs:
                acc.add(sym(v))
            else:
                acc |= self[v].atoms
        return SecType(frozenset(acc))

    # -- substitution operators --------------------------------------------

    def triangle_var(self, o: str) -> TypeEnv:
        """Replace the symbolic atom of ``o`` by ``o``'s current type everywhere."""
        target = self.alpha(o)
        repl = self._types[o]
        types = {y: t.subst(target, repl) for y, t in self._types.items()}
        return self._derive(types)

    def triangle_level(self, p: SecType, o: str) -> SecType:
        return p.subst(self.alpha(o), self._types[o])

    def compatible_order(self, xs: Iterable[str]) -> list[str]:
        """Orders ``xs`` so that no earlier variable reaches a later one in G(env).

        Sinks come first; ties are broken by name.
        """
        xs = set(xs)
        bad = xs - self.outputs
        if bad:
            raise UniverseError(f"not output variables: {sorted(bad)}")
        if not xs:
            return []
        if not self.well_formed():
            raise IllFormedEnvironment(self.render())
        reach = {x: self.reachable(x) & xs for x in xs}
        order: list[str] = []
        remaining = set(xs)
        while remaining:
            ready = sorted(x for x in remaining if not (reach[x] & remaining))
            nxt = ready[0]
            order.append(nxt)
            remaining.remove(nxt)
        return order

    def triangle_set(self, xs: Iterable[str]) -> TypeEnv:
        env = self
        for x in self.compatible_order(xs):
            env = env.triangle_var(x)
        return env

    def triangle_level_set(self, p: SecType, xs: Iterable[str]) -> SecType:
        for x in self.compatible_order(xs):
            p = self.triangle_level(p, x)
        return p

    # -- dependency graph ---------------------------------------------------

    def graph_edges(self) -> frozenset[tuple[str, str]]:
        """Edges (o1, o2) of G(env): ``~o1`` occurs in the type of ``o2``."""
        edges = set()
        for o2 in self.outputs:
            for a in self._types[o2].atoms:
                if a.symbolic and a.name in self.outputs:
                    edges.add((a.name, o2))
        return frozenset(edges)

    def _successors(self) -> dict[str, set[str]]:
        succ: dict[str, set[str]] = {o: set() for o in self.outputs}
        for a, b in self.graph_edges():
            succ[a].add(b)
        return succ

    def well_formed(self) -> bool:
        succ = self._successors()
        state: dict[str, int] = {}

        def visit(n: str) -> bool:
            state[n] = 1
            for m in succ[n]:
                s = state.get(m, 0)
                if s == 1 or (s == 0 and not visit(m)):
                    return False
            state[n] = 2
            return True

        return all(state.get(o, 0) == 2 or visit(o) for o in sorted(self.outputs))

    def reachable(self, o: str) -> frozenset[str]:
        """Outputs reachable from ``o`` by a non-empty path of G(env)."""
        succ = self._successors()
        if o not in succ:
            raise UniverseError(f"{o!r} is not an output variable")
        seen: set[str] = set()
        stack = list(succ[o])
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(succ[n])
        return frozenset(seen)

    # -- orderings ------------------------------------------------------------

    def _same_universe(self, other: TypeEnv) -> None:
        if self._types.keys() != other._types.keys() or self.outputs != other.outputs:
            raise UniverseError("environments over different universes")

    def join(self, other: TypeEnv) -> TypeEnv:
        self._same_universe(other)
        return self._derive({k: t.join(other._types[k]) for k, t in self._types.items()})

    __or__ = join

    def leq(self, other: TypeEnv) -> bool:
        self._same_universe(other)
        return all(t.leq(other._types[k]) for k, t in self._types.items())

    __le__ = leq

    def leq_r(self, other: TypeEnv) -> bool:
        self._same_universe(other)
        return all(t.leq_r(other._types[k]) for k, t in self._types.items())

    # -- rendering ------------------------------------------------------------

    def render(self, names: Iterable[str] | None = None) -> str:
        keys = sorted(self._types) if names is None else sorted(names)
        return "\n".join(f"{k}: {self._types[k]}" for k in keys)

    def to_json(self) -> dict[str, list[str]]:
        return {k: [str(a) for a in t] for k, t in self.items()}


def lookup_alpha(env: TypeEnv, names: Iterable[str]) -> SecType:
    return env.lookup_alpha(names)


def triangle_var(env: TypeEnv, o: str) -> TypeEnv:
    return env.triangle_var(o)


def triangle_level(p: SecType, env: TypeEnv, o: str) -> SecType:
    return env.triangle_level(p, o)


def triangle_set(env: TypeEnv, xs: Iterable[str]) -> TypeEnv:
    return env.triangle_set(xs)


def triangle_level_set(p: SecType, env: TypeEnv, xs: Iterable[str]) -> SecType:
    return env.triangle_level_set(p, xs)


def well_formed(env: TypeEnv) -> bool:
    return env.well_formed()


def reachable(env: TypeEnv, o: str) -> frozenset[str]:
    return env.reachable(o)


def env_join(e1: TypeEnv, e2: TypeEnv) -> TypeEnv:
    return e1.join(e2)


def env_leq(e1: TypeEnv, e2: TypeEnv) -> bool:
    return e1.leq(e2)


def env_leq_r(e1: TypeEnv, e2: TypeEnv) -> bool:
    return e1.leq_r(e2)
