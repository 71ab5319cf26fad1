"""Powerset dependency lattice of security types.

A security type is a finite set of atoms.  Two kinds of atom exist:

* a *real* atom ``x`` stands for a dependency on the initial value of the
  variable ``x``;
* a *symbolic* atom ``~o`` stands for a dependency on the current value of the
  output variable ``o``.

Join is set union, the order is set inclusion and bottom is the empty set.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import AbstractSet, Iterable


class AtomKind(IntEnum):
    REAL = 0
    SYMBOLIC = 1


@dataclass(frozen=True, order=True)
class Atom:
    kind: AtomKind
    name: str

    @property
    def symbolic(self) -> bool:
        return self.kind is AtomKind.SYMBOLIC

    def __str__(self) -> str:
        return f"~{self.name}" if self.symbolic else self.name


def real(name: str) -> Atom:
    return Atom(AtomKind.REAL, name)


def sym(name: str) -> Atom:
    return Atom(AtomKind.SYMBOLIC, name)


@dataclass(frozen=True)
class SecType:
    """An element of the lattice: a frozen set of atoms."""

    atoms: frozenset[Atom] = frozenset()

    @classmethod
    def of(cls, *atoms: Atom) -> SecType:
        return cls(frozenset(atoms))

    @classmethod
    def parse(cls, text: str) -> SecType:
        """Inverse of ``str``: ``"{x, ~o1}"`` -> type with atoms x and ~o1."""
        body = text.strip()
        if not (body.startswith("{") and body.endswith("}")):
            raise ValueError(f"malformed security type {text!r}")
        out = []
        for tok in body[1:-1].split(","):
            tok = tok.strip()
            if not tok:
                continue
            out.append(sym(tok[1:]) if tok.startswith("~") else real(tok))
        return cls(frozenset(out))

    def join(self, other: SecType) -> SecType:
        if not other.atoms or other.atoms <= self.atoms:
            return self
        if not self.atoms:
            return other
        return SecType(self.atoms | other.atoms)

    __or__ = join

    def leq(self, other: SecType) -> bool:
        return self.atoms <= other.atoms

    __le__ = leq

    def leq_r(self, other: SecType) -> bool:
        """``self`` below ``other`` and ``other`` adds no symbolic atom."""
        if not self.atoms <= other.atoms:
            return False
        return all(a in self.atoms for a in other.atoms if a.symbolic)

    def subst(self, target: Atom, replacement: SecType) -> SecType:
        """Replace the symbolic atom ``target`` by ``replacement``."""
        if not target.symbolic:
            raise ValueError(f"substitution target must be symbolic, got {target}")
        if target not in self.atoms:
            return self
        return SecType((self.atoms - {target}) | replacement.atoms)

    def without(self, atoms: AbstractSet[Atom]) -> SecType:
        return SecType(self.atoms - atoms)

    def symbolic(self) -> frozenset[Atom]:
        return frozenset(a for a in self.atoms if a.symbolic)

    def __contains__(self, atom: object) -> bool:
        return atom in self.atoms

    def __iter__(self):
        return iter(sorted(self.atoms))

    def __len__(self) -> int:
        return len(self.atoms)

    def __bool__(self) -> bool:
        return bool(self.atoms)

    def __str__(self) -> str:
        return "{" + ", ".join(str(a) for a in sorted(self.atoms)) + "}"

    def __repr__(self) -> str:
        return f"SecType({self})"


BOTTOM = SecType()


def join_all(types: Iterable[SecType]) -> SecType:
    acc: set[Atom] = set()
    for t in types:
        acc |= t.atoms
    return SecType(frozenset(acc))


def join(t1: SecType, t2: SecType) -> SecType:
    return t1.join(t2)


def leq(t1: SecType, t2: SecType) -> bool:
    return t1.leq(t2)


def leq_r(t1: SecType, t2: SecType) -> bool:
    return t1.leq_r(t2)


def subst(t: SecType, target: Atom, replacement: SecType) -> SecType:
    return t.subst(target, replacement)
