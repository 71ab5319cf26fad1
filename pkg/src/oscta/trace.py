"""Leak events emitted by the labeled semantics of both languages.

A leak trace is a plain tuple of events; two traces are equal iff they have
the same length and are equal position by position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union


@dataclass(frozen=True)
class Branch:
    """Value of a branch condition."""

    value: int

    def __str__(self) -> str:
        return f"b({self.value})"


@dataclass(frozen=True)
class Read:
    """Values of the array indexes (While) or address (IR) read by one step."""

    values: tuple[Any, ...]

    def __str__(self) -> str:
        return "r(" + ", ".join(str(v) for v in self.values) + ")"


@dataclass(frozen=True)
class Write:
    """Index (While) or address (IR) written by a store."""

    value: Any

    def __str__(self) -> str:
        return f"w({self.value})"


@dataclass(frozen=True)
class Jump:
    """Direction taken by an IR conditional jump: 1 for then, 0 for else."""

    bit: int

    def __str__(self) -> str:
        return f"j({self.bit})"


LeakEvent = Union[Branch, Read, Write, Jump]
LeakTrace = tuple[LeakEvent, ...]


class ExecError(Exception):
    """Execution did not produce a final state."""


class Timeout(ExecError):
    def __init__(self, steps: int) -> None:
        super().__init__(f"step cap of {steps} exceeded")
        self.steps = steps


class RuntimeFault(ExecError):
    """Out-of-bounds access, bad address, or a similar stuck configuration."""


def render_trace(trace: LeakTrace) -> str:
    return " ".join(str(e) for e in trace)


def event_to_json(ev: LeakEvent) -> dict:
    if isinstance(ev, Branch):
        return {"b": ev.value}
    if isinstance(ev, Read):
        return {"r": [_jsonable(v) for v in ev.values]}
    if isinstance(ev, Write):
        return {"w": _jsonable(ev.value)}
    return {"j": ev.bit}


def _jsonable(v: Any) -> Any:
    return v if isinstance(v, int) else str(v)
