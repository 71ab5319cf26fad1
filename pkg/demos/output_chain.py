"""Typing a program whose outputs are reassigned from one another.

Each rule application is printed with the variables whose types changed.
``~o`` denotes a dependency on the *current* value of output ``o``; when
``o`` is reassigned, every ``~o`` is replaced by what ``o`` held before,
which is why ``y`` ends up depending on ``x`` instead of ``~o1``.

Run with ``python3 demos/output_chain.py``.
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from oscta.cli import main as cli
from oscta.lattice import BOTTOM
from oscta.secenv import Policy
from oscta.whilelang.ast import show_cmd
from oscta.whilelang.parser import parse_while
from oscta.whilelang.typecheck import Checker, Mode

SOURCE = """
o1 := x + 1;
y := o1 + z;
o1 := u;
z := o1 + o3;
if o2 == o3 + x then
  o1 := o2
else
  o2 := o1
fi
"""

POLICY = Policy.from_dict({"vars": ["x", "y", "z", "u", "o1", "o2", "o3"],
                           "outputs": ["o1", "o2", "o3"]})


def main() -> None:
    c = parse_while(SOURCE, POLICY)
    checker = Checker(Mode.BASE, record=True)
    env = checker.type_cmd(BOTTOM, POLICY.initial_env(), c)
    for j in checker.judgements:
        if j.rule == "Seq":
            continue
        changed = sorted((x, t) for x, t in j.post.items() if j.pre[x] != t)
        shown = ", ".join(f"{x} -> {t}" for x, t in changed) or "(no change)"
        print(f"[{j.rule}] {show_cmd(j.cmd).splitlines()[0]}\n    {shown}")
    print("\nfinal environment:")
    print(env.render())

    print("\nThe same derivation through the command-line interface:")
    with tempfile.TemporaryDirectory() as d:
        prog, pol = Path(d, "chain.whl"), Path(d, "chain.pol")
        prog.write_text(SOURCE)
        pol.write_text(json.dumps(POLICY.to_dict()))
        cli(["check", "--base", "--derivation", str(prog), str(pol)])


if __name__ == "__main__":
    main()
