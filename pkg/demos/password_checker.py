"""A password check that wipes the secret on failure.

Whether the secret gets wiped depends on the secret, so the program is not
constant-time in the classical sense.  But the branch taken is fully
determined by the public result ``good``: once ``good`` is declared a public
output, the checker accepts the program, and exhaustive enumeration confirms
that runs with equal guesses and equal results leak identical traces.
Without that declaration the checker rejects, and the oracle exhibits two
runs whose traces differ.

Run with ``python3 demos/password_checker.py``.
"""

from __future__ import annotations

from oscta.oracle import EnumSpec, check_osct, describe
from oscta.secenv import Policy
from oscta.whilelang.interp import Program, Store
from oscta.trace import render_trace
from oscta.whilelang.parser import parse_while
from oscta.whilelang.typecheck import Mode, verdict

SOURCE = """
B_Size := 2;
good := 1;
i := 0;
while i < B_Size do
  good := good & (secret[i] == in_p[i]);
  i := i + 1
od;
if !good then
  i := 0;
  while i < B_Size do
    secret[i] := 0;
    i := i + 1
  od
else
  skip
fi
"""

DECLS = {"vars": ["B_Size", "good", "i"], "arrays": {"secret": 2, "in_p": 2}, "leaks": ["xl"]}


def main() -> None:
    with_output = Policy.from_dict({**DECLS, "inputs": ["in_p"], "outputs": ["good"]})
    no_output = Policy.from_dict({**DECLS, "inputs": ["in_p"], "outputs": []})
    c = parse_while(SOURCE, with_output)

    for store in ({"secret": [1, 0], "in_p": [1, 0]}, {"secret": [1, 0], "in_p": [1, 1]}):
        run = Program(c).run(Store.from_json(store, with_output))
        print(f"guess {store['in_p']} against {store['secret']}: good = {run.store['good']}")
        print(f"  trace: {render_trace(run.trace)}")

    for label, policy in (("good is a public output", with_output),
                          ("no public output", no_output)):
        v = verdict(Mode.CT, policy, c)
        print(f"\n{label}: {'Accept' if v.accepted else 'Reject'}; "
              f"xl = {v.final_env['xl']}, allowed = {v.allowed}")
        if not v.accepted:
            print(f"  leaked beyond the allowed level: {v.witness}")
        print("  oracle: " + describe(check_osct(c, policy, EnumSpec(domain=2)))
              .replace("\n", "\n  "))


if __name__ == "__main__":
    main()
