"""Secret-dependent memory indexing in the IR: ``p[x] := q[y]``.

The addresses read and written depend on the contents of ``x`` and ``y``
(memory blocks b2 and b3), so the leakage variable picks up both.  The
checker rejects when those blocks are secret and accepts once they are
declared public inputs; the exhaustive oracle on a small copy of the
program agrees with both verdicts.

Run with ``python3 demos/buffer_index.py``.
"""

from __future__ import annotations

from oscta.ir.graphs import Graphs
from oscta.ir.interp import check_ir_osct, initial_state, run_ir
from oscta.ir.parser import parse_ir
from oscta.ir.typecheck import env_steps, ir_verdict
from oscta.oracle import EnumSpec, describe
from oscta.secenv import Policy
from oscta.trace import render_trace

TEMPLATE = """
global @q -> b1 {n}
global @p -> b0 {n}
alloca %x -> b2 1
alloca %y -> b3 1
entry main
exit main
block main:
  %1 = load %y
  %2 = op gep @q 0 %1
  %3 = load %2
  %4 = load %x
  %5 = op gep @p 0 %4
  store %3 %5
"""

SECRET = Policy.from_dict({"inputs": [], "outputs": [], "leaks": ["xl"]})
PUBLIC = Policy.from_dict({"inputs": ["b2", "b3"], "outputs": [], "leaks": ["xl"]})


def main() -> None:
    p = parse_ir(TEMPLATE.format(n=10))
    pts = Graphs(p).to_json()["ptsto"]["registers"]
    print("points-to: " + ", ".join(f"{r} -> {{{', '.join(pts[r])}}}" for r in ("%2", "%5")))
    run = run_ir(p, initial_state(p, {"b2": (4,), "b3": (7,)}))
    print(f"run with x = 4, y = 7: {render_trace(run.trace)}")

    v = ir_verdict(p, SECRET)
    print("\ntyping, instruction by instruction:")
    for k, (ins, changes) in enumerate(env_steps(v.state, "main"), start=1):
        print(f"  Γ{k} after {ins!r}: "
              + ", ".join(f"{x} -> {t}" for x, t in sorted(changes.items())))
    for label, policy in (("x, y secret", SECRET), ("x, y public", PUBLIC)):
        v = ir_verdict(p, policy)
        print(f"\n{label}: {'Accept' if v.accepted else 'Reject'} "
              f"(xl = {v.final_env['xl']}, allowed = {v.allowed})")
        small = parse_ir(TEMPLATE.format(n=2))
        print("  oracle on two-cell buffers: "
              + describe(check_ir_osct(small, policy, EnumSpec(domain=2))).replace("\n", "\n  "))


if __name__ == "__main__":
    main()
