"""Command-line driver: ``oscta <subcommand> ...``.

Exit codes: 0 Accept/Holds, 1 Reject/Counterexample, 2 usage or input error,
3 internal invariant breach (ill-formed environment, fixpoint bound hit).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .ir.graphs import Graphs, UnresolvedAddress
from .ir.interp import check_ir_osct, initial_state, run_ir
from .ir.parser import load_ir
from .ir.program import IrError, IrProgram
from .ir.typecheck import KildallDivergence, RuleConfig, env_steps, ir_verdict
from .oracle import BudgetExceeded, EnumSpec, check_osct, check_osni, describe, minimize
from .secenv import XL, IllFormedEnvironment, Policy, PolicyError, UniverseError
from .trace import event_to_json, render_trace
from .whilelang.ast import If, While, array_vars, cmd_vars, flatten, show_cmd
from .whilelang.instrument import InstrumentError, instrument
from .whilelang.interp import DEFAULT_STEP_CAP, Program, Store
from .whilelang.parser import ParseError, ScopeError, check_scope, parse_while
from .whilelang.typecheck import FixpointDivergence, Mode, verdict

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(args: argparse.Namespace, text: str, doc: dict) -> None:
    if args.format == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(text)


def _is_policy(path: str) -> bool:
    return Path(path).suffix in (".pol", ".json")


def _split_files(files: Sequence[str], need_policy: bool = True) -> tuple[str, str | None]:
    """Accepts ``program policy`` in either order, telling them apart by suffix."""
    pols = [f for f in files if _is_policy(f)]
    progs = [f for f in files if not _is_policy(f)]
    if len(progs) != 1 or len(pols) > 1 or (need_policy and not pols):
        want = "a program file and a policy file (.pol/.json)" if need_policy else \
            "a program file and optionally a policy file"
        raise UsageError(f"expected {want}, got {list(files)}")
    return progs[0], (pols[0] if pols else None)


def _is_ir(path: str) -> bool:
    return Path(path).suffix == ".ir"


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(str(exc)) from exc


def _load_while(path: str, policy: Policy):
    c = parse_while(_read(path))
    check_scope(c, policy)
    return c


def _policy(path: str) -> Policy:
    try:
        return Policy.load(path)
    except OSError as exc:
        raise UsageError(str(exc)) from exc


# -- check -------------------------------------------------------------------

def _derivation(judgements, c) -> list[str]:
    """Numbered derivation: every statement, branch header and ``fi``/``od``
    gets a line number ``k``; ``Γk`` lists the entries changed by line ``k``."""
    by_cmd: dict[int, Any] = {}
    for j in judgements:
        by_cmd[id(j.cmd)] = j  # loop bodies: keep the last (stable) iteration
    lines: list[str] = []
    counter = [0]

    def changed(j) -> str:
        diff = [k for k in sorted(j.post.names) if j.post[k] != j.pre[k]]
        return ", ".join(f"{k} -> {j.post[k]}" for k in diff) or "(no change)"

    def walk(cmd, depth: int) -> None:
        pad = "  " * depth
        for s in flatten(cmd):
            j = by_cmd.get(id(s))
            if j is None:
                continue
            counter[0] += 1
            head = show_cmd(s).splitlines()[0]
            if isinstance(s, (If, While)):
                extra = "".join(f"; {k} = {v}" for k, v in sorted(j.extra.items()))
                lines.append(f"{pad}({counter[0]}) {head}{extra}")
                if isinstance(s, If):
                    walk(s.then, depth + 1)
                    lines.append(f"{pad}else")
                    walk(s.orelse, depth + 1)
                else:
                    walk(s.body, depth + 1)
                counter[0] += 1
                head = "fi" if isinstance(s, If) else "od"
            lines.append(f"{pad}({counter[0]}) {head}")
            lines.append(f"{pad}    Γ{counter[0]} [{j.rule}]: {changed(j)}")

    walk(c, 0)
    return lines


def cmd_check(args: argparse.Namespace) -> int:
    prog_path, pol_path = _split_files(args.files)
    policy = _policy(pol_path)
    policy.validate_while()
    c = _load_while(prog_path, policy)
    mode = Mode(args.mode)
    v = verdict(mode, policy, c, record=args.derivation)
    lines = [f"{'Accept' if v.accepted else 'Reject'} ({mode.value} mode)"]
    if args.derivation:
        lines += _derivation(v.judgements, c)
    lines.append("final environment:")
    lines += ["  " + ln for ln in v.final_env.render().splitlines()]
    lines.append(f"allowed: {v.allowed}")
    for leak, t in v.per_leak.items():
        lines.append(f"{leak}: {v.final_env[leak]}"
                     + (f"  (not allowed: {t})" if t.atoms else ""))
    if not v.accepted:
        lines.append(f"witness: {v.witness}")
    for s in v.loops:
        lines.append(f"loop '{s.cond}': {s.iterations} iterations (bound {s.bound})")
    doc = v.to_json()
    if args.derivation:
        doc["derivation"] = _derivation(v.judgements, c)
    _emit(args, "\n".join(lines), doc)
    return EXIT_OK if v.accepted else EXIT_REJECT


# -- check-ir --------------------------------------------------------------------

def cmd_check_ir(args: argparse.Namespace) -> int:
    prog_path, pol_path = _split_files(args.files)
    policy = _policy(pol_path)
    p = load_ir(prog_path)
    graphs = Graphs(p, dep_inclusive=not args.dep_exclusive)
    v = ir_verdict(p, policy, graphs=graphs, adaptive=not args.hammock_only)
    st = v.state
    lines = [f"{'Accept' if v.accepted else 'Reject'}"
             + (f" ({v.reason})" if v.reason else "")]
    doc = v.to_json()
    if args.dump_env:
        lines.append("initial environment: " + _brief(v.initial_env.items()))
        steps_doc = {}
        k = 0
        for b in p.blocks:
            if b not in st.entry_envs:
                lines.append(f"block {b}: unreachable")
                continue
            lines.append(f"block {b}: entry " + _brief(st.entry_envs[b].items()))
            steps_doc[b] = []
            for ins, changes in env_steps(st, b):
                k += 1
                lines.append(f"  Γ{k} after '{ins}': "
                             + (", ".join(f"{x} -> {t}" for x, t in sorted(changes.items()))
                                or "(no change)"))
                steps_doc[b].append({"instr": ins,
                                     "changes": {x: [str(a) for a in t]
                                                 for x, t in sorted(changes.items())}})
        for c in v.certificates:
            lines.append(f"edge {c.edge[0]} -> {c.edge[1]}: merge {{{', '.join(sorted(c.merge))}}}"
                         f" {'ok' if c.ok else 'FAILS: ' + c.reason}")
        doc["steps"] = steps_doc
    if v.final_env is not None:
        lines.append(f"xl: {v.final_env[XL]}")
    lines.append(f"allowed: {v.allowed}")
    if not v.accepted and v.witness.atoms:
        lines.append(f"witness: {v.witness}")
    lines.append(f"kildall: {st.visits} block visits (bound {st.bound}), {st.rounds} round(s)")
    _emit(args, "\n".join(lines), doc)
    return EXIT_OK if v.accepted else EXIT_REJECT


def _brief(items) -> str:
    shown = [f"{k} -> {t}" for k, t in items if t.atoms]
    return "{" + ", ".join(shown) + "}" if shown else "{} (all bottom)"


# -- run -----------------------------------------------------------------------------

def _store_doc(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("a store is a JSON object mapping names to integers or lists")
    return doc


def _infer_policy(c, store: dict) -> Policy:
    """Declarations for running without a policy: list-valued store entries are arrays."""
    arrays = {k: len(v) for k, v in store.items() if isinstance(v, list)}
    missing = array_vars(c) - set(arrays)
    if missing:
        raise UsageError(f"array lengths unknown for {sorted(missing)}: pass a policy "
                         "or list them in the store")
    return Policy(frozenset(cmd_vars(c) - set(arrays) - {XL}), arrays)


def cmd_run(args: argparse.Namespace) -> int:
    prog_path, pol_path = _split_files(args.files, need_policy=False)
    store_doc = _store_doc(args.store)
    if _is_ir(prog_path):
        p = load_ir(prog_path)
        res = run_ir(p, initial_state(p, {k: tuple(v) for k, v in store_doc.items()}), args.cap)
        doc = {"final": res.state.to_json(), "trace": [event_to_json(e) for e in res.trace],
               "steps": res.steps}
        final = res.state.to_json()
        text = "final memory:\n" + "\n".join(
            f"  {b}: {json.dumps(v)}" for b, v in final["memory"].items())
        regs = {r: v for r, v in sorted(res.state.registers.items())
                if r not in p.address_registers}
        text += "\nregisters: " + ", ".join(f"{r}={v}" for r, v in regs.items())
        text += f"\ntrace: {render_trace(res.trace)}\nsteps: {res.steps}"
        _emit(args, text, doc)
        return EXIT_OK
    c = parse_while(_read(prog_path))
    policy = _policy(pol_path) if pol_path else _infer_policy(c, store_doc)
    check_scope(c, policy)
    store = Store.from_json(store_doc, policy)
    res = Program(c).run(store, args.cap)
    final = res.store.to_json()
    doc = {"final": final, "trace": [event_to_json(e) for e in res.trace], "steps": res.steps}
    text = "final store: " + json.dumps(final, sort_keys=True)
    text += f"\ntrace: {render_trace(res.trace)}\nsteps: {res.steps}"
    _emit(args, text, doc)
    return EXIT_OK


# -- instrument ------------------------------------------------------------------

def cmd_instrument(args: argparse.Namespace) -> int:
    prog_path, pol_path = _split_files(args.files, need_policy=False)
    c = parse_while(_read(prog_path))
    if pol_path:
        check_scope(c, _policy(pol_path))
    out = show_cmd(instrument(c))
    _emit(args, out, {"program": out})
    return EXIT_OK


# -- oracle -----------------------------------------------------------------------

def cmd_oracle(args: argparse.Namespace) -> int:
    prog_path, pol_path = _split_files(args.files)
    policy = _policy(pol_path)
    spec = EnumSpec(domain=args.domain, step_cap=args.cap, budget=args.budget)
    if _is_ir(prog_path):
        if args.mode != "osct":
            raise UsageError("IR programs only support --mode osct")
        result = check_ir_osct(load_ir(prog_path), policy, spec)
    else:
        policy.validate_while()
        c = _load_while(prog_path, policy)
        if args.mode == "osct":
            result = check_osct(c, policy, spec)
        else:
            if not policy.leaks:
                raise UsageError("--mode osni needs leakage variables in the policy")
            result = check_osni(c, policy, spec)
        if args.minimize and result.counterexample is not None:
            observe = "trace" if args.mode == "osct" else "leaks"
            cex = minimize(c, policy, result.counterexample, spec, observe)
            result = type(result)(False, cex, result.runs, result.excluded, result.warnings)
    _emit(args, describe(result), result.to_json())
    return EXIT_OK if result.holds else EXIT_REJECT


# -- fuzz -----------------------------------------------------------------------------

def cmd_fuzz(args: argparse.Namespace) -> int:
    from .fuzz import fuzz_ir, fuzz_while

    reports = []
    if args.lang in ("while", "both"):
        reports.append(fuzz_while(args.seed, args.count, mode=Mode(args.mode)))
    if args.lang in ("ir", "both"):
        config = RuleConfig(**{m.replace("-", "_"): True for m in args.mutant})
        reports.append(fuzz_ir(args.seed, args.ir_count or args.count, config=config))
    text = "\n".join(r.summary() for r in reports)
    for r in reports:
        for f in r.failures[:3]:
            text += f"\nSOUNDNESS FAILURE ({r.language}):\n{f.program}\npolicy: " \
                    f"{json.dumps(f.policy)}\ncounterexample: {json.dumps(f.counterexample)}"
    _emit(args, text, {"reports": [r.to_json() for r in reports]})
    return EXIT_OK if all(r.sound for r in reports) else EXIT_REJECT


# -- dump-cfg -------------------------------------------------------------------------

def cmd_dump_cfg(args: argparse.Namespace) -> int:
    p: IrProgram = load_ir(args.file)
    g = Graphs(p, dep_inclusive=not args.dep_exclusive)
    doc = g.to_json()
    lines = []
    for b in p.blocks:
        if b not in g.dom.dom:
            lines.append(f"{b}: unreachable")
            continue
        lines.append(f"{b}: idom={g.dom.idom.get(b)} ipdom={g.dom.ipdom.get(b)} "
                     f"dep={{{', '.join(sorted(g.deps.get(b, ())))}}}")
    for e, region in doc["regions"].items():
        lines.append(f"region {e}: {{{', '.join(region)}}}")
    for r, blks in doc["ptsto"]["registers"].items():
        lines.append(f"ptsto {r}: {{{', '.join(blks)}}}")
    for b, blks in doc["ptsto"]["memory"].items():
        lines.append(f"contents {b}: {{{', '.join(blks)}}}")
    _emit(args, "\n".join(lines), doc)
    return EXIT_OK


# -- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["text", "json"], default="text")
    ap = argparse.ArgumentParser(prog="oscta", description="Output-sensitive constant-time "
                                 "analysis for While programs and a simplified IR.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="type check a While program")
    p.add_argument("files", nargs=2, metavar="FILE", help="program (.whl) and policy (.pol)")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--base", dest="mode", action="store_const", const="base",
                     help="noninterference typing of the policy's leakage variables")
    grp.add_argument("--ct", dest="mode", action="store_const", const="ct",
                     help="constant-time typing with implicit leakage updates (default)")
    grp.add_argument("--ct-direct", dest="mode", action="store_const", const="ct-direct",
                     help="constant-time typing with in-place leakage rules (unsound, "
                          "kept for comparison)")
    p.add_argument("--derivation", action="store_true", help="print the rule applications")
    p.set_defaults(mode="ct", func=cmd_check)

    p = sub.add_parser("check-ir", parents=[common], help="type check an IR program")
    p.add_argument("files", nargs=2, metavar="FILE", help="program (.ir) and policy (.pol)")
    p.add_argument("--dump-env", action="store_true", help="print every environment")
    p.add_argument("--hammock-only", action="store_true",
                   help="merge only over hammock-region outputs (no adaptive widening)")
    p.add_argument("--dep-exclusive", action="store_true",
                   help="do not count the block itself as lying between it and its branch")
    p.set_defaults(func=cmd_check_ir)

    p = sub.add_parser("run", parents=[common], help="run a program and print its leak trace")
    p.add_argument("files", nargs="+", metavar="FILE", help="program and optional policy")
    p.add_argument("--store", help="JSON initial store (While) or memory (IR)")
    p.add_argument("--cap", type=int, default=DEFAULT_STEP_CAP, help="step cap")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("instrument", parents=[common], help="print the instrumented program")
    p.add_argument("files", nargs="+", metavar="FILE", help="program and optional policy")
    p.set_defaults(func=cmd_instrument)

    p = sub.add_parser("oracle", parents=[common], help="exhaustive dynamic check")
    p.add_argument("files", nargs=2, metavar="FILE", help="policy and program")
    p.add_argument("--mode", choices=["osni", "osct"], default="osct")
    p.add_argument("--domain", type=int, default=2, help="values 0..d-1 per cell")
    p.add_argument("--cap", type=int, default=DEFAULT_STEP_CAP, help="step cap per run")
    p.add_argument("--budget", type=int, default=None,
                   help="maximum number of stores (default: $OSCTA_BUDGET or 65536)")
    p.add_argument("--minimize", action="store_true", help="shrink the counterexample")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fuzz", parents=[common], help="soundness fuzzing against the oracle")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--ir-count", type=int, default=None, help="IR programs (default: --count)")
    p.add_argument("--lang", choices=["while", "ir", "both"], default="both")
    p.add_argument("--mode", choices=["ct", "ct-direct"], default="ct",
                   help="While typing mode under test")
    p.add_argument("--mutant", action="append", default=[],
                   choices=["drop-op-control", "drop-memory-leak", "drop-jump-leak",
                            "skip-merge-resolution"],
                   help="disable an IR typing rule component (mutation testing)")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("dump-cfg", parents=[common],
                       help="dominators, dependences, regions and points-to of an IR program")
    p.add_argument("file")
    p.add_argument("--dep-exclusive", action="store_true")
    p.set_defaults(func=cmd_dump_cfg)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (IllFormedEnvironment, FixpointDivergence, KildallDivergence) as exc:
        print(f"internal invariant breach: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (UsageError, ParseError, ScopeError, PolicyError, UniverseError, IrError,
            UnresolvedAddress, InstrumentError, BudgetExceeded, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
