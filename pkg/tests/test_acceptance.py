"""Acceptance suite: one test per criterion, each checked at its stated
tolerance and time budget, each printing a single PASS/FAIL line.

The expensive runs are cached so that the termination-bound criterion can
inspect the fixpoint statistics of criteria 1–6 without recomputing them.
Run standalone with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import contextlib
import functools
import io
import random
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import pytest

from algebra import LAWS
from goldens import BUFFER_FINAL, BUFFER_STEPS, CHAIN_ENVS, LEAKS, T, chain_derivation
from oscta.cli import main as cli_main
from oscta.fuzz import fuzz_ir, fuzz_while
from oscta.gen import WhileShape, while_corpus
from oscta.ir.parser import load_ir
from oscta.ir.typecheck import env_steps, ir_verdict
from oscta.lattice import real, sym
from oscta.oracle import EnumSpec, enumerate_stores
from oscta.secenv import Policy
from oscta.whilelang.instrument import check_equivalences, instrument
from oscta.whilelang.parser import parse_while
from oscta.whilelang.typecheck import Mode, verdict
from reference import cfg_mismatches, random_shape, shapes_up_to_relabelling

DATA = Path(__file__).parent / "data"
RESULTS: list[str] = []


@dataclass
class BoundStats:
    """Fixpoint iteration counts observed by one criterion."""

    runs: int = 0
    worst: int = 0
    hits: list[str] = field(default_factory=list)

    def loop(self, stat, where: str) -> None:
        self.runs += 1
        self.worst = max(self.worst, stat.iterations)
        if stat.iterations > stat.bound:
            self.hits.append(f"{where}: loop '{stat.cond}' {stat.iterations} > {stat.bound}")

    def kildall(self, state, where: str) -> None:
        self.runs += 1
        self.worst = max(self.worst, state.visits)
        if state.visits > state.bound:
            self.hits.append(f"{where}: {state.visits} visits > {state.bound}")


def criterion(number: int, title: str, budget: float):
    """Runs a criterion body (returning a detail string), checks its time
    budget and prints one PASS/FAIL line whatever the outcome."""
    def wrap(body):
        @functools.wraps(body)
        def test():
            start = time.perf_counter()
            detail, ok = "", False
            try:
                detail = body()
                elapsed = time.perf_counter() - start
                assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget:g}s"
                ok = True
            except AssertionError as exc:
                detail = f"{exc}".splitlines()[0] if str(exc) else "assertion failed"
                raise
            finally:
                elapsed = time.perf_counter() - start
                line = (f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail} "
                        f"[{elapsed:.2f}s / {budget:g}s]")
                RESULTS.append(line)
                print(line)
        return test
    return wrap


def _cli(*argv) -> tuple[int, str]:
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli_main([str(a) for a in argv])
    return code, buf.getvalue()


# -- cached runs ----------------------------------------------------------------------

CHAIN_CLI_LINES = [
    "    Γ1 [As2]: o1 -> {x}",
    "    Γ2 [As1]: y -> {z, ~o1}",
    "    Γ3 [As2]: o1 -> {u}, y -> {x, z}",
    "    Γ4 [As1]: z -> {~o1, ~o3}",
    "(5) if o2 == o3 + x then; branch_pc = {o2, x, ~o3}; inner_pc = {o2, x, ~o3}",
    "      Γ6 [As2]: o1 -> {o2, x, ~o2, ~o3}, z -> {u, ~o3}",
    "      Γ7 [As2]: o2 -> {o2, x, ~o1, ~o3}",
    "    Γ8 [If]: o1 -> {o2, u, x, ~o3}, o2 -> {o2, u, x, ~o3}, z -> {u, ~o3}",
]

BUFFER_CLI_LINES = [
    "  Γ1 after '%1 = load %y': %1 -> {b3}",
    "  Γ2 after '%2 = op gep @q 0 %1': %2 -> {b3}",
    "  Γ3 after '%3 = load %2': %3 -> {b1, b3}, xl -> {b3}",
    "  Γ4 after '%4 = load %x': %4 -> {b2}",
    "  Γ5 after '%5 = op gep @p 0 %4': %5 -> {b2}",
    "  Γ6 after 'store %3 %5': b0 -> {b0, b1, b2, b3}, xl -> {b2, b3}",
    "xl: {b2, b3}",
]


@functools.cache
def run_output_chain() -> tuple[str, BoundStats]:
    policy, c, envs, p = chain_derivation(DATA)
    for k, expected in CHAIN_ENVS.items():
        assert dict(envs[k].items()) == expected, f"Γ{k} differs"
    assert p == T(sym("o3"), real("o2"), real("x")), f"p = {p}"
    assert envs[8]["o1"] == envs[8]["o2"] == T(sym("o3"), real("o2"), real("x"), real("u"))
    code, out = _cli("check", "--base", "--derivation",
                     DATA / "output_chain.whl", DATA / "output_chain.pol")
    lines = out.splitlines()
    missing = [ln for ln in CHAIN_CLI_LINES if ln not in lines]
    assert code == 0 and not missing, f"CLI output lacks {missing}"
    stats = BoundStats()
    for s in verdict(Mode.BASE, policy, c).loops:
        stats.loop(s, "output chain")
    return f"Γ1…Γ8 and p = {p} exact (library and CLI)", stats


@functools.cache
def run_buffer() -> tuple[str, BoundStats]:
    p = load_ir(DATA / "buffer_index.ir")
    v = ir_verdict(p, Policy(leaks=LEAKS))
    assert env_steps(v.state, "main") == BUFFER_STEPS, "Γ1…Γ6 differ"
    assert dict(v.final_env.items()) == BUFFER_FINAL, "final environment differs"
    code, out = _cli("check-ir", "--dump-env", DATA / "buffer_index.ir", DATA / "buffer_index.pol")
    lines = out.splitlines()
    missing = [ln for ln in BUFFER_CLI_LINES if ln not in lines]
    assert code == 1 and not missing, f"CLI output lacks {missing}"
    stats = BoundStats()
    stats.kildall(v.state, "buffer")
    return f"Γ1…Γ6 exact, xl = {v.final_env['xl']}, b0 = {v.final_env['b0']}", stats


@functools.cache
def run_password() -> tuple[str, BoundStats]:
    c = parse_while((DATA / "password_check.whl").read_text())
    stats = BoundStats()
    verdicts = []
    for pol_name, expect in (("password_check.pol", True), ("password_check_noout.pol", False)):
        start = time.perf_counter()
        v = verdict(Mode.CT, Policy.load(DATA / pol_name), c)
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"{pol_name} took {elapsed:.2f}s"
        assert v.accepted == expect, f"{pol_name}: accepted={v.accepted}"
        for s in v.loops:
            stats.loop(s, pol_name)
        verdicts.append(v)
    witness = verdicts[1].witness
    assert real("secret") in witness, f"witness {witness} lacks the secret"
    return f"Accept with X_O={{good}}, Reject with X_O=∅ (witness {witness})", stats


C4_SHAPE = WhileShape(max_scalars=4, max_arrays=1, array_len=2, max_depth=4)


@functools.cache
def run_instrumentation() -> tuple[str, BoundStats]:
    stats = BoundStats()
    typing = traces = stores = 0
    for k, (policy, c) in enumerate(while_corpus(1, 200, C4_SHAPE)):
        rep = check_equivalences(c, policy, enumerate_stores(policy, EnumSpec(domain=2)),
                                 mode=Mode.CT)
        typing += len(rep.typing_mismatches)
        traces += len(rep.trace_mismatches)
        stores += rep.stores_checked
        for s in verdict(Mode.CT, policy, c).loops:
            stats.loop(s, f"program {k}")
        for s in verdict(Mode.BASE, policy, instrument(c)).loops:
            stats.loop(s, f"instrumented program {k}")
    assert typing == 0 and traces == 0, f"{typing} typing / {traces} trace mismatches"
    return f"200 programs, {stores} stores, 0 typing and 0 trace mismatches", stats


@functools.cache
def run_fuzz_while():
    return fuzz_while(seed=7, count=500, spec=EnumSpec(domain=2, step_cap=10_000), mode=Mode.CT)


@functools.cache
def run_fuzz_ir():
    return fuzz_ir(seed=7, count=200)


def _fuzz_stats(report) -> BoundStats:
    hits = [f"{report.language}: {report.bound_hits} bound hits"] if report.bound_hits else []
    return BoundStats(report.count, report.max_iterations, hits)


# -- criteria -------------------------------------------------------------------------

@criterion(1, "output-chain golden derivation", 1.0)
def test_criterion_1_output_chain_golden():
    return run_output_chain()[0]


@criterion(2, "buffer example golden environments", 1.0)
def test_criterion_2_buffer_golden():
    return run_buffer()[0]


@criterion(3, "password-checker verdict pair", 2.0)
def test_criterion_3_password_pair():
    return run_password()[0]


@criterion(4, "instrumentation equivalence", 120.0)
def test_criterion_4_instrumentation_equivalence():
    return run_instrumentation()[0]


@criterion(5, "While soundness fuzzing", 600.0)
def test_criterion_5_while_soundness():
    r = run_fuzz_while()
    assert r.count == 500 and r.sound, r.summary()
    return r.summary()


@criterion(6, "IR soundness fuzzing", 600.0)
def test_criterion_6_ir_soundness():
    r = run_fuzz_ir()
    assert r.count == 200 and r.sound, r.summary()
    return r.summary()


LAW_CASES = 10_000


@criterion(7, "algebra suite", 60.0)
def test_criterion_7_algebra():
    for name, law in LAWS.items():
        rng = random.Random(f"law:{name}")
        for i in range(LAW_CASES):
            try:
                law(rng)
            except AssertionError as exc:
                raise AssertionError(f"{name}: violated at case {i}: {exc}") from exc
    return f"{len(LAWS)} laws × {LAW_CASES} cases, 0 violations"


SAMPLED_SIX_BLOCK_SHAPES = 300


@criterion(8, "dep and hammock regions against path enumeration", 60.0)
def test_criterion_8_cfg_oracles():
    shapes = bad = 0
    first = ""
    for n in range(1, 6):
        for succ in shapes_up_to_relabelling(n):
            shapes += 1
            m = cfg_mismatches(succ)
            if m and not bad:
                first = f"{succ}: {m}"
            bad += len(m)
    rng = random.Random(8)
    for _ in range(SAMPLED_SIX_BLOCK_SHAPES):
        succ = random_shape(rng, 6)
        shapes += 1
        m = cfg_mismatches(succ)
        if m and not bad:
            first = f"{succ}: {m}"
        bad += len(m)
    assert bad == 0, f"{bad} mismatches, first {first}"
    return (f"{shapes} shapes (all ≤5 blocks up to relabelling, "
            f"{SAMPLED_SIX_BLOCK_SHAPES} sampled 6-block), 0 mismatches")


@criterion(9, "termination bounds in criteria 1–6", 1500.0)
def test_criterion_9_termination_bounds():
    all_stats = {1: run_output_chain()[1], 2: run_buffer()[1], 3: run_password()[1],
                 4: run_instrumentation()[1], 5: _fuzz_stats(run_fuzz_while()),
                 6: _fuzz_stats(run_fuzz_ir())}
    hits = [h for s in all_stats.values() for h in s.hits]
    assert not hits, f"bound hits: {hits[:3]}"
    runs = sum(s.runs for s in all_stats.values())
    worst = max(s.worst for s in all_stats.values())
    return f"{runs} fixpoint runs within bounds (largest iteration count {worst})"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
