"""Soundness fuzzing: every program the type checker accepts must pass the oracle.

Each generated program is type checked and also run through the exhaustive
oracle, so the report classifies it as one of

* accepted and secure (the expected case),
* rejected and insecure (a justified rejection),
* rejected although secure (incompleteness, expected and only counted),
* accepted although insecure (a soundness failure; the artifact is kept).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .gen import IrShape, WhileShape, ir_corpus, while_corpus
from .ir.interp import check_ir_osct
from .ir.typecheck import RuleConfig, SOUND, ir_verdict
from .oracle import EnumSpec, check_osct, minimize
from .secenv import IllFormedEnvironment
from .whilelang.ast import show_cmd
from .whilelang.typecheck import Mode, verdict


@dataclass(frozen=True)
class SoundnessFailure:
    program: str
    policy: dict
    counterexample: dict

    def to_json(self) -> dict:
        return {"program": self.program, "policy": self.policy,
                "counterexample": self.counterexample}


@dataclass
class FuzzReport:
    language: str
    seed: int
    count: int = 0
    accept_holds: int = 0
    reject_counterexample: int = 0
    reject_holds: int = 0
    excluded_runs: int = 0
    checker_errors: int = 0
    max_iterations: int = 0   # largest loop / Kildall iteration count seen
    bound_hits: int = 0
    seconds: float = 0.0
    failures: list[SoundnessFailure] = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"language": self.language, "seed": self.seed, "programs": self.count,
                "accept_holds": self.accept_holds,
                "accept_counterexample": len(self.failures),
                "reject_counterexample": self.reject_counterexample,
                "reject_holds": self.reject_holds,
                "excluded_runs": self.excluded_runs,
                "checker_errors": self.checker_errors,
                "max_iterations": self.max_iterations, "bound_hits": self.bound_hits,
                "seconds": round(self.seconds, 3),
                "failures": [f.to_json() for f in self.failures]}

    def summary(self) -> str:
        return (f"{self.language}: {self.count} programs, "
                f"{self.accept_holds} accepted (secure), "
                f"{len(self.failures)} accepted but insecure, "
                f"{self.reject_counterexample} rejected (insecure), "
                f"{self.reject_holds} rejected but secure (incompleteness), "
                f"{self.excluded_runs} oracle runs excluded, {self.seconds:.1f}s")

    def _classify(self, accepted: bool, holds: bool) -> None:
        self.count += 1
        if accepted and holds:
            self.accept_holds += 1
        elif not accepted and holds:
            self.reject_holds += 1
        elif not accepted:
            self.reject_counterexample += 1


def fuzz_while(seed: int = 7, count: int = 500, shape: WhileShape = WhileShape(),
               spec: EnumSpec = EnumSpec(domain=2, step_cap=10_000),
               mode: Mode = Mode.CT) -> FuzzReport:
    report = FuzzReport("while", seed)
    start = time.perf_counter()
    for policy, c in while_corpus(seed, count, shape):
        try:
            v = verdict(mode, policy, c)
            accepted = v.accepted
            for loop in v.loops:
                report.max_iterations = max(report.max_iterations, loop.iterations)
                report.bound_hits += loop.iterations > loop.bound
        except IllFormedEnvironment:
            report.checker_errors += 1
            accepted = False
        result = check_osct(c, policy, spec)
        report.excluded_runs += result.excluded
        report._classify(accepted, result.holds)
        if accepted and not result.holds:
            assert result.counterexample is not None
            cex = minimize(c, policy, result.counterexample, spec)
            report.failures.append(SoundnessFailure(show_cmd(c), policy.to_dict(),
                                                    cex.to_json()))
    report.seconds = time.perf_counter() - start
    return report


def fuzz_ir(seed: int = 7, count: int = 200, shape: IrShape = IrShape(),
            spec: EnumSpec = EnumSpec(domain=2, step_cap=500),
            config: RuleConfig = SOUND) -> FuzzReport:
    report = FuzzReport("ir", seed)
    start = time.perf_counter()
    for policy, p, text in ir_corpus(seed, count, shape):
        v = ir_verdict(p, policy, config=config)
        report.max_iterations = max(report.max_iterations, v.state.visits)
        report.bound_hits += v.state.visits > v.state.bound
        result = check_ir_osct(p, policy, spec)
        report.excluded_runs += result.excluded
        report._classify(v.accepted, result.holds)
        if v.accepted and not result.holds:
            assert result.counterexample is not None
            report.failures.append(SoundnessFailure(text, policy.to_dict(),
                                                    result.counterexample.to_json()))
    report.seconds = time.perf_counter() - start
    return report
