"""Oracle suite run by `cmu-lab verify`."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..core.accounting import benchmark_cost, regret
from ..core.models import Instance, parse_instance
from ..exceptions import VerificationFailed
from .analysis import (
    IDENTITY_RTOL,
    brute_force_min_cost,
    clean_event_coverage,
    collect_histories,
    decomposition_check,
    relative_gap,
    stochastic_decomposition_check,
)
from .base import BaseService
from .costs import CostModel
from .engine import simulate
from .policies import PolicyConfig, PolicyKind

COVERAGE_FLOOR = 0.99


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    cases: int
    detail: str


def _random_instance(rng: np.random.Generator, max_jobs: int = 8) -> Instance:
    n = int(rng.integers(1, max_jobs + 1))
    return parse_instance(
        {
            "n": n,
            "t_scale": int(rng.choice([12, 60])),
            "costs": rng.uniform(0.0, 1.0, n).tolist(),
            "rates": rng.choice([1.0, 2.0, 3.0], n).tolist(),
            "service": "det",
        }
    )


def check_benchmark_optimal(rng: np.random.Generator, cases: int = 200) -> CheckResult:
    """The cmu benchmark cost equals the brute-force optimum."""
    worst = 0.0
    for _ in range(cases):
        inst = _random_instance(rng)
        best, _order = brute_force_min_cost(inst)
        worst = max(worst, relative_gap(benchmark_cost(inst), best, best))
    return CheckResult(
        "benchmark_optimal", worst <= IDENTITY_RTOL, cases, f"max rel gap {worst:.3g}"
    )


def check_decomposition(
    rng: np.random.Generator, cases: int = 1000, subset_cases: int = 500
) -> CheckResult:
    """Exchange decomposition of excess cost, full orders and ordered subsets."""
    failures = 0
    for _ in range(cases):
        n = int(rng.integers(1, 13))
        c, mu = rng.uniform(0.0, 1.0, n), rng.uniform(1.0, 5.0, n)
        t_scale = int(rng.integers(1, 1000))
        failures += not decomposition_check(c, mu, t_scale, rng.permutation(n)).holds
    for _ in range(subset_cases):
        n = int(rng.integers(1, 13))
        c, mu = rng.uniform(0.0, 1.0, n), rng.uniform(1.0, 5.0, n)
        k = int(rng.integers(1, n + 1))
        subset = rng.choice(n, size=k, replace=False)
        t_scale = int(rng.integers(1, 1000))
        failures += not stochastic_decomposition_check(c, mu, t_scale, subset).holds
    return CheckResult(
        "decomposition_identity",
        failures == 0,
        cases + subset_cases,
        f"{failures} failures",
    )


def check_oracle_zero_regret(
    rng: np.random.Generator, cases: int = 100
) -> CheckResult:
    """The known-parameter policy reaches the benchmark exactly."""
    worst = 0.0
    oracle = PolicyConfig(kind=PolicyKind.ORACLE)
    for _ in range(cases):
        inst = _random_instance(rng)
        trace = simulate(inst, CostModel(), oracle, int(rng.integers(2**32)))
        worst = max(worst, abs(regret(trace, inst).regret))
    return CheckResult(
        "oracle_zero_regret", worst <= IDENTITY_RTOL, cases, f"max |regret| {worst:.3g}"
    )


def check_clean_event(seed: int, reps: int = 2000) -> CheckResult:
    """Running means stay inside the clean-event radius in almost every run."""
    inst = parse_instance(
        {
            "n": 5,
            "t_scale": 100,
            "costs": [0.9, 0.7, 0.5, 0.3, 0.1],
            "rates": [1.0] * 5,
            "service": "det",
        }
    )
    histories = collect_histories(
        inst,
        CostModel(),
        PolicyConfig(kind=PolicyKind.PREEMPT_THEN_NONPREEMPT),
        reps,
        seed,
    )
    coverage = clean_event_coverage(histories, inst, CostModel())
    return CheckResult(
        "clean_event_coverage",
        coverage >= COVERAGE_FLOOR,
        reps,
        f"coverage {coverage:.4f}",
    )


class VerificationService(BaseService):
    """Runs every oracle check and reports the outcome of each."""

    def checks(
        self, seed: int, coverage_reps: int
    ) -> list[Callable[[], CheckResult]]:
        rng = np.random.default_rng(seed)
        return [
            lambda: check_benchmark_optimal(rng),
            lambda: check_decomposition(rng),
            lambda: check_oracle_zero_regret(rng),
            lambda: check_clean_event(seed, coverage_reps),
        ]

    def run(
        self,
        seed: int = 0,
        coverage_reps: int = 2000,
        on_result: Optional[Callable[[CheckResult], None]] = None,
    ) -> list[CheckResult]:
        """Run all checks; raises VerificationFailed naming the failed ones."""
        results = []
        for check in self.checks(seed, coverage_reps):
            result = check()
            self.log.info(
                "check_finished",
                check=result.name,
                passed=result.passed,
                detail=result.detail,
            )
            if on_result is not None:
                on_result(result)
            results.append(result)
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise VerificationFailed(f"failed checks: {', '.join(failed)}", results)
        return results
