"""Instance validation, benchmark cost and regret accounting."""

import math
from typing import Any, Mapping

import numpy as np
import structlog

from ..exceptions import AnalysisError, ConfigurationError, IncompleteTraceError
from ..services.policies import PreemptionRule, preemption_length
from .models import GapStats, Instance, RegretReport, ScheduleTrace, parse_instance

logger = structlog.get_logger(__name__)


def instance_warnings(inst: Instance, kappa: float = 1.0) -> list[str]:
    """Non-fatal conditions under which the regret guarantees do not apply."""
    warnings: list[str] = []
    nt = inst.n * inst.t_scale
    if nt > 1:
        bound = (inst.t_scale / math.log(nt)) ** (1.0 / 3.0) / 2.0
        bad = [i for i, mu in enumerate(inst.rates) if mu > bound]
        if bad:
            warnings.append(
                f"rates of jobs {bad} exceed (T/log(NT))^(1/3)/2 = {bound:.4g}"
            )
    try:
        t_s = preemption_length(
            PreemptionRule.GENERAL, kappa, inst.n, inst.t_scale, inst.mu_min
        )
    except ConfigurationError:
        t_s = None
    if t_s is not None and t_s > min(inst.service) / 2:
        warnings.append(
            f"preemption length {t_s} exceeds half the shortest service "
            f"{min(inst.service)}"
        )
    return warnings


def validate_instance(
    raw: Mapping[str, Any] | Instance, kappa: float = 1.0
) -> Instance:
    """Validate raw instance fields and log the non-fatal assumption checks."""
    inst = raw if isinstance(raw, Instance) else parse_instance(raw)
    for message in instance_warnings(inst, kappa):
        logger.warning("instance_assumption_violated", detail=message, n=inst.n)
    return inst


def cmu_order(inst: Instance) -> list[int]:
    """Jobs in decreasing c_i * mu_i, lower index first on ties."""
    cmu = inst.cmu
    return sorted(range(inst.n), key=lambda i: (-cmu[i], i))


def benchmark_completion(inst: Instance) -> np.ndarray:
    """Completion slot of every job when served nonpreemptively in cmu order."""
    completion = np.zeros(inst.n)
    mean_service = inst.mean_service
    elapsed = 0.0
    for job in cmu_order(inst):
        elapsed += mean_service[job]
        completion[job] = elapsed
    return completion


def benchmark_cost(inst: Instance) -> float:
    """Minimum cumulative holding cost, attained by the cmu rule."""
    return float(np.dot(np.asarray(inst.costs), benchmark_completion(inst)))


def regret(trace: ScheduleTrace, inst: Instance) -> RegretReport:
    """Regret of a completed trace against the cmu benchmark.

    Realized cost uses the true mean costs, never the sampled ones. Geometric
    traces are charged their `expected_cost` instead, which has the same
    expectation as the realized cost without the service-length noise of
    committed stretches.
    """
    if trace.n != inst.n or not trace.is_complete:
        raise IncompleteTraceError("trace does not complete every job of the instance")
    costs = np.asarray(inst.costs)
    completion = np.asarray(trace.completion_slot, dtype=float)
    reference = benchmark_completion(inst)
    realized = float(np.dot(costs, completion))
    benchmark = float(np.dot(costs, reference))
    charged = realized if trace.expected_cost is None else trace.expected_cost
    return RegretReport(
        realized_cost=realized,
        benchmark_cost=benchmark,
        regret=charged - benchmark,
        per_job_delay=tuple(float(d) for d in completion - reference),
        conditional_cost=trace.expected_cost,
    )


def gap_stats(inst: Instance) -> GapStats:
    """Normalized separations between the top cmu job and every other job."""
    if inst.n < 2:
        raise AnalysisError("gap statistics need at least two jobs")
    order = cmu_order(inst)
    top, rest = order[0], order[1:]
    cmu = inst.cmu
    rates = inst.rates
    gaps = [abs(cmu[top] - cmu[i]) / (rates[top] + rates[i]) for i in rest]
    delta_min, delta_max = float(min(gaps)), float(max(gaps))
    return GapStats(
        delta_two=delta_min if inst.n == 2 else None,
        delta_min=delta_min,
        delta_max=delta_max,
    )
