"""Scheduling policies of the empirical cmu family and preemption lengths."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt

from ..core.models import Instance, ServiceKind
from ..exceptions import ConfigurationError, IncompatiblePolicyError, SchedulingError
from .costs import CostModel, EstimatorState

logger = structlog.get_logger(__name__)


class PolicyKind(str, Enum):
    ORACLE = "oracle"
    PREEMPTIVE = "preemptive"
    NONPREEMPTIVE = "nonpreemptive"
    PREEMPT_THEN_NONPREEMPT = "ptn"
    PREEMPT_THEN_NONPREEMPT_GEO = "ptn-geo"

    @property
    def has_preemption_phase(self) -> bool:
        return self in (
            PolicyKind.PREEMPT_THEN_NONPREEMPT,
            PolicyKind.PREEMPT_THEN_NONPREEMPT_GEO,
        )


class PreemptionRule(str, Enum):
    TWO_JOB = "two_job"
    GENERAL = "general"
    GEOMETRIC = "geometric"


class PolicyConfig(BaseModel):
    """Policy selection; `t_s` of None means "compute from the instance"."""

    model_config = ConfigDict(frozen=True)

    kind: PolicyKind
    kappa: Optional[float] = Field(None, gt=0.0)
    t_s: Optional[NonNegativeInt] = None
    label: Optional[str] = None

    @property
    def name(self) -> str:
        return self.label or self.kind.value


def preemption_length(
    rule: PreemptionRule, kappa: float, n: int, t_scale: int, mu_min: float
) -> int:
    """Length T_s of the preemption phase, floored and at least 1."""
    if kappa <= 0 or n <= 0 or t_scale <= 0 or mu_min <= 0:
        raise ConfigurationError("preemption length arguments must be positive")
    if rule is PreemptionRule.TWO_JOB:
        log_arg, base = float(t_scale), float(t_scale)
    else:
        log_arg, base = n * t_scale / mu_min, t_scale / mu_min
    if log_arg <= 1:
        raise ConfigurationError(f"log argument {log_arg} must exceed 1")
    value = kappa * base ** (2.0 / 3.0) * math.log(log_arg) ** (1.0 / 3.0)
    if rule is PreemptionRule.GEOMETRIC:
        value *= n ** (2.0 / 3.0)
    return max(1, math.floor(value))


def check_compatible(kind: PolicyKind, inst: Instance) -> None:
    if (
        kind is PolicyKind.PREEMPT_THEN_NONPREEMPT
        and inst.service_kind is not ServiceKind.DETERMINISTIC
    ):
        raise IncompatiblePolicyError("ptn requires deterministic service; use ptn-geo")
    if (
        kind is PolicyKind.PREEMPT_THEN_NONPREEMPT_GEO
        and inst.service_kind is not ServiceKind.GEOMETRIC
    ):
        raise IncompatiblePolicyError("ptn-geo requires geometric service; use ptn")


def resolve_preemption(
    cfg: PolicyConfig, inst: Instance, default_kappa: float = 1.0
) -> int:
    """Resolve T_s for a policy on an instance."""
    if not cfg.kind.has_preemption_phase:
        return 0
    if cfg.t_s is not None:
        t_s = cfg.t_s
    else:
        if cfg.kind is PolicyKind.PREEMPT_THEN_NONPREEMPT_GEO:
            rule = PreemptionRule.GEOMETRIC
        elif inst.n == 2 and all(mu == 1 for mu in inst.rates):
            rule = PreemptionRule.TWO_JOB
        else:
            rule = PreemptionRule.GENERAL
        kappa = cfg.kappa if cfg.kappa is not None else default_kappa
        t_s = preemption_length(rule, kappa, inst.n, inst.t_scale, inst.mu_min)
    if t_s > inst.total_service:
        logger.warning(
            "preemption_length_clamped", t_s=t_s, total_service=inst.total_service
        )
        t_s = inst.total_service
    return t_s


@dataclass
class Scheduler:
    """Per-run policy state: the resolved configuration plus the commitment.

    Jobs that already completed are never candidates, so the preemption phase
    of `ptn` takes its argmax over the remaining jobs rather than all N. The
    two coincide whenever T_s stays below half the shortest service, since no
    job can complete inside the phase. `ptn-geo` has no such bound and always
    restricts to the remaining jobs.
    """

    kind: PolicyKind
    t_s: int
    true_index: np.ndarray
    index_weights: np.ndarray
    committed: Optional[int] = field(default=None)

    @classmethod
    def for_instance(
        cls,
        cfg: PolicyConfig,
        inst: Instance,
        model: CostModel,
        default_kappa: float = 1.0,
    ) -> "Scheduler":
        check_compatible(cfg.kind, inst)
        weights = (
            np.ones(inst.n) if model.ranks_raw_mean else np.asarray(inst.rates, float)
        )
        return cls(
            kind=cfg.kind,
            t_s=resolve_preemption(cfg, inst, default_kappa),
            true_index=inst.cmu,
            index_weights=weights,
        )

    @staticmethod
    def _argmax(scores: np.ndarray, remaining: np.ndarray) -> int:
        idx = np.flatnonzero(remaining)
        return int(idx[np.argmax(scores[idx])])

    def select(self, state: EstimatorState, remaining: np.ndarray, slot: int) -> int:
        """Job to serve in `slot`, given estimates that include this slot."""
        if not remaining.any():
            raise SchedulingError("no remaining job to select")
        if self.kind is PolicyKind.ORACLE:
            # Estimates never change the choice, so it is held to completion.
            self.committed = self._argmax(self.true_index, remaining)
            return self.committed
        empirical = state.means * self.index_weights
        if self.kind is PolicyKind.PREEMPTIVE or (
            self.kind.has_preemption_phase and slot <= self.t_s
        ):
            return self._argmax(empirical, remaining)
        if self.committed is None or not remaining[self.committed]:
            self.committed = self._argmax(empirical, remaining)
        return self.committed

    def holds(self, job: int) -> bool:
        """Whether `job` will be selected on every slot until it completes."""
        return self.committed == job
