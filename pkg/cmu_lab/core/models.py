"""Domain models: instances, schedule traces and regret reports."""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Any, Mapping, Optional

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from ..exceptions import InstanceValidationError

# Slack for T/mu round trips such as T / (T / s) landing just above s.
_CEIL_SLACK = 1e-9


class ServiceKind(str, Enum):
    """Service time model of an instance."""

    DETERMINISTIC = "det"
    GEOMETRIC = "geo"


class Instance(BaseModel):
    """A batch of N jobs with mean holding costs and service rates."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n: PositiveInt
    t_scale: PositiveInt
    costs: tuple[float, ...]
    rates: tuple[float, ...]
    service_kind: ServiceKind = Field(ServiceKind.DETERMINISTIC, alias="service")

    @field_validator("costs")
    @classmethod
    def check_costs(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        for i, c in enumerate(v):
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"cost of job {i} is {c}, outside [0, 1]")
        return v

    @field_validator("rates")
    @classmethod
    def check_rates(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        for i, mu in enumerate(v):
            if not mu >= 1.0:
                raise ValueError(f"rate of job {i} is {mu}, below 1")
        return v

    @model_validator(mode="after")
    def check_lengths(self) -> "Instance":
        if len(self.costs) != self.n:
            raise ValueError(
                f"costs has {len(self.costs)} entries, expected n={self.n}"
            )
        if len(self.rates) != self.n:
            raise ValueError(
                f"rates has {len(self.rates)} entries, expected n={self.n}"
            )
        return self

    @property
    def service(self) -> tuple[int, ...]:
        """Integral service lengths ceil(T / mu_i)."""
        return tuple(
            max(1, math.ceil(self.t_scale / mu - _CEIL_SLACK)) for mu in self.rates
        )

    @property
    def mean_service(self) -> tuple[float, ...]:
        """Expected service lengths used by the benchmark.

        Deterministic instances use the integral lengths; geometric service
        completes with probability min(1, mu_i / T) per served slot, so its
        mean is max(1, T / mu_i).
        """
        if self.service_kind is ServiceKind.GEOMETRIC:
            return tuple(max(1.0, self.t_scale / mu) for mu in self.rates)
        return tuple(float(s) for s in self.service)

    @property
    def total_service(self) -> int:
        return sum(self.service)

    @property
    def m(self) -> float:
        """M = sum of 1 / mu_i."""
        return sum(1.0 / mu for mu in self.rates)

    @property
    def mu_min(self) -> float:
        return min(self.rates)

    @property
    def mu_max(self) -> float:
        return max(self.rates)

    @property
    def cmu(self) -> np.ndarray:
        return np.asarray(self.costs) * np.asarray(self.rates)

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "t_scale": self.t_scale,
            "costs": list(self.costs),
            "rates": list(self.rates),
            "service": self.service_kind.value,
        }


def parse_instance(raw: Mapping[str, Any]) -> Instance:
    """Build an Instance, converting pydantic errors into InstanceValidationError."""
    try:
        return Instance.model_validate(dict(raw))
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first["loc"]) or "instance"
        raise InstanceValidationError(f"{loc}: {first['msg']}", field=loc) from e


def load_instance(path: str | Path) -> Instance:
    """Read an instance JSON file."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InstanceValidationError(f"cannot read instance file {path}: {e}") from e
    if not isinstance(raw, dict):
        raise InstanceValidationError("instance file must hold a JSON object")
    return parse_instance(raw)


def dump_instance(inst: Instance, target: str | Path | IO[str]) -> None:
    """Write an instance as indented JSON to a path or an open text stream."""
    text = json.dumps(inst.to_json(), indent=2) + "\n"
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


@dataclass(frozen=True)
class ScheduleTrace:
    """Outcome of one simulated run.

    `segments` stores the served job per slot run-length encoded as
    (job, slots) pairs; `served` expands it.
    """

    segments: tuple[tuple[int, int], ...]
    completion_slot: tuple[int, ...]
    preempt_service: tuple[int, ...]
    completion_order: tuple[int, ...]
    total_slots: int
    t_s: int = 0
    expected_cost: Optional[float] = None
    samples: Optional[tuple[np.ndarray, ...]] = field(
        default=None, compare=False, repr=False
    )

    @property
    def n(self) -> int:
        return len(self.completion_slot)

    @property
    def served(self) -> np.ndarray:
        """Job index served in each slot (slot t at position t - 1)."""
        if not self.segments:
            return np.zeros(0, dtype=np.int64)
        jobs, lengths = zip(*self.segments)
        return np.repeat(np.asarray(jobs, dtype=np.int64), lengths)

    def served_counts(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=np.int64)
        for job, length in self.segments:
            counts[job] += length
        return counts

    @property
    def is_complete(self) -> bool:
        return self.n > 0 and all(s > 0 for s in self.completion_slot)


@dataclass(frozen=True)
class RegretReport:
    realized_cost: float
    benchmark_cost: float
    regret: float
    per_job_delay: tuple[float, ...]
    conditional_cost: Optional[float] = None

    @property
    def relative_regret(self) -> float:
        """Regret divided by the minimum expected cumulative cost."""
        if self.benchmark_cost == 0:
            return 0.0
        return self.regret / self.benchmark_cost


@dataclass(frozen=True)
class GapStats:
    delta_two: Optional[float]
    delta_min: float
    delta_max: float
