"""Discrete-time single-server simulation loop."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, Optional

import numpy as np
import structlog
from numpy.random import Generator

from ..core.models import Instance, ScheduleTrace, ServiceKind
from ..exceptions import SimulationError
from .base import BaseService
from .costs import CostModel, CostSampler, EstimatorState, SeedLike, job_streams
from .policies import PolicyConfig, Scheduler

logger = structlog.get_logger(__name__)

DEFAULT_SLOT_CAP = 10**9
DEFAULT_CHUNK = 4096


@dataclass
class UniformStream:
    """Buffered uniforms of one job's completion substream, one per served slot."""

    rng: Generator
    chunk: int = DEFAULT_CHUNK
    _buf: np.ndarray = field(init=False, repr=False)
    _pos: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._buf = np.zeros(0)
        self._pos = 0

    def _refill(self) -> None:
        self._buf = self.rng.random(self.chunk)
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buf):
            self._refill()
        u = float(self._buf[self._pos])
        self._pos += 1
        return u

    def slots_until_success(self, p: float) -> int:
        """Served slots until the first draw below p, that slot included."""
        count = 0
        while True:
            if self._pos == len(self._buf):
                self._refill()
            hits = np.flatnonzero(self._buf[self._pos :] < p)
            if hits.size:
                k = int(hits[0]) + 1
                self._pos += k
                return count + k
            count += len(self._buf) - self._pos
            self._pos = len(self._buf)


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    served: int
    completed: Optional[int]
    costs_observed: dict[int, float]

    def to_json(self) -> str:
        return json.dumps(
            {
                "slot": self.slot,
                "served": self.served,
                "completed": self.completed,
                "costs_observed": {str(k): v for k, v in self.costs_observed.items()},
            },
            sort_keys=True,
        )


class _Run:
    """State of one simulation; slot t + 1 depends on slot t."""

    def __init__(
        self,
        inst: Instance,
        model: CostModel,
        cfg: PolicyConfig,
        seed: SeedLike,
        *,
        record: bool,
        chunk: int,
        slot_cap: int,
        default_kappa: float,
        per_slot: bool,
    ) -> None:
        self.inst = inst
        self.scheduler = Scheduler.for_instance(cfg, inst, model, default_kappa)
        cost_rngs, completion_rngs = job_streams(seed, inst.n)
        self.sampler = CostSampler(inst, model, cost_rngs, chunk=chunk, record=record)
        self.geometric = inst.service_kind is ServiceKind.GEOMETRIC
        self.costs = np.asarray(inst.costs, dtype=float)
        self.expected_cost = 0.0
        self.stretch: Optional[int] = None
        self.completions = [UniformStream(r, chunk) for r in completion_rngs]
        self.p_complete = np.minimum(1.0, np.asarray(inst.rates) / inst.t_scale)
        self.estimator = EstimatorState.empty(inst.n)
        self.remaining = np.ones(inst.n, dtype=bool)
        self.work = np.asarray(inst.service, dtype=np.int64)
        self.completion_slot = np.zeros(inst.n, dtype=np.int64)
        self.preempt_service = np.zeros(inst.n, dtype=np.int64)
        self.segments: list[list[int]] = []
        self.order: list[int] = []
        self.slot = 0
        self.slot_cap = slot_cap
        self.per_slot = per_slot

    def _serve(self, job: int, slots: int) -> None:
        if self.segments and self.segments[-1][0] == job:
            self.segments[-1][1] += slots
        else:
            self.segments.append([job, slots])

    def _served_one_completes(self, job: int) -> bool:
        if self.geometric:
            return self.completions[job].next() < self.p_complete[job]
        self.work[job] -= 1
        return bool(self.work[job] == 0)

    def _extra_slots(self, job: int) -> int:
        if self.geometric:
            return self.completions[job].slots_until_success(self.p_complete[job])
        return int(self.work[job])

    def _account(self, job: int, holding: float) -> None:
        """Add the slot's holding cost, or a committed stretch's expected cost.

        A stretch that starts now costs `holding` per slot for a geometric
        number of slots with mean 1 / p, whatever the job received before.
        """
        if not self.scheduler.holds(job):
            self.expected_cost += holding
        elif self.stretch != job:
            self.stretch = job
            self.expected_cost += holding / self.p_complete[job]

    def _check_cap(self, upcoming: int) -> None:
        if self.slot + upcoming > self.slot_cap:
            raise SimulationError(
                f"run exceeded {self.slot_cap} slots with "
                f"{int(self.remaining.sum())} jobs remaining"
            )

    def step(self) -> None:
        self._check_cap(1)
        self.slot += 1
        sums = self.sampler.take(self.remaining, 1)
        self.estimator.observe_block(self.remaining, sums, 1)
        job = self.scheduler.select(self.estimator, self.remaining, self.slot)
        if self.geometric:
            self._account(job, float(np.dot(self.costs, self.remaining)))
        self._serve(job, 1)
        if self.slot <= self.scheduler.t_s:
            self.preempt_service[job] += 1
        done = self._served_one_completes(job)
        if not done and not self.per_slot and self.scheduler.holds(job):
            # The decision is fixed until completion: consume the whole stretch.
            extra = self._extra_slots(job)
            self._check_cap(extra)
            sums = self.sampler.take(self.remaining, extra)
            self.estimator.observe_block(self.remaining, sums, extra)
            self.work[job] = 0
            self._serve(job, extra)
            self.slot += extra
            done = True
        if done:
            self.remaining[job] = False
            if self.stretch == job:
                self.stretch = None
            self.completion_slot[job] = self.slot
            self.order.append(job)

    def run(self) -> ScheduleTrace:
        while self.remaining.any():
            self.step()
        return ScheduleTrace(
            segments=tuple((j, n) for j, n in self.segments),
            completion_slot=tuple(int(s) for s in self.completion_slot),
            preempt_service=tuple(int(s) for s in self.preempt_service),
            completion_order=tuple(self.order),
            total_slots=self.slot,
            t_s=self.scheduler.t_s,
            expected_cost=float(self.expected_cost) if self.geometric else None,
            samples=self.sampler.history(),
        )


def simulate(
    inst: Instance,
    model: CostModel,
    cfg: PolicyConfig,
    seed: SeedLike,
    *,
    record: bool = False,
    chunk: int = DEFAULT_CHUNK,
    slot_cap: int = DEFAULT_SLOT_CAP,
    default_kappa: float = 1.0,
    per_slot: bool = False,
) -> ScheduleTrace:
    """Simulate one run until every job completes.

    Within a slot every remaining job draws a cost and the estimator observes
    it, then the policy selects, one unit of service is applied and completion
    is checked. `per_slot` disables the fast-forward of committed stretches.
    Both modes consume the same draws and serve the same slots; Gaussian block
    sums may differ from slot-by-slot sums in the last bit.

    Geometric runs also carry `expected_cost`: realized holding cost for
    slots served without commitment, plus the expected cost of every committed
    stretch given the state at its start.
    """
    return _Run(
        inst,
        model,
        cfg,
        seed,
        record=record,
        chunk=chunk,
        slot_cap=slot_cap,
        default_kappa=default_kappa,
        per_slot=per_slot,
    ).run()


def replay_pair(
    inst: Instance,
    model: CostModel,
    cfg_a: PolicyConfig,
    cfg_b: PolicyConfig,
    seed: SeedLike,
    **kwargs,
) -> tuple[ScheduleTrace, ScheduleTrace]:
    """Run two policies on identical per-job cost and completion substreams."""
    return (
        simulate(inst, model, cfg_a, seed, **kwargs),
        simulate(inst, model, cfg_b, seed, **kwargs),
    )


def iter_slot_records(trace: ScheduleTrace) -> Iterator[SlotRecord]:
    """Per-slot audit records of a recorded run."""
    if trace.samples is None:
        raise SimulationError("trace was not recorded; simulate with record=True")
    served = trace.served
    completed_at = {slot: job for job, slot in enumerate(trace.completion_slot)}
    for t in range(1, trace.total_slots + 1):
        present = [i for i in range(trace.n) if trace.completion_slot[i] >= t]
        yield SlotRecord(
            slot=t,
            served=int(served[t - 1]),
            completed=completed_at.get(t),
            costs_observed={i: float(trace.samples[i][t - 1]) for i in present},
        )


def dump_trace(trace: ScheduleTrace, target: str | Path | IO[str]) -> int:
    """Write the NDJSON audit of a recorded run; returns the record count."""
    count = 0
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            return dump_trace(trace, fh)
    for record in iter_slot_records(trace):
        target.write(record.to_json() + "\n")
        count += 1
    return count


class SimulationService(BaseService):
    """Simulation entry point bound to the engine settings."""

    def _engine_kwargs(self) -> dict:
        sim = self.settings.simulation
        return {
            "chunk": sim.stream_chunk,
            "slot_cap": sim.slot_cap,
            "default_kappa": sim.default_kappa,
        }

    def simulate(
        self,
        inst: Instance,
        model: CostModel,
        cfg: PolicyConfig,
        seed: SeedLike,
        record: bool = False,
    ) -> ScheduleTrace:
        trace = simulate(inst, model, cfg, seed, record=record, **self._engine_kwargs())
        self.log.debug(
            "simulation_finished",
            policy=cfg.name,
            total_slots=trace.total_slots,
            t_s=trace.t_s,
        )
        return trace

    def replay_pair(
        self,
        inst: Instance,
        model: CostModel,
        cfg_a: PolicyConfig,
        cfg_b: PolicyConfig,
        seed: SeedLike,
    ) -> tuple[ScheduleTrace, ScheduleTrace]:
        return replay_pair(inst, model, cfg_a, cfg_b, seed, **self._engine_kwargs())
