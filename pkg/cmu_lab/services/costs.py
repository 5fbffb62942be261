"""Stochastic holding costs, running-mean estimation and confidence radii."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from numpy.random import Generator, SeedSequence
from pydantic import BaseModel, ConfigDict, Field

from ..core.models import Instance
from ..exceptions import AnalysisError

SeedLike = int | Sequence[int]

_COST_STREAM = 0
_COMPLETION_STREAM = 1


class CostKind(str, Enum):
    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"
    SCALED_TWO_POINT = "two_point"


class CostModel(BaseModel):
    """Distribution of the per-slot holding cost of a present job."""

    model_config = ConfigDict(frozen=True)

    kind: CostKind = CostKind.BERNOULLI
    sigma: float = Field(1.0, gt=0.0, le=1.0)

    @property
    def ranks_raw_mean(self) -> bool:
        """Two-point observations already have mean c_i * mu_i."""
        return self.kind is CostKind.SCALED_TWO_POINT

    def observation_mean(self, inst: Instance) -> np.ndarray:
        """Mean of one observation for every job."""
        costs = np.asarray(inst.costs, dtype=float)
        if self.ranks_raw_mean:
            return costs * np.asarray(inst.rates, dtype=float)
        return costs

    def draw(self, rng: Generator, mean: float, rate: float, size: int) -> np.ndarray:
        if self.kind is CostKind.BERNOULLI:
            return (rng.random(size) < mean).astype(float)
        if self.kind is CostKind.GAUSSIAN:
            return mean + self.sigma * rng.standard_normal(size)
        return np.where(rng.random(size) < mean, float(rate), 0.0)


def _seed_entropy(seed: SeedLike) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def job_streams(seed: SeedLike, n: int) -> tuple[list[Generator], list[Generator]]:
    """Independent cost and completion generators, one named substream per job."""
    entropy = _seed_entropy(seed)
    cost = [
        np.random.default_rng(SeedSequence(entropy, spawn_key=(_COST_STREAM, i)))
        for i in range(n)
    ]
    completion = [
        np.random.default_rng(SeedSequence(entropy, spawn_key=(_COMPLETION_STREAM, i)))
        for i in range(n)
    ]
    return cost, completion


def sample_cost(job: int, inst: Instance, model: CostModel, rng: Generator) -> float:
    """One holding-cost draw for a job."""
    return float(model.draw(rng, inst.costs[job], inst.rates[job], 1)[0])


@dataclass
class EstimatorState:
    """Running sums and counts of observed holding costs."""

    sums: np.ndarray
    counts: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "EstimatorState":
        return cls(sums=np.zeros(n), counts=np.zeros(n, dtype=np.int64))

    @property
    def means(self) -> np.ndarray:
        out = np.zeros_like(self.sums)
        np.divide(self.sums, self.counts, out=out, where=self.counts > 0)
        return out

    def observe(self, job: int, x: float) -> "EstimatorState":
        self.sums[job] += x
        self.counts[job] += 1
        return self

    def observe_block(
        self, active: np.ndarray, sums: np.ndarray, count: int
    ) -> "EstimatorState":
        """Add `count` observations per active job, summing to `sums`."""
        self.sums[active] += sums[active]
        self.counts[active] += count
        return self


def confidence_radius(
    t: int | np.ndarray, n: int, t_scale: int, mu_min: float
) -> float | np.ndarray:
    """Clean-event radius x_t = sqrt((2 / t) log(N T / mu_min))."""
    ratio = n * t_scale / mu_min
    if ratio <= 1:
        raise AnalysisError(f"N*T/mu_min must exceed 1, got {ratio}")
    log_term = math.log(ratio)
    if isinstance(t, np.ndarray):
        return np.sqrt(2.0 * log_term / t)
    if t < 1:
        raise AnalysisError(f"slot index must be positive, got {t}")
    return math.sqrt(2.0 * log_term / t)


@dataclass
class CostSampler:
    """Buffered cost draws for every job, aligned on the slot index.

    Every present job draws exactly once per slot, so all present jobs sit at
    the same position of their own substream. Rows are refilled chunk by chunk
    from the job's generator; consuming k slots at once yields the same values
    as k single slots.
    """

    inst: Instance
    model: CostModel
    rngs: Sequence[Generator]
    chunk: int = 4096
    record: bool = False
    _buf: np.ndarray = field(init=False, repr=False)
    _pos: int = field(init=False, repr=False)
    _history: list[list[np.ndarray]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._buf = np.zeros((self.inst.n, self.chunk))
        self._pos = self.chunk
        self._history = [[] for _ in range(self.inst.n)]

    def _refill(self, idx: np.ndarray) -> None:
        for i in idx:
            self._buf[i] = self.model.draw(
                self.rngs[i], self.inst.costs[i], self.inst.rates[i], self.chunk
            )
        self._pos = 0

    def take(self, active: np.ndarray, k: int = 1) -> np.ndarray:
        """Sums of the next k draws of every active job (zero elsewhere)."""
        sums = np.zeros(self.inst.n)
        idx = np.flatnonzero(active)
        while k > 0:
            if self._pos == self.chunk:
                self._refill(idx)
            m = min(k, self.chunk - self._pos)
            block = self._buf[idx, self._pos : self._pos + m]
            sums[idx] += block.sum(axis=1)
            if self.record:
                for row, job in enumerate(idx):
                    self._history[job].append(block[row].copy())
            self._pos += m
            k -= m
        return sums

    def history(self) -> Optional[tuple[np.ndarray, ...]]:
        if not self.record:
            return None
        return tuple(
            np.concatenate(parts) if parts else np.zeros(0) for parts in self._history
        )
