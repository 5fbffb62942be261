"""Oracles and diagnostics for the cmu lab.

Contains the brute-force optimum over service orders, the exchange-argument
decomposition of an order's excess cost, clean-event coverage of recorded
estimator histories and log-log slope fits.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats

from ..core.models import Instance
from ..exceptions import AnalysisError
from .costs import CostModel, SeedLike, confidence_radius
from .engine import simulate
from .policies import PolicyConfig

MAX_BRUTE_FORCE_JOBS = 10
IDENTITY_RTOL = 1e-9

_PERMUTATION_CHUNK = 50_000


@dataclass(frozen=True)
class DecompositionResult:
    """Both sides of the decomposition; `terms` holds (i, l, value) per pair."""

    lhs: float
    rhs: float
    terms: tuple[tuple[int, int, float], ...]

    @property
    def holds(self) -> bool:
        return abs(self.lhs - self.rhs) <= IDENTITY_RTOL * max(1.0, abs(self.lhs))


class SlopeFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    slope: float
    intercept: float
    r_squared: float


def order_cost(inst: Instance, order: Sequence[int]) -> float:
    """Expected cumulative holding cost of serving `order` nonpreemptively."""
    if sorted(order) != list(range(inst.n)):
        raise AnalysisError(f"{list(order)} is not an order of {inst.n} jobs")
    idx = np.asarray(order)
    completion = np.cumsum(np.asarray(inst.mean_service)[idx])
    return float(np.dot(np.asarray(inst.costs)[idx], completion))


def brute_force_min_cost(inst: Instance) -> tuple[float, tuple[int, ...]]:
    """Minimum over all N! nonpreemptive orders, with the first minimizing order."""
    if inst.n > MAX_BRUTE_FORCE_JOBS:
        raise AnalysisError(
            f"brute force is limited to {MAX_BRUTE_FORCE_JOBS} jobs, got {inst.n}"
        )
    costs = np.asarray(inst.costs)
    service = np.asarray(inst.mean_service)
    best_value, best_order = math.inf, tuple(range(inst.n))
    perms = itertools.permutations(range(inst.n))
    while True:
        block = np.array(
            list(itertools.islice(perms, _PERMUTATION_CHUNK)), dtype=np.int64
        )
        if block.size == 0:
            break
        values = (costs[block] * np.cumsum(service[block], axis=1)).sum(axis=1)
        k = int(np.argmin(values))
        if values[k] < best_value:
            best_value, best_order = float(values[k]), tuple(int(j) for j in block[k])
    return best_value, best_order


def _check_permutation(sigma: Sequence[int], n: int) -> np.ndarray:
    arr = np.asarray(sigma, dtype=np.int64)
    if arr.shape != (n,) or sorted(arr.tolist()) != list(range(n)):
        raise AnalysisError(f"{list(sigma)} is not a permutation of {n} jobs")
    return arr


def _sequence_cost(c: np.ndarray, mu: np.ndarray, t_scale: int) -> float:
    return float(np.dot(c, np.cumsum(t_scale / mu)))


def _pair_terms(
    c: np.ndarray, mu: np.ndarray, t_scale: int, inverted: np.ndarray
) -> tuple[float, tuple[tuple[int, int, float], ...]]:
    """Sum of (c_l mu_l - c_i mu_i) T / (mu_l mu_i) over inverted position pairs."""
    cmu = c * mu
    i_idx, l_idx = np.nonzero(inverted)
    values = (cmu[l_idx] - cmu[i_idx]) * t_scale / (mu[l_idx] * mu[i_idx])
    terms = tuple(
        (int(i), int(ell), float(v)) for i, ell, v in zip(i_idx, l_idx, values)
    )
    return float(values.sum()), terms


def decomposition_check(
    c: Sequence[float], mu: Sequence[float], t_scale: int, sigma: Sequence[int]
) -> DecompositionResult:
    """Excess cost of serving order `sigma` over the cmu order, two ways.

    Jobs are relabeled so that label 0 has the largest c_i mu_i (ties keep the
    lower index first) and `sigma` is translated to the new labels. The left
    side is the cost difference of the two orders, the right side sums one
    exchange term per pair of positions i < l whose job at l precedes the job
    at i in cmu order. Positions in `terms` are 0-based.
    """
    c_arr, mu_arr = np.asarray(c, dtype=float), np.asarray(mu, dtype=float)
    if c_arr.shape != mu_arr.shape:
        raise AnalysisError("c and mu must have the same length")
    n = len(c_arr)
    sigma_arr = _check_permutation(sigma, n)
    order = np.lexsort((np.arange(n), -(c_arr * mu_arr)))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    cs, ms = c_arr[order], mu_arr[order]
    relabeled = rank[sigma_arr]

    lhs = _sequence_cost(cs[relabeled], ms[relabeled], t_scale) - _sequence_cost(
        cs, ms, t_scale
    )
    later = np.triu(np.ones((n, n), dtype=bool), k=1)
    inverted = later & (relabeled[None, :] < relabeled[:, None])
    rhs, terms = _pair_terms(cs[relabeled], ms[relabeled], t_scale, inverted)
    return DecompositionResult(lhs=lhs, rhs=rhs, terms=terms)


def stochastic_decomposition_check(
    c: Sequence[float],
    mu: Sequence[float],
    t_scale: int,
    sigma_subset: Sequence[int],
) -> DecompositionResult:
    """Decomposition restricted to an ordered subset of the jobs.

    The reference order is the cmu-descending reordering of the subset, and a
    pair of positions j < l contributes when the job at l has a strictly larger
    c mu than the job at j.
    """
    c_arr, mu_arr = np.asarray(c, dtype=float), np.asarray(mu, dtype=float)
    idx = np.asarray(sigma_subset, dtype=np.int64)
    if len(set(idx.tolist())) != len(idx):
        raise AnalysisError(f"subset {list(sigma_subset)} has duplicate indices")
    if len(idx) and (idx.min() < 0 or idx.max() >= len(c_arr)):
        raise AnalysisError(f"subset {list(sigma_subset)} is out of range")
    cs, ms = c_arr[idx], mu_arr[idx]
    k = len(idx)
    cmu = cs * ms
    ref = np.lexsort((np.arange(k), -cmu))

    lhs = _sequence_cost(cs, ms, t_scale) - _sequence_cost(cs[ref], ms[ref], t_scale)
    later = np.triu(np.ones((k, k), dtype=bool), k=1)
    inverted = later & (cmu[None, :] > cmu[:, None])
    rhs, terms = _pair_terms(cs, ms, t_scale, inverted)
    return DecompositionResult(lhs=lhs, rhs=rhs, terms=terms)


def collect_histories(
    inst: Instance,
    model: CostModel,
    cfg: PolicyConfig,
    reps: int,
    seed: SeedLike,
    **engine_kwargs,
) -> list[tuple[np.ndarray, ...]]:
    """Recorded cost samples of `reps` runs, one array per job and run."""
    base = [seed] if isinstance(seed, int) else list(seed)
    histories = []
    for rep in range(reps):
        trace = simulate(
            inst, model, cfg, (*base, rep), record=True, **engine_kwargs
        )
        assert trace.samples is not None
        histories.append(trace.samples)
    return histories


def clean_event_coverage(
    runs: Iterable[Sequence[np.ndarray]],
    inst: Instance,
    model: CostModel,
    radius_scale: float = 1.0,
) -> float:
    """Fraction of runs whose running means stay within x_t at every slot.

    The running mean of a job is compared against the mean of one
    observation, which is c_i except under the scaled two-point model.
    """
    target = model.observation_mean(inst)
    covered = total = 0
    for history in runs:
        total += 1
        ok = True
        for job, samples in enumerate(history):
            if len(samples) == 0:
                continue
            t = np.arange(1, len(samples) + 1)
            running = np.cumsum(samples) / t
            radius = radius_scale * confidence_radius(
                t, inst.n, inst.t_scale, inst.mu_min
            )
            if np.any(np.abs(running - target[job]) > radius):
                ok = False
                break
        covered += ok
    if total == 0:
        raise AnalysisError("coverage needs at least one run")
    return covered / total


def loglog_slope(points: Sequence[tuple[float, float]]) -> SlopeFit:
    """Ordinary least squares of log y on log x."""
    if len(points) < 2:
        raise AnalysisError("slope fit needs at least two points")
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise AnalysisError("slope fit needs positive x and y")
    if len(np.unique(xs)) < 2:
        raise AnalysisError("slope fit needs at least two distinct x values")
    lx, ly = np.log(xs), np.log(ys)
    fit = stats.linregress(lx, ly)
    residual = ly - (fit.intercept + fit.slope * lx)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(residual**2)) / ss_tot
    return SlopeFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=min(1.0, max(0.0, r_squared)),
    )


def relative_gap(a: float, b: float, scale: Optional[float] = None) -> float:
    """|a - b| relative to max(1, |scale or a|)."""
    ref = abs(a) if scale is None else abs(scale)
    return abs(a - b) / max(1.0, ref)
