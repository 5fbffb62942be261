"""Replications, parameter sweeps and aggregation into result tables."""

import csv
import json
import math
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path
from typing import IO, Any, Literal, Optional, Sequence

import numpy as np
import structlog
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from ..core.accounting import regret
from ..core.models import Instance
from ..exceptions import AnalysisError, ConfigurationError
from .analysis import SlopeFit, loglog_slope
from .base import BaseService
from .costs import CostKind, CostModel
from .engine import simulate
from .generators import GeneratorFamily, GeneratorSpec, generate_instance
from .policies import PolicyConfig

logger = structlog.get_logger(__name__)

CSV_HEADER = ("axis", "policy", "mean_regret", "std_err", "mean_rel_regret", "reps")

# Last entry of a replication seed: what the derived stream is used for.
ROLE_INSTANCE = 0
ROLE_SIMULATION = 1


class SweepAxis(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis: Literal["T", "N", "epsilon"]
    values: tuple[float, ...] = Field(min_length=1)

    @field_validator("values")
    @classmethod
    def check_increasing(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("sweep values must be strictly increasing")
        return v

    @model_validator(mode="after")
    def check_integral(self) -> "SweepAxis":
        if self.axis in ("T", "N"):
            bad = [x for x in self.values if x < 1 or x != math.floor(x)]
            if bad:
                raise ValueError(f"{self.axis} values must be positive integers: {bad}")
        return self

    def apply(self, spec: GeneratorSpec, value: float) -> GeneratorSpec:
        """Generator spec of one sweep point."""
        key = {"T": "t_scale", "N": "n", "epsilon": "epsilon"}[self.axis]
        raw = spec.model_dump()
        raw[key] = int(value) if self.axis in ("T", "N") else value
        try:
            return GeneratorSpec.model_validate(raw)
        except ValidationError as e:
            raise ConfigurationError(f"sweep point {self.axis}={value}: {e}") from e


class ExperimentConfig(BaseModel):
    """One experiment: an instance family, the policies and the replication plan.

    Every replication draws a fresh instance; the seed of `generator` is
    replaced by one derived from `seed_base`, the sweep point and the rep.
    """

    model_config = ConfigDict(frozen=True)

    generator: GeneratorSpec
    policies: tuple[PolicyConfig, ...] = Field(min_length=1)
    cost_model: CostModel = Field(default_factory=CostModel)
    reps: PositiveInt = 1
    seed_base: NonNegativeInt = Field(0, lt=2**64)
    sweep: Optional[SweepAxis] = None

    @model_validator(mode="before")
    @classmethod
    def default_cost_model(cls, data: Any) -> Any:
        """Lower-bound families observe scaled two-point costs by default."""
        if not isinstance(data, dict) or "cost_model" in data:
            return data
        generator = data.get("generator")
        family = (
            generator.get("family")
            if isinstance(generator, dict)
            else getattr(generator, "family", None)
        )
        try:
            lower_bound = GeneratorFamily(family).is_lower_bound
        except ValueError:
            lower_bound = False
        if lower_bound:
            data = {**data, "cost_model": CostModel(kind=CostKind.SCALED_TWO_POINT)}
        return data

    @field_validator("policies")
    @classmethod
    def check_unique_names(
        cls, v: tuple[PolicyConfig, ...]
    ) -> tuple[PolicyConfig, ...]:
        names = [p.name for p in v]
        if len(set(names)) != len(names):
            raise ValueError(f"policy labels must be unique: {names}")
        return v

    def points(self) -> list[tuple[float, GeneratorSpec]]:
        """(axis value, generator spec) per sweep point."""
        if self.sweep is None:
            return [(float(self.generator.t_scale), self.generator)]
        return [
            (float(v), self.sweep.apply(self.generator, v)) for v in self.sweep.values
        ]


class ResultRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis_value: float
    policy: str
    mean_regret: float
    std_err: float = Field(ge=0.0)
    mean_relative_regret: float
    reps: PositiveInt


class PairedDifference(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis_value: float
    mean_difference: float
    std_err: float = Field(ge=0.0)

    @property
    def z_score(self) -> float:
        if self.std_err == 0:
            return math.inf if self.mean_difference > 0 else -math.inf
        return self.mean_difference / self.std_err


@dataclass(frozen=True)
class ReplicationTable:
    """Per-replication regrets indexed [point, rep, policy]."""

    axis_values: tuple[float, ...]
    policies: tuple[str, ...]
    regrets: np.ndarray
    relative: np.ndarray

    def column(self, policy: str) -> int:
        try:
            return self.policies.index(policy)
        except ValueError:
            raise AnalysisError(f"no policy labelled {policy!r} in {self.policies}")


def parse_experiment_config(raw: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first["loc"]) or "config"
        raise ConfigurationError(f"{loc}: {first['msg']}") from e


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read experiment config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigurationError("experiment config must hold a JSON object")
    return parse_experiment_config(raw)


def replication_seed(
    seed_base: int, point: int, rep: int, role: int
) -> tuple[int, ...]:
    """Seed entropy of one replication stream; injective in its arguments."""
    return (seed_base, point, rep, role)


@dataclass(frozen=True)
class _Task:
    point: int
    rep: int
    source: Instance | GeneratorSpec
    policies: tuple[PolicyConfig, ...]
    cost_model: CostModel
    seed_base: int
    engine_kwargs: dict


def _replicate(task: _Task) -> "_Outcome":
    """One replication: every policy on the same instance and cost streams."""
    if isinstance(task.source, Instance):
        inst = task.source
    else:
        inst = generate_instance(
            task.source,
            replication_seed(task.seed_base, task.point, task.rep, ROLE_INSTANCE),
        )
    sim_seed = replication_seed(task.seed_base, task.point, task.rep, ROLE_SIMULATION)
    regrets, relative = [], []
    for cfg in task.policies:
        trace = simulate(inst, task.cost_model, cfg, sim_seed, **task.engine_kwargs)
        report = regret(trace, inst)
        regrets.append(report.regret)
        relative.append(report.relative_regret)
    return task.point, task.rep, regrets, relative


_Outcome = tuple[int, int, list[float], list[float]]


def _execute(tasks: list[_Task], threads: int) -> list[_Outcome]:
    if threads <= 1 or len(tasks) <= 1:
        return [_replicate(task) for task in tasks]
    workers = min(threads, len(tasks))
    chunksize = max(1, len(tasks) // (4 * workers))
    with get_context("spawn").Pool(processes=workers) as pool:
        return list(pool.imap(_replicate, tasks, chunksize=chunksize))


def _run_tasks(
    sources: Sequence[tuple[float, Instance | GeneratorSpec]],
    policies: tuple[PolicyConfig, ...],
    cost_model: CostModel,
    reps: int,
    seed_base: int,
    threads: int,
    engine_kwargs: dict,
) -> ReplicationTable:
    tasks = [
        _Task(p, k, source, policies, cost_model, seed_base, engine_kwargs)
        for p, (_, source) in enumerate(sources)
        for k in range(reps)
    ]
    shape = (len(sources), reps, len(policies))
    regrets, relative = np.zeros(shape), np.zeros(shape)
    for point, rep, reg, rel in _execute(tasks, threads):
        regrets[point, rep] = reg
        relative[point, rep] = rel
    return ReplicationTable(
        axis_values=tuple(value for value, _ in sources),
        policies=tuple(p.name for p in policies),
        regrets=regrets,
        relative=relative,
    )


def run_replications(
    cfg: ExperimentConfig, threads: int = 1, **engine_kwargs
) -> ReplicationTable:
    """Per-replication regrets of every policy at every sweep point."""
    return _run_tasks(
        cfg.points(),
        cfg.policies,
        cfg.cost_model,
        cfg.reps,
        cfg.seed_base,
        threads,
        engine_kwargs,
    )


def run_on_instance(
    inst: Instance,
    policies: Sequence[PolicyConfig],
    cost_model: CostModel,
    reps: int,
    seed: int,
    threads: int = 1,
    **engine_kwargs,
) -> ReplicationTable:
    """Replications of fixed-instance runs, axis value T."""
    return _run_tasks(
        [(float(inst.t_scale), inst)],
        tuple(policies),
        cost_model,
        reps,
        seed,
        threads,
        engine_kwargs,
    )


def _std_err(samples: np.ndarray) -> float:
    if len(samples) < 2:
        return 0.0
    return float(np.std(samples, ddof=1) / math.sqrt(len(samples)))


def aggregate(table: ReplicationTable) -> list[ResultRow]:
    """Mean regret and standard error per (point, policy), in index order."""
    rows = []
    reps = table.regrets.shape[1]
    for p, axis_value in enumerate(table.axis_values):
        for j, name in enumerate(table.policies):
            samples = table.regrets[p, :, j]
            rows.append(
                ResultRow(
                    axis_value=axis_value,
                    policy=name,
                    mean_regret=float(np.mean(samples)),
                    std_err=_std_err(samples),
                    mean_relative_regret=float(np.mean(table.relative[p, :, j])),
                    reps=reps,
                )
            )
    return rows


def run_experiment(
    cfg: ExperimentConfig, threads: int = 1, **engine_kwargs
) -> list[ResultRow]:
    """Aggregated table of an experiment; deterministic given `cfg`."""
    return aggregate(run_replications(cfg, threads, **engine_kwargs))


def paired_difference(
    table: ReplicationTable, policy_a: str, policy_b: str
) -> list[PairedDifference]:
    """Mean and standard error of regret(a) - regret(b) per sweep point.

    Both policies ran on the same cost and completion streams, so the
    per-replication differences carry the common noise out.
    """
    a, b = table.column(policy_a), table.column(policy_b)
    out = []
    for p, axis_value in enumerate(table.axis_values):
        diff = table.regrets[p, :, a] - table.regrets[p, :, b]
        out.append(
            PairedDifference(
                axis_value=axis_value,
                mean_difference=float(np.mean(diff)),
                std_err=_std_err(diff),
            )
        )
    return out


def write_rows_csv(rows: Sequence[ResultRow], stream: IO[str]) -> None:
    """Result table as CSV; floats are written with repr for exact round trips."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [
                repr(row.axis_value),
                row.policy,
                repr(row.mean_regret),
                repr(row.std_err),
                repr(row.mean_relative_regret),
                row.reps,
            ]
        )


def fit_axis_slope(rows: Sequence[ResultRow], policy: str) -> SlopeFit:
    """Log-log slope of mean regret against the axis for one policy.

    Points with nonpositive mean regret are excluded with a warning.
    """
    points = []
    for row in rows:
        if row.policy != policy:
            continue
        if row.mean_regret <= 0:
            logger.warning(
                "slope_point_excluded",
                policy=policy,
                axis_value=row.axis_value,
                mean_regret=row.mean_regret,
            )
            continue
        points.append((row.axis_value, row.mean_regret))
    if len(points) < 2:
        raise AnalysisError(f"policy {policy!r} has fewer than two usable points")
    return loglog_slope(points)


def _sweep_values(cfg: ExperimentConfig, axis: str) -> tuple[float, ...]:
    if cfg.sweep is None or cfg.sweep.axis != axis:
        raise ConfigurationError(f"experiment has no {axis} sweep")
    return cfg.sweep.values


def _slope_policy(cfg: ExperimentConfig, policy: Optional[str]) -> str:
    if policy is not None:
        return policy
    for p in cfg.policies:
        if p.kind.has_preemption_phase:
            return p.name
    raise ConfigurationError("experiment has no ptn policy to fit")


def sweep_t_slope(
    cfg: ExperimentConfig,
    policy: Optional[str] = None,
    threads: int = 1,
    **engine_kwargs,
) -> SlopeFit:
    """Slope of log mean regret against log T (default: the ptn policy)."""
    values = _sweep_values(cfg, "T")
    if len(values) < 4 or values[-1] / values[0] < 100:
        raise ConfigurationError("T sweep needs at least 4 values spanning two decades")
    rows = run_experiment(cfg, threads, **engine_kwargs)
    return fit_axis_slope(rows, _slope_policy(cfg, policy))


def sweep_n_slope(
    cfg: ExperimentConfig,
    policy: Optional[str] = None,
    threads: int = 1,
    **engine_kwargs,
) -> SlopeFit:
    """Slope of log mean regret against log N (default: the ptn policy)."""
    values = _sweep_values(cfg, "N")
    if len(values) < 2:
        raise AnalysisError("degenerate axis: N sweep needs at least two values")
    rows = run_experiment(cfg, threads, **engine_kwargs)
    return fit_axis_slope(rows, _slope_policy(cfg, policy))


class ExperimentService(BaseService):
    """Harness entry point bound to the configured worker count."""

    def _threads(self, threads: Optional[int]) -> int:
        return threads or self.settings.harness.worker_count

    def _engine_kwargs(self) -> dict:
        sim = self.settings.simulation
        return {
            "chunk": sim.stream_chunk,
            "slot_cap": sim.slot_cap,
            "default_kappa": sim.default_kappa,
        }

    def replications(
        self, cfg: ExperimentConfig, threads: Optional[int] = None
    ) -> ReplicationTable:
        workers = self._threads(threads)
        self.log.info(
            "experiment_started",
            points=len(cfg.points()),
            policies=[p.name for p in cfg.policies],
            reps=cfg.reps,
            workers=workers,
        )
        return run_replications(cfg, workers, **self._engine_kwargs())

    def run(
        self, cfg: ExperimentConfig, threads: Optional[int] = None
    ) -> list[ResultRow]:
        return aggregate(self.replications(cfg, threads))

    def run_instance(
        self,
        inst: Instance,
        policies: Sequence[PolicyConfig],
        cost_model: CostModel,
        reps: int,
        seed: int,
        threads: Optional[int] = None,
    ) -> list[ResultRow]:
        table = run_on_instance(
            inst,
            policies,
            cost_model,
            reps,
            seed,
            self._threads(threads),
            **self._engine_kwargs(),
        )
        return aggregate(table)

    def slope(
        self,
        cfg: ExperimentConfig,
        policy: Optional[str] = None,
        threads: Optional[int] = None,
    ) -> SlopeFit:
        axis = cfg.sweep.axis if cfg.sweep is not None else None
        kwargs = self._engine_kwargs()
        if axis == "T":
            return sweep_t_slope(cfg, policy, self._threads(threads), **kwargs)
        if axis == "N":
            return sweep_n_slope(cfg, policy, self._threads(threads), **kwargs)
        rows = run_experiment(cfg, self._threads(threads), **kwargs)
        return fit_axis_slope(rows, _slope_policy(cfg, policy))

