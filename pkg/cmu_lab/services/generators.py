"""Instance families for the experiments and the lower-bound constructions."""

from enum import Enum
from typing import Literal, Optional, Sequence

import numpy as np
from numpy.random import SeedSequence
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveInt,
    ValidationError,
    model_validator,
)

from ..core.models import Instance, ServiceKind, parse_instance
from ..exceptions import ConfigurationError
from .costs import SeedLike

# Shortest service length produced by the Pareto family.
PARETO_OFFSET = 99

_COST_DRAWS = 0
_SERVICE_DRAWS = 1


class GeneratorFamily(str, Enum):
    UNIFORM_BAND = "uniform_band"
    PARETO_SERVICE = "pareto_service"
    LOWER_BOUND_PAIR = "lower_bound_pair"
    LOWER_BOUND_BASE = "lower_bound_base"

    @property
    def is_lower_bound(self) -> bool:
        return self in (
            GeneratorFamily.LOWER_BOUND_PAIR,
            GeneratorFamily.LOWER_BOUND_BASE,
        )


class LowerBoundSide(str, Enum):
    BASE = "base"
    SIDE1 = "side1"
    SIDE2 = "side2"


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: GeneratorFamily = GeneratorFamily.UNIFORM_BAND
    n: PositiveInt = 20
    t_scale: PositiveInt = 2000
    epsilon: float = Field(0.0, ge=0.0)
    pareto_shape: float = Field(0.7, gt=0.0)
    seed: NonNegativeInt = 0
    which_side: Literal[1, 2] = 1
    rates: Optional[tuple[float, ...]] = None
    service: ServiceKind = ServiceKind.DETERMINISTIC

    @model_validator(mode="after")
    def check_family(self) -> "GeneratorSpec":
        if self.family is GeneratorFamily.UNIFORM_BAND and self.epsilon > 0.5:
            raise ValueError(f"uniform band needs epsilon <= 0.5, got {self.epsilon}")
        if self.family is GeneratorFamily.LOWER_BOUND_PAIR and self.n < 2:
            raise ValueError("lower-bound pair instances need n >= 2")
        if self.rates is not None and len(self.rates) != self.n:
            raise ValueError(
                f"rates has {len(self.rates)} entries, expected n={self.n}"
            )
        return self


def _rng(seed: SeedLike, stream: int) -> np.random.Generator:
    return np.random.default_rng(SeedSequence(seed, spawn_key=(stream,)))


def _band_costs(n: int, epsilon: float, seed: SeedLike) -> np.ndarray:
    if not 0.0 <= epsilon <= 0.5:
        raise ConfigurationError(f"epsilon must lie in [0, 0.5], got {epsilon}")
    return _rng(seed, _COST_DRAWS).uniform(0.5 - epsilon, 0.5 + epsilon, n)


def gen_uniform_band(
    n: int,
    t_scale: int,
    epsilon: float,
    seed: SeedLike,
    service: ServiceKind = ServiceKind.DETERMINISTIC,
) -> Instance:
    """Unit rates with costs iid uniform on [0.5 - epsilon, 0.5 + epsilon)."""
    costs = _band_costs(n, epsilon, seed)
    return parse_instance(
        {
            "n": n,
            "t_scale": t_scale,
            "costs": costs.tolist(),
            "rates": [1.0] * n,
            "service": service,
        }
    )


def pareto_variate(u: float | np.ndarray, shape: float = 0.7) -> np.ndarray:
    """Inverse CDF of the Pareto law with density shape / x^(shape + 1) on [1, inf)."""
    return (1.0 - np.asarray(u, dtype=float)) ** (-1.0 / shape)


def pareto_service_length(u: float | np.ndarray, shape: float = 0.7) -> np.ndarray:
    """Service length 99 + floor(x) for a Pareto(shape) variate x."""
    return PARETO_OFFSET + np.floor(pareto_variate(u, shape)).astype(np.int64)


def gen_pareto_services(
    n: int,
    t_scale_label: Optional[int],
    shape: float,
    seed: SeedLike,
    epsilon: float = 0.5,
) -> Instance:
    """Heavy-tailed service lengths with uniform-band costs.

    The horizon scale is the largest sampled length and mu_i = T / service_i,
    so the sampled lengths are preserved exactly. `t_scale_label` only names
    the experiment point.
    """
    if shape <= 0:
        raise ConfigurationError(f"Pareto shape must be positive, got {shape}")
    lengths = pareto_service_length(_rng(seed, _SERVICE_DRAWS).random(n), shape)
    t_scale = int(lengths.max())
    return parse_instance(
        {
            "n": n,
            "t_scale": t_scale,
            "costs": _band_costs(n, epsilon, seed).tolist(),
            "rates": (t_scale / lengths).tolist(),
            "service": ServiceKind.DETERMINISTIC,
        }
    )


def lower_bound_partition(n: int) -> tuple[list[int], list[int]]:
    """L_1 holds the odd positions (1-based), L_2 the even ones."""
    return list(range(0, n, 2)), list(range(1, n, 2))


def lower_bound_epsilon(n: int, t_scale: int, mu_min: float, mu_max: float) -> float:
    """Default gap (mu_min mu_max)^(1/3) N^(-1/3) T^(-1/3)."""
    return (mu_min * mu_max) ** (1.0 / 3.0) * (n * t_scale) ** (-1.0 / 3.0)


def gen_lower_bound(
    n: int,
    epsilon: float,
    which: LowerBoundSide,
    mus: Optional[Sequence[float]],
    t_scale: int,
) -> Instance:
    """Base instance c_i = 1/(2 mu_i), or a side raising L_j to (1 + eps)/(2 mu_i)."""
    rates = [1.0] * n if mus is None else [float(mu) for mu in mus]
    if len(rates) != n:
        raise ConfigurationError(f"expected {n} rates, got {len(rates)}")
    if which is not LowerBoundSide.BASE and n < 2:
        raise ConfigurationError("lower-bound sides need n >= 2")
    if epsilon < 0:
        raise ConfigurationError(f"epsilon must be nonnegative, got {epsilon}")
    raised: set[int] = set()
    if which is not LowerBoundSide.BASE:
        l1, l2 = lower_bound_partition(n)
        raised = set(l1 if which is LowerBoundSide.SIDE1 else l2)
    costs = [
        (1.0 + epsilon) / (2.0 * mu) if i in raised else 1.0 / (2.0 * mu)
        for i, mu in enumerate(rates)
    ]
    if max(costs) > 1.0:
        raise ConfigurationError(f"epsilon {epsilon} pushes a cost above 1")
    return parse_instance(
        {"n": n, "t_scale": t_scale, "costs": costs, "rates": rates, "service": "det"}
    )


def parse_generator_spec(raw: dict) -> GeneratorSpec:
    try:
        return GeneratorSpec.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first["loc"]) or "generator"
        raise ConfigurationError(f"{loc}: {first['msg']}") from e


def generate_instance(spec: GeneratorSpec, seed: Optional[SeedLike] = None) -> Instance:
    """Instance described by a generator spec; `seed` overrides `spec.seed`."""
    seed = spec.seed if seed is None else seed
    if spec.family is GeneratorFamily.UNIFORM_BAND:
        return gen_uniform_band(spec.n, spec.t_scale, spec.epsilon, seed, spec.service)
    if spec.family is GeneratorFamily.PARETO_SERVICE:
        return gen_pareto_services(
            spec.n, spec.t_scale, spec.pareto_shape, seed, spec.epsilon
        )
    which = (
        LowerBoundSide.BASE
        if spec.family is GeneratorFamily.LOWER_BOUND_BASE
        else LowerBoundSide(f"side{spec.which_side}")
    )
    epsilon = spec.epsilon
    if epsilon == 0 and which is not LowerBoundSide.BASE:
        rates = spec.rates or (1.0,) * spec.n
        epsilon = lower_bound_epsilon(spec.n, spec.t_scale, min(rates), max(rates))
    return gen_lower_bound(spec.n, epsilon, which, spec.rates, spec.t_scale)
