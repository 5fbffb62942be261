"""Instance families."""

import numpy as np
import pytest
from scipy import stats

from cmu_lab.core.accounting import validate_instance
from cmu_lab.exceptions import ConfigurationError
from cmu_lab.services.generators import (
    GeneratorFamily,
    GeneratorSpec,
    LowerBoundSide,
    gen_lower_bound,
    gen_pareto_services,
    gen_uniform_band,
    generate_instance,
    lower_bound_epsilon,
    lower_bound_partition,
    parse_generator_spec,
    pareto_service_length,
    pareto_variate,
)


class TestUniformBand:
    def test_degenerate_band(self):
        inst = gen_uniform_band(10, 100, 0.0, seed=1)
        assert inst.costs == (0.5,) * 10
        assert inst.rates == (1.0,) * 10

    def test_full_band(self):
        inst = gen_uniform_band(200, 100, 0.5, seed=2)
        assert all(0.0 <= c < 1.0 for c in inst.costs)

    def test_mean(self):
        inst = gen_uniform_band(100_000, 10, 0.1, seed=3)
        assert abs(np.mean(inst.costs) - 0.5) < 0.001

    def test_seeded(self):
        assert gen_uniform_band(5, 10, 0.3, 4) == gen_uniform_band(5, 10, 0.3, 4)
        assert gen_uniform_band(5, 10, 0.3, 4) != gen_uniform_band(5, 10, 0.3, 5)

    @pytest.mark.parametrize("epsilon", [-0.1, 0.6])
    def test_epsilon_range(self, epsilon):
        with pytest.raises(ConfigurationError):
            gen_uniform_band(5, 10, epsilon, 0)

    def test_geometric_service(self):
        inst = gen_uniform_band(3, 10, 0.1, 0, service="geo")
        assert inst.service_kind.value == "geo"


class TestPareto:
    def test_support_minimum(self):
        assert pareto_service_length(0.0) == 100

    def test_median(self):
        assert pareto_service_length(0.5) == 101

    def test_services_preserved(self):
        inst = gen_pareto_services(50, 2000, 0.7, seed=6)
        lengths = pareto_service_length(
            np.random.default_rng(
                np.random.SeedSequence(6, spawn_key=(1,))
            ).random(50)
        )
        assert list(inst.service) == lengths.tolist()
        assert min(inst.service) >= 100
        assert inst.t_scale == max(inst.service)
        assert all(mu >= 1 for mu in inst.rates)
        validate_instance(inst)

    def test_matches_pareto_law(self):
        rng = np.random.default_rng(7)
        u = rng.random(100_000)
        x = pareto_variate(u, 0.7)
        statistic, _ = stats.kstest(x, lambda v: 1.0 - v ** (-0.7))
        # One-sample KS 1% critical value ~ 1.63 / sqrt(n).
        assert statistic < 1.63 / np.sqrt(len(x))

    def test_rejects_bad_shape(self):
        with pytest.raises(ConfigurationError):
            gen_pareto_services(3, 100, 0.0, 0)


class TestLowerBound:
    def test_base(self):
        inst = gen_lower_bound(2, 0.1, LowerBoundSide.BASE, [1, 1], 100)
        assert inst.costs == (0.5, 0.5)

    def test_side_one(self):
        inst = gen_lower_bound(2, 0.1, LowerBoundSide.SIDE1, [1, 1], 100)
        assert inst.costs == pytest.approx((0.55, 0.5))

    def test_side_two_with_rates(self):
        inst = gen_lower_bound(3, 0.2, LowerBoundSide.SIDE2, [1, 2, 4], 100)
        assert inst.costs == pytest.approx((0.5, 0.3, 0.125))

    @pytest.mark.parametrize("n", range(2, 101))
    def test_partition_sizes(self, n):
        l1, l2 = lower_bound_partition(n)
        assert abs(len(l1) - len(l2)) <= 1
        assert sorted(l1 + l2) == list(range(n))

    def test_cost_above_one(self):
        with pytest.raises(ConfigurationError):
            gen_lower_bound(2, 1.5, LowerBoundSide.SIDE1, [1, 1], 100)

    def test_sides_need_two_jobs(self):
        with pytest.raises(ConfigurationError):
            gen_lower_bound(1, 0.1, LowerBoundSide.SIDE1, None, 100)

    def test_default_epsilon(self):
        assert lower_bound_epsilon(8, 1000, 1.0, 1.0) == pytest.approx(0.05)


class TestGeneratorSpec:
    def test_dispatch(self):
        spec = GeneratorSpec(n=4, t_scale=30, epsilon=0.2, seed=9)
        assert generate_instance(spec) == gen_uniform_band(4, 30, 0.2, 9)

    def test_seed_override(self):
        spec = GeneratorSpec(n=4, t_scale=30, epsilon=0.2, seed=9)
        assert generate_instance(spec, seed=(1, 2)) != generate_instance(spec)

    def test_lower_bound_pair_uses_default_epsilon(self):
        spec = GeneratorSpec(
            family=GeneratorFamily.LOWER_BOUND_PAIR, n=8, t_scale=1000, which_side=2
        )
        inst = generate_instance(spec)
        assert inst.costs == pytest.approx((0.5, 0.525) * 4)

    def test_pareto_family(self):
        spec = GeneratorSpec(family=GeneratorFamily.PARETO_SERVICE, n=5, seed=3)
        assert generate_instance(spec) == gen_pareto_services(5, 2000, 0.7, 3, 0.0)

    @pytest.mark.parametrize(
        "raw",
        [
            {"family": "uniform_band", "epsilon": 0.7},
            {"family": "lower_bound_pair", "n": 1},
            {"family": "uniform_band", "which_side": 3},
            {"family": "uniform_band", "n": 2, "rates": [1.0]},
        ],
    )
    def test_invalid(self, raw):
        with pytest.raises(ConfigurationError):
            parse_generator_spec(raw)

    def test_json(self):
        spec = parse_generator_spec({"family": "pareto_service", "n": 3})
        assert GeneratorSpec.model_validate_json(spec.model_dump_json()) == spec
