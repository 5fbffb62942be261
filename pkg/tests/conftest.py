"""Shared fixtures."""

from typing import Callable, Sequence

import pytest
import structlog

from cmu_lab.config import get_settings
from cmu_lab.core.dependencies import reset_container
from cmu_lab.core.models import Instance, parse_instance


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch: pytest.MonkeyPatch):
    """Fresh settings per test, single-process harness unless a test opts in."""
    monkeypatch.setenv("CMU_LAB_HARNESS_THREADS", "1")
    get_settings.cache_clear()
    reset_container()
    yield
    get_settings.cache_clear()
    reset_container()
    structlog.reset_defaults()


@pytest.fixture
def make_instance() -> Callable[..., Instance]:
    def _make(
        costs: Sequence[float],
        rates: Sequence[float] | None = None,
        t_scale: int = 100,
        service: str = "det",
    ) -> Instance:
        return parse_instance(
            {
                "n": len(costs),
                "t_scale": t_scale,
                "costs": list(costs),
                "rates": list(rates) if rates is not None else [1.0] * len(costs),
                "service": service,
            }
        )

    return _make
