"""Exception hierarchy shared by every module of the laboratory."""

from typing import Any, Sequence


class LabError(Exception):
    """Base class for all laboratory errors."""


class InstanceValidationError(LabError, ValueError):
    """An instance violates its field invariants."""

    def __init__(self, message: str, field: str | None = None) -> None:
        super().__init__(message)
        self.field = field


class ConfigurationError(LabError, ValueError):
    """A policy, generator or experiment configuration is invalid."""


class IncompatiblePolicyError(ConfigurationError):
    """The policy kind cannot run on the instance's service kind."""


class SchedulingError(LabError):
    """A policy was asked to select from an empty set of jobs."""


class SimulationError(LabError, RuntimeError):
    """The engine aborted a run."""


class IncompleteTraceError(LabError, ValueError):
    """A trace does not complete every job."""


class AnalysisError(LabError, ValueError):
    """An analysis routine received inputs outside its domain."""


class VerificationFailed(LabError):
    """At least one oracle check of the verification suite failed."""

    def __init__(self, message: str, results: Sequence[Any] = ()) -> None:
        super().__init__(message)
        self.results = list(results)
