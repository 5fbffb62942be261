"""Dependency injection container."""

from typing import Optional

import structlog

from ..config import Settings, get_settings
from ..services.engine import SimulationService
from ..services.harness import ExperimentService
from ..services.verification import VerificationService

logger = structlog.get_logger(__name__)


class Container:
    """Dependency injection container."""

    def __init__(self, settings: Optional[Settings] = None) -> None:
        """Initialize container."""
        self._settings: Optional[Settings] = settings
        self._simulation_service: Optional[SimulationService] = None
        self._experiment_service: Optional[ExperimentService] = None
        self._verification_service: Optional[VerificationService] = None

    # Properties for lazy initialization

    @property
    def settings(self) -> Settings:
        """Get settings instance."""
        if self._settings is None:
            self._settings = get_settings()
        return self._settings

    @property
    def simulation_service(self) -> SimulationService:
        """Get simulation service instance."""
        if self._simulation_service is None:
            self._simulation_service = SimulationService(settings=self.settings)
        return self._simulation_service

    @property
    def experiment_service(self) -> ExperimentService:
        """Get experiment service instance."""
        if self._experiment_service is None:
            self._experiment_service = ExperimentService(settings=self.settings)
        return self._experiment_service

    @property
    def verification_service(self) -> VerificationService:
        """Get verification service instance."""
        if self._verification_service is None:
            self._verification_service = VerificationService(settings=self.settings)
        return self._verification_service
