"""Base service class."""

from typing import Optional

import structlog

from ..config import Settings, get_settings


class BaseService:
    """Base class for services that read the laboratory settings."""

    def __init__(self, settings: Optional[Settings] = None) -> None:
        """Initialize base service."""
        self.settings = settings or get_settings()
        self.log = structlog.get_logger(type(self).__module__).bind(
            service=type(self).__name__
        )
