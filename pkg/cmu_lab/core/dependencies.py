"""Dependency injection helpers."""

from typing import Optional

from ..config import Settings
from .container import Container

# Global container instance
_container: Optional[Container] = None


def get_container() -> Container:
    """Get global container instance."""
    global _container
    if _container is None:
        _container = Container()
    return _container


def reset_container(settings: Optional[Settings] = None) -> Container:
    """Replace the global container, optionally with explicit settings."""
    global _container
    _container = Container(settings)
    return _container


def get_simulation_service():
    """Get simulation service dependency."""
    return get_container().simulation_service


def get_experiment_service():
    """Get experiment service dependency."""
    return get_container().experiment_service


def get_verification_service():
    """Get verification service dependency."""
    return get_container().verification_service
