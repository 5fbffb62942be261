"""Core domain types and regret accounting."""

from .models import (
    GapStats,
    Instance,
    RegretReport,
    ScheduleTrace,
    ServiceKind,
    dump_instance,
    load_instance,
    parse_instance,
)

__all__ = [
    "GapStats",
    "Instance",
    "RegretReport",
    "ScheduleTrace",
    "ServiceKind",
    "dump_instance",
    "load_instance",
    "parse_instance",
]
