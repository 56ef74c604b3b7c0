"""Crowdsourced task scheduling: shared claims and results across clusters."""

from .core import (  # noqa: F401
    ClaimResponse,
    CrowdsourcedRecord,
    ResourceEntry,
    SchedulerCore,
    TaskRow,
    TaskStatus,
)
from .store import SchedulerStore  # noqa: F401
from .client import LocalSchedulerClient, SchedulerClient  # noqa: F401
from .service import SchedulerService  # noqa: F401
