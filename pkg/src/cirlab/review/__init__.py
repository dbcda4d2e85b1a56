from .service import create_app
from .store import (
    STAGES,
    VERDICTS_BY_STAGE,
    AlreadyDecidedError,
    Decision,
    DuplicateItemError,
    InvalidVerdictError,
    LogicalClock,
    ReviewError,
    ReviewItem,
    ReviewStore,
    utc_clock,
)

__all__ = [
    "create_app",
    "STAGES",
    "VERDICTS_BY_STAGE",
    "AlreadyDecidedError",
    "Decision",
    "DuplicateItemError",
    "InvalidVerdictError",
    "LogicalClock",
    "ReviewError",
    "ReviewItem",
    "ReviewStore",
    "utc_clock",
]
