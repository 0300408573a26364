from __future__ import annotations

STATUS_RUNNING = "RUNNING"
STATUS_AGREEMENT = "AGREEMENT"
STATUS_FAILED = "FAILED"

TERMINAL_STATUSES = frozenset({STATUS_AGREEMENT, STATUS_FAILED})


def is_terminal_status(value: str | None) -> bool:
    return str(value or "").strip().upper() in TERMINAL_STATUSES
