from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from sqlalchemy import select

from .db import EVENTS_DB_NAME, get_session
from .models import RunEvent

UTC = timezone.utc


def _utc_now() -> str:
    return datetime.now(UTC).isoformat()


def _json_dumps(payload: dict[str, Any]) -> str:
    return json.dumps(payload, ensure_ascii=True, sort_keys=True, default=str)


@dataclass(frozen=True)
class RunEventRecord:
    ts: str
    stage: str
    event_type: str
    message: str
    data: dict[str, Any] | None


class RunEventLog:
    """Event ledger of one run directory, stored in ``<run_dir>/events.db``."""

    def __init__(self, run_dir: Path) -> None:
        self.run_dir = run_dir
        self.db_path = run_dir / EVENTS_DB_NAME

    def emit(
        self,
        *,
        stage: str,
        event_type: str,
        message: str,
        data: dict[str, Any] | None = None,
    ) -> None:
        with get_session(self.db_path) as session:
            session.add(
                RunEvent(
                    ts=_utc_now(),
                    stage=stage,
                    event_type=event_type,
                    message=message,
                    data_json=None if data is None else _json_dumps(data),
                )
            )

    def emit_started(self, *, stage: str, event_type: str, message: str, data: dict[str, Any] | None = None) -> None:
        self.emit(stage=stage, event_type=event_type, message=message, data=data)

    def emit_failed(
        self,
        *,
        stage: str,
        event_type: str,
        error: Exception | str,
        message_prefix: str,
        data: dict[str, Any] | None = None,
    ) -> None:
        self.emit(stage=stage, event_type=event_type, message=f"{message_prefix}: {error}", data=data)

    def emit_completed(self, *, stage: str, event_type: str, message: str, data: dict[str, Any] | None = None) -> None:
        self.emit(stage=stage, event_type=event_type, message=message, data=data)

    def events(self, *, stage: str | None = None, event_type: str | None = None) -> list[RunEventRecord]:
        if not self.db_path.exists():
            return []
        statement = select(RunEvent).order_by(RunEvent.id.asc())
        if stage is not None:
            statement = statement.where(RunEvent.stage == stage)
        if event_type is not None:
            statement = statement.where(RunEvent.event_type == event_type)
        with get_session(self.db_path) as session:
            rows = session.execute(statement).scalars().all()
            return [
                RunEventRecord(
                    ts=row.ts,
                    stage=row.stage,
                    event_type=row.event_type,
                    message=row.message,
                    data=None if row.data_json is None else json.loads(row.data_json),
                )
                for row in rows
            ]
