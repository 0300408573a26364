from __future__ import annotations

import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

from sqlalchemy import inspect

from app import db
from app.run_constants import (
    EVENT_BATCH_COMPLETED,
    EVENT_RUN_FAILED,
    EVENT_RUN_STARTED,
    STAGE_TRAIN,
    STAGE_UPDATE,
)
from app.run_events import RunEventLog


class RunEventLogTests(unittest.TestCase):
    def setUp(self) -> None:
        self.temp_dir = TemporaryDirectory()
        self.run_dir = Path(self.temp_dir.name)
        self.log = RunEventLog(self.run_dir)

    def tearDown(self) -> None:
        db.dispose_all_engines()
        self.temp_dir.cleanup()

    def test_events_are_read_back_in_order_with_filters(self) -> None:
        self.log.emit_started(stage=STAGE_TRAIN, event_type=EVENT_RUN_STARTED, message="Training.", data={"seed": 3})
        self.log.emit(stage=STAGE_UPDATE, event_type=EVENT_BATCH_COMPLETED, message="Batch 1.", data={"update": 1})
        self.log.emit(stage=STAGE_UPDATE, event_type=EVENT_BATCH_COMPLETED, message="Batch 2.")

        events = self.log.events()
        self.assertEqual([event.message for event in events], ["Training.", "Batch 1.", "Batch 2."])
        self.assertEqual(events[0].data, {"seed": 3})
        self.assertIsNone(events[2].data)
        self.assertEqual(len(self.log.events(stage=STAGE_UPDATE)), 2)
        self.assertEqual(len(self.log.events(event_type=EVENT_RUN_STARTED)), 1)
        self.assertTrue(events[0].ts.endswith("+00:00"))

    def test_failed_event_message(self) -> None:
        self.log.emit_failed(
            stage=STAGE_TRAIN,
            event_type=EVENT_RUN_FAILED,
            error=RuntimeError("loss exploded"),
            message_prefix="Training failed",
        )
        self.assertEqual(self.log.events()[0].message, "Training failed: loss exploded")

    def test_missing_ledger_reads_empty(self) -> None:
        self.assertEqual(RunEventLog(self.run_dir / "fresh").events(), [])

    def test_ledger_schema(self) -> None:
        self.log.emit(stage=STAGE_TRAIN, event_type=EVENT_RUN_STARTED, message="Training.")
        self.assertTrue((self.run_dir / db.EVENTS_DB_NAME).exists())
        inspector = inspect(db.get_engine(self.run_dir / db.EVENTS_DB_NAME))
        columns = {column["name"] for column in inspector.get_columns("run_events")}
        self.assertEqual(columns, {"id", "ts", "stage", "event_type", "message", "data_json"})
        self.assertIs(db.get_engine(self.run_dir / db.EVENTS_DB_NAME), db.get_engine(self.run_dir / db.EVENTS_DB_NAME))


if __name__ == "__main__":
    unittest.main()
