from __future__ import annotations

import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from .models import Base

EVENTS_DB_NAME = "events.db"

_LOCK = threading.Lock()
_ENGINES: dict[Path, Engine] = {}
_SESSION_FACTORIES: dict[Path, sessionmaker[Session]] = {}


def _database_url(db_path: Path) -> str:
    return f"sqlite+pysqlite:///{db_path}"


def _new_engine(db_path: Path) -> Engine:
    engine = create_engine(
        _database_url(db_path),
        future=True,
        connect_args={"check_same_thread": False},
    )

    @event.listens_for(engine, "connect")
    def _on_connect(dbapi_connection, _connection_record):
        cursor = dbapi_connection.cursor()
        cursor.execute("PRAGMA journal_mode=WAL;")
        cursor.close()

    return engine


def get_engine(db_path: Path) -> Engine:
    resolved = db_path.resolve()
    with _LOCK:
        engine = _ENGINES.get(resolved)
        if engine is not None:
            return engine
        resolved.parent.mkdir(parents=True, exist_ok=True)
        engine = _new_engine(resolved)
        Base.metadata.create_all(bind=engine)
        _ENGINES[resolved] = engine
        _SESSION_FACTORIES[resolved] = sessionmaker(bind=engine, autoflush=False, expire_on_commit=False, future=True)
        return engine


def dispose_engine(db_path: Path) -> None:
    resolved = db_path.resolve()
    with _LOCK:
        engine = _ENGINES.pop(resolved, None)
        _SESSION_FACTORIES.pop(resolved, None)
    if engine is not None:
        engine.dispose()


def dispose_all_engines() -> None:
    with _LOCK:
        engines = list(_ENGINES.values())
        _ENGINES.clear()
        _SESSION_FACTORIES.clear()
    for engine in engines:
        engine.dispose()


def _get_session_factory(db_path: Path) -> sessionmaker[Session]:
    get_engine(db_path)
    factory = _SESSION_FACTORIES.get(db_path.resolve())
    if factory is None:
        raise RuntimeError("Session factory is not initialized.")
    return factory


@contextmanager
def get_session(db_path: Path) -> Iterator[Session]:
    session = _get_session_factory(db_path)()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
