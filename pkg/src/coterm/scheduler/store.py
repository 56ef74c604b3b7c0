"""Durable embedded store backing the scheduler.

SQLite carries the task and result tables.  One connection serves every
thread, guarded by a lock, and each mutation runs inside BEGIN IMMEDIATE
so classification and state transitions are single atomic transactions.
WAL journaling with synchronous=FULL keeps committed rows through a hard
process kill.
"""

from __future__ import annotations

import logging
import sqlite3
import threading
from contextlib import contextmanager

from ..errors import StoreCorruptError

logger = logging.getLogger(__name__)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS resources (
    resource_id   TEXT PRIMARY KEY,
    name          TEXT NOT NULL,
    n_docs        INTEGER NOT NULL,
    granularity   TEXT NOT NULL,
    uploader      TEXT NOT NULL DEFAULT '',
    registered_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS tasks (
    task_id      INTEGER PRIMARY KEY AUTOINCREMENT,
    resource_id  TEXT NOT NULL,
    pair_key     TEXT NOT NULL,
    case_mode    TEXT NOT NULL,
    status       INTEGER NOT NULL DEFAULT 0,
    owner        TEXT NOT NULL,
    claimed_at   REAL NOT NULL,
    heartbeat_at REAL NOT NULL,
    UNIQUE (resource_id, pair_key, case_mode)
);
CREATE TABLE IF NOT EXISTS results (
    resource_id TEXT NOT NULL,
    pair_key    TEXT NOT NULL,
    case_mode   TEXT NOT NULL,
    n_a         INTEGER NOT NULL,
    n_b         INTEGER NOT NULL,
    n_ab        INTEGER NOT NULL,
    tf_a        INTEGER NOT NULL,
    tf_b        INTEGER NOT NULL,
    n_docs      INTEGER NOT NULL,
    jaccard     REAL NOT NULL,
    co_keys     TEXT,
    contributor TEXT NOT NULL,
    created_at  REAL NOT NULL,
    PRIMARY KEY (resource_id, pair_key, case_mode)
);
CREATE TABLE IF NOT EXISTS quotas (
    client_id    TEXT PRIMARY KEY,
    cached_count INTEGER NOT NULL DEFAULT 0
);
"""


class SchedulerStore:
    """A transactional key/value-and-tables store on one SQLite file."""

    def __init__(self, path=":memory:"):
        self.path = str(path)
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(
            self.path, check_same_thread=False, isolation_level=None
        )
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=FULL")
        row = self._conn.execute("PRAGMA quick_check").fetchone()
        if row is None or row[0] != "ok":
            raise StoreCorruptError("integrity check failed for %s" % self.path)
        with self._lock:
            self._conn.executescript(_SCHEMA)
        logger.debug("store open at %s", self.path)

    @contextmanager
    def transaction(self):
        """One atomic read-modify-write unit; rolls back on any error."""
        with self._lock:
            cur = self._conn.cursor()
            cur.execute("BEGIN IMMEDIATE")
            try:
                yield cur
            except BaseException:
                self._conn.rollback()
                raise
            else:
                self._conn.commit()
            finally:
                cur.close()

    def close(self):
        with self._lock:
            self._conn.close()
