"""Scheduler protocol rules.

A task is identified by (resource_id, pair_key, case_mode) where pair_key
is the canonical tab-joined term pair.  Claiming classifies a task in one
atomic transaction: a stored result is handed back as cached, a live claim
by someone else means pending, anything else (no row, or a claim whose
heartbeat went stale) hands the claim to the caller.  The first submitted
result wins and later submits are acknowledged without effect, so a task
key can never map to two different results.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from ..errors import (
    AlreadyCompleteError,
    MalformedResourceIdError,
    NotOwnerError,
    QuotaExceededError,
    SchedulerError,
    StoreCorruptError,
    UnknownResourceError,
    UnknownTaskError,
)
from .store import SchedulerStore

logger = logging.getLogger(__name__)

STATUS_INCOMPLETE = 0
STATUS_COMPLETE = 1

CLAIM_CACHED = "cached"
CLAIM_CLAIMED = "claimed"
CLAIM_PENDING = "pending"

DEFAULT_STALE_TIMEOUT = 30.0
DEFAULT_HEARTBEAT_INTERVAL = 10.0
DEFAULT_FAIR_SHARE_LIMIT = 100

RESOURCE_ID_RE = re.compile(r"^[0-9a-f]{32}$")

_COUNT_FIELDS = ("n_a", "n_b", "n_ab", "tf_a", "tf_b", "n_docs")


@dataclass
class ResourceEntry:
    """Catalog row for a registered resource."""

    resource_id: str
    name: str
    n_docs: int
    granularity: str
    uploader: str
    registered_at: float


@dataclass
class TaskRow:
    """Claim state for one task key."""

    task_id: int
    resource_id: str
    pair_key: str
    case_mode: str
    status: int
    owner: str
    claimed_at: float
    heartbeat_at: float


@dataclass
class CrowdsourcedRecord:
    """A stored result contributed by whichever cluster finished first."""

    resource_id: str
    pair_key: str
    case_mode: str
    payload: Dict
    contributor: str
    created_at: float


@dataclass
class ClaimResponse:
    """Outcome of one claim: exactly one of the three kinds.

    recovered marks a claim that was granted by taking over a stale row,
    so callers can account the re-execution as crash recovery.
    """

    kind: str
    task_id: Optional[int] = None
    result: Optional[Dict] = None
    recovered: bool = False


@dataclass
class TaskStatus:
    """Poll view of one task: complete with result, or live/stale claim."""

    status: int
    stale: bool = False
    task_id: Optional[int] = None
    result: Optional[Dict] = None


def validate_result_payload(payload: Dict) -> Dict:
    """Check and narrow a submitted result to the stored shape."""
    if not isinstance(payload, dict):
        raise SchedulerError("result payload must be an object")
    out = {}
    for name in _COUNT_FIELDS:
        value = payload.get(name)
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise SchedulerError("result field %s must be a non-negative integer" % name)
        out[name] = value
    jaccard = payload.get("jaccard")
    if not isinstance(jaccard, (int, float)) or isinstance(jaccard, bool):
        raise SchedulerError("result field jaccard must be a number")
    out["jaccard"] = float(jaccard)
    co_keys = payload.get("co_keys")
    if co_keys is not None:
        if not isinstance(co_keys, list) or any(not isinstance(k, str) for k in co_keys):
            raise SchedulerError("co_keys must be a list of strings")
        out["co_keys"] = list(co_keys)
    return out


class SchedulerCore:
    """Protocol logic over a SchedulerStore; safe for concurrent callers.

    Every public operation is one store transaction.  The clock is
    injectable so staleness can be driven deterministically in tests.
    """

    def __init__(
        self,
        store: SchedulerStore,
        stale_timeout: float = DEFAULT_STALE_TIMEOUT,
        fair_share_limit: int = DEFAULT_FAIR_SHARE_LIMIT,
        clock: Callable[[], float] = time.time,
    ):
        self.store = store
        self.stale_timeout = stale_timeout
        self.fair_share_limit = fair_share_limit
        self.clock = clock

    # -- resource catalog ------------------------------------------------

    def register_resource(
        self,
        resource_id: str,
        name: str,
        n_docs: int,
        granularity: str,
        uploader: str = "",
    ) -> ResourceEntry:
        """Idempotently add a resource to the catalog and return its row."""
        if not RESOURCE_ID_RE.match(resource_id or ""):
            raise MalformedResourceIdError(
                "resource_id must be 32 lowercase hex digits"
            )
        now = self.clock()
        with self.store.transaction() as cur:
            cur.execute(
                "INSERT OR IGNORE INTO resources "
                "(resource_id, name, n_docs, granularity, uploader, registered_at) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (resource_id, name, int(n_docs), granularity, uploader, now),
            )
            row = cur.execute(
                "SELECT * FROM resources WHERE resource_id = ?", (resource_id,)
            ).fetchone()
        return _resource_entry(row)

    def list_resources(self) -> List[ResourceEntry]:
        with self.store.transaction() as cur:
            rows = cur.execute(
                "SELECT * FROM resources ORDER BY registered_at, resource_id"
            ).fetchall()
        return [_resource_entry(r) for r in rows]

    # -- quota -----------------------------------------------------------

    def quota_check(self, client_id: str, data_transfer: bool) -> None:
        """Reject a cached delivery once a non-contributing client used its share.

        Contributing clients (data_transfer on) are never limited.
        """
        if data_transfer:
            return
        with self.store.transaction() as cur:
            self._quota_guard(cur, client_id)

    def _quota_guard(self, cur, client_id: str) -> None:
        row = cur.execute(
            "SELECT cached_count FROM quotas WHERE client_id = ?", (client_id,)
        ).fetchone()
        count = row["cached_count"] if row else 0
        if count >= self.fair_share_limit:
            raise QuotaExceededError(
                "client %s exhausted %d cached deliveries" % (client_id, self.fair_share_limit)
            )

    def _quota_consume(self, cur, client_id: str) -> None:
        cur.execute(
            "INSERT INTO quotas (client_id, cached_count) VALUES (?, 1) "
            "ON CONFLICT(client_id) DO UPDATE SET cached_count = cached_count + 1",
            (client_id,),
        )

    # -- task protocol ---------------------------------------------------

    def claim_task(
        self,
        client_id: str,
        resource_id: str,
        pair_key: str,
        case_mode: str,
        data_transfer: bool = True,
        include_keys: bool = False,
    ) -> ClaimResponse:
        """Classify one task for a caller and hand out work accordingly.

        cached: a result exists, delivered subject to the fair-share quota.
        claimed: the caller now owns the task (repeat claims by the owner
        return the same task_id; a stale claim is silently reassigned and
        flagged as recovered).  pending: someone else holds a live claim.
        """
        now = self.clock()
        with self.store.transaction() as cur:
            exists = cur.execute(
                "SELECT 1 FROM resources WHERE resource_id = ?", (resource_id,)
            ).fetchone()
            if not exists:
                raise UnknownResourceError("resource %s not registered" % resource_id)

            record = cur.execute(
                "SELECT * FROM results WHERE resource_id = ? AND pair_key = ? AND case_mode = ?",
                (resource_id, pair_key, case_mode),
            ).fetchone()
            if record is not None:
                if not data_transfer:
                    self._quota_guard(cur, client_id)
                    self._quota_consume(cur, client_id)
                return ClaimResponse(
                    kind=CLAIM_CACHED, result=_payload(record, include_keys)
                )

            row = cur.execute(
                "SELECT * FROM tasks WHERE resource_id = ? AND pair_key = ? AND case_mode = ?",
                (resource_id, pair_key, case_mode),
            ).fetchone()
            if row is None:
                cur.execute(
                    "INSERT INTO tasks "
                    "(resource_id, pair_key, case_mode, status, owner, claimed_at, heartbeat_at) "
                    "VALUES (?, ?, ?, ?, ?, ?, ?)",
                    (resource_id, pair_key, case_mode, STATUS_INCOMPLETE, client_id, now, now),
                )
                return ClaimResponse(kind=CLAIM_CLAIMED, task_id=cur.lastrowid)

            if row["status"] == STATUS_COMPLETE:
                # Completion without a stored result would break the
                # protocol invariant; refuse to guess.
                raise StoreCorruptError(
                    "task %d complete but result row missing" % row["task_id"]
                )

            if now - row["heartbeat_at"] <= self.stale_timeout:
                if row["owner"] == client_id:
                    return ClaimResponse(kind=CLAIM_CLAIMED, task_id=row["task_id"])
                return ClaimResponse(kind=CLAIM_PENDING, task_id=row["task_id"])

            cur.execute(
                "UPDATE tasks SET owner = ?, claimed_at = ?, heartbeat_at = ? "
                "WHERE task_id = ?",
                (client_id, now, now, row["task_id"]),
            )
            logger.debug(
                "stale claim on task %d reassigned to %s", row["task_id"], client_id
            )
            return ClaimResponse(
                kind=CLAIM_CLAIMED, task_id=row["task_id"], recovered=True
            )

    def task_status(self, resource_id: str, pair_key: str, case_mode: str) -> TaskStatus:
        """Report completion or claim liveness for one task key."""
        now = self.clock()
        with self.store.transaction() as cur:
            row = cur.execute(
                "SELECT * FROM tasks WHERE resource_id = ? AND pair_key = ? AND case_mode = ?",
                (resource_id, pair_key, case_mode),
            ).fetchone()
            if row is None:
                raise UnknownTaskError(
                    "no task for %s/%s/%s" % (resource_id, pair_key, case_mode)
                )
            if row["status"] == STATUS_COMPLETE:
                record = cur.execute(
                    "SELECT * FROM results WHERE resource_id = ? AND pair_key = ? AND case_mode = ?",
                    (resource_id, pair_key, case_mode),
                ).fetchone()
                if record is None:
                    raise StoreCorruptError(
                        "task %d complete but result row missing" % row["task_id"]
                    )
                return TaskStatus(
                    status=STATUS_COMPLETE,
                    stale=False,
                    task_id=row["task_id"],
                    result=_payload(record, include_keys=True),
                )
            stale = now - row["heartbeat_at"] > self.stale_timeout
            return TaskStatus(status=STATUS_INCOMPLETE, stale=stale, task_id=row["task_id"])

    def heartbeat(self, task_id: int, client_id: str) -> None:
        """Refresh the caller's claim so it does not go stale."""
        now = self.clock()
        with self.store.transaction() as cur:
            row = cur.execute(
                "SELECT * FROM tasks WHERE task_id = ?", (task_id,)
            ).fetchone()
            if row is None:
                raise UnknownTaskError("no task %s" % task_id)
            if row["status"] == STATUS_COMPLETE:
                raise AlreadyCompleteError("task %d is complete" % task_id)
            if row["owner"] != client_id:
                raise NotOwnerError("task %d owned by %s" % (task_id, row["owner"]))
            cur.execute(
                "UPDATE tasks SET heartbeat_at = ? WHERE task_id = ?", (now, task_id)
            )

    def takeover(self, task_id: int, client_id: str) -> bool:
        """Grant an incomplete, stale task to the caller; otherwise refuse."""
        now = self.clock()
        with self.store.transaction() as cur:
            row = cur.execute(
                "SELECT * FROM tasks WHERE task_id = ?", (task_id,)
            ).fetchone()
            if row is None:
                raise UnknownTaskError("no task %s" % task_id)
            if row["status"] == STATUS_COMPLETE:
                return False
            if now - row["heartbeat_at"] <= self.stale_timeout:
                return False
            cur.execute(
                "UPDATE tasks SET owner = ?, claimed_at = ?, heartbeat_at = ? "
                "WHERE task_id = ?",
                (client_id, now, now, task_id),
            )
            logger.info("task %d taken over by %s", task_id, client_id)
            return True

    def submit_result(self, task_id: int, client_id: str, payload: Dict) -> str:
        """Record a result for an owned task; the first write wins.

        Returns "recorded" or, when a result already exists for the task,
        "already_complete" with the stored result left untouched.
        """
        clean = validate_result_payload(payload)
        now = self.clock()
        with self.store.transaction() as cur:
            row = cur.execute(
                "SELECT * FROM tasks WHERE task_id = ?", (task_id,)
            ).fetchone()
            if row is None:
                raise UnknownTaskError("no task %s" % task_id)
            if row["status"] == STATUS_COMPLETE:
                return "already_complete"
            if row["owner"] != client_id:
                raise NotOwnerError("task %d owned by %s" % (task_id, row["owner"]))
            co_keys = clean.get("co_keys")
            cur.execute(
                "INSERT INTO results "
                "(resource_id, pair_key, case_mode, n_a, n_b, n_ab, tf_a, tf_b, "
                " n_docs, jaccard, co_keys, contributor, created_at) "
                "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    row["resource_id"],
                    row["pair_key"],
                    row["case_mode"],
                    clean["n_a"],
                    clean["n_b"],
                    clean["n_ab"],
                    clean["tf_a"],
                    clean["tf_b"],
                    clean["n_docs"],
                    clean["jaccard"],
                    json.dumps(co_keys) if co_keys is not None else None,
                    client_id,
                    now,
                ),
            )
            cur.execute(
                "UPDATE tasks SET status = ? WHERE task_id = ?",
                (STATUS_COMPLETE, task_id),
            )
        return "recorded"

    # -- inspection helpers ----------------------------------------------

    def result_count(self) -> int:
        with self.store.transaction() as cur:
            row = cur.execute("SELECT COUNT(*) AS n FROM results").fetchone()
        return row["n"]

    def task_rows(self) -> List[TaskRow]:
        with self.store.transaction() as cur:
            rows = cur.execute("SELECT * FROM tasks ORDER BY task_id").fetchall()
        return [
            TaskRow(
                task_id=r["task_id"],
                resource_id=r["resource_id"],
                pair_key=r["pair_key"],
                case_mode=r["case_mode"],
                status=r["status"],
                owner=r["owner"],
                claimed_at=r["claimed_at"],
                heartbeat_at=r["heartbeat_at"],
            )
            for r in rows
        ]


def _resource_entry(row) -> ResourceEntry:
    return ResourceEntry(
        resource_id=row["resource_id"],
        name=row["name"],
        n_docs=row["n_docs"],
        granularity=row["granularity"],
        uploader=row["uploader"],
        registered_at=row["registered_at"],
    )


def _payload(record, include_keys: bool) -> Dict:
    out = {
        "n_a": record["n_a"],
        "n_b": record["n_b"],
        "n_ab": record["n_ab"],
        "tf_a": record["tf_a"],
        "tf_b": record["tf_b"],
        "n_docs": record["n_docs"],
        "jaccard": record["jaccard"],
    }
    if include_keys and record["co_keys"] is not None:
        out["co_keys"] = json.loads(record["co_keys"])
    return out
