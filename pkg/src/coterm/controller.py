"""Job control: planning, execution, and reporting.

A job pairs one resource file with one paired-term list.  Standalone mode
answers everything from a local index in one batch.  Cooperation mode
walks the shuffled task list one claim at a time against the scheduler:
cached results are recorded as-is, claimed tasks are executed locally and
submitted, and tasks owned by other clusters are parked on a pending list
that is drained by polling, taking over any claim that goes stale.
"""

from __future__ import annotations

import hashlib
import logging
import os
import random
import socket
import threading
import time
import uuid
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import CASE_INSENSITIVE, CASE_MODES, __version__
from .cooccur import (
    DEFAULT_CO_KEYS_LIMIT,
    CooccurrenceResult,
    PairedTerm,
    PairOutcome,
    pair_counts,
    run_job_local,
)
from .corpus import load_resource
from .errors import (
    AlreadyCompleteError,
    ConfigError,
    EmptyTermError,
    EncodingError,
    FormatError,
    NotOwnerError,
    QuotaExceededError,
    SchedulerUnreachableError,
    UnknownTaskError,
)
from .index import InvertedIndex, normalize_term
from .scheduler.client import SchedulerClient
from .scheduler.core import (
    CLAIM_CACHED,
    CLAIM_CLAIMED,
    CLAIM_PENDING,
    DEFAULT_HEARTBEAT_INTERVAL,
    STATUS_COMPLETE,
)

logger = logging.getLogger(__name__)

MODE_STANDALONE = "standalone"
MODE_COOPERATION = "cooperation"
MODES = (MODE_STANDALONE, MODE_COOPERATION)

ORIGIN_CACHED = "cached"
ORIGIN_EXECUTED = "executed_local"
ORIGIN_TAKEN_OVER = "taken_over"

SCHEDULER_URL_ENV = "COTERM_SCHEDULER_URL"

ERROR_ROW_PREFIX = "#!error"


# -- configuration -----------------------------------------------------


@dataclass
class Config:
    """Job settings parsed from a ``key = value`` file."""

    resource_path: str
    pair_list_path: str
    output_path: str
    mode: str = MODE_STANDALONE
    case_mode: str = CASE_INSENSITIVE
    workers: int = 1
    scheduler_url: Optional[str] = None
    data_transfer: bool = True
    shuffle_seed: int = 0
    pending_poll_interval: float = 1.0
    heartbeat_interval: float = DEFAULT_HEARTBEAT_INTERVAL
    store_intermediate: bool = False


_REQUIRED_KEYS = ("resource_path", "pair_list_path", "output_path")

_BOOL_WORDS = {
    "true": True,
    "yes": True,
    "1": True,
    "false": False,
    "no": False,
    "0": False,
}


def parse_key_value_file(path) -> Dict[str, str]:
    """Read a ``key = value`` file: one setting per line, ``#`` comments."""
    values: Dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError("config is not valid UTF-8: %s" % exc) from None
    for line_no, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError("line %d: expected key = value" % line_no)
        key, value = stripped.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _parse_bool(key: str, value: str) -> bool:
    try:
        return _BOOL_WORDS[value.lower()]
    except KeyError:
        raise ConfigError("%s must be true or false, got %r" % (key, value)) from None


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError("%s must be an integer, got %r" % (key, value)) from None


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError("%s must be a number, got %r" % (key, value)) from None


def parse_config(path) -> Config:
    """Load and validate a job configuration file."""
    values = parse_key_value_file(path)
    known = {f for f in Config.__dataclass_fields__}
    for key in values:
        if key not in known:
            raise ConfigError("unknown setting %r" % key)
    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError("missing required setting %r" % key)

    config = Config(
        resource_path=values["resource_path"],
        pair_list_path=values["pair_list_path"],
        output_path=values["output_path"],
    )
    if "mode" in values:
        config.mode = values["mode"]
    if "case_mode" in values:
        config.case_mode = values["case_mode"]
    if "workers" in values:
        config.workers = _parse_int("workers", values["workers"])
    if "scheduler_url" in values:
        config.scheduler_url = values["scheduler_url"]
    if "data_transfer" in values:
        config.data_transfer = _parse_bool("data_transfer", values["data_transfer"])
    if "shuffle_seed" in values:
        config.shuffle_seed = _parse_int("shuffle_seed", values["shuffle_seed"])
    if "pending_poll_interval" in values:
        config.pending_poll_interval = _parse_float(
            "pending_poll_interval", values["pending_poll_interval"]
        )
    if "heartbeat_interval" in values:
        config.heartbeat_interval = _parse_float(
            "heartbeat_interval", values["heartbeat_interval"]
        )
    if "store_intermediate" in values:
        config.store_intermediate = _parse_bool(
            "store_intermediate", values["store_intermediate"]
        )

    if config.mode not in MODES:
        raise ConfigError("mode must be one of %s" % (MODES,))
    if config.case_mode not in CASE_MODES:
        raise ConfigError("case_mode must be one of %s" % (CASE_MODES,))
    if config.workers < 1:
        raise ConfigError("workers must be >= 1")
    if config.pending_poll_interval <= 0:
        raise ConfigError("pending_poll_interval must be positive")
    if config.heartbeat_interval <= 0:
        raise ConfigError("heartbeat_interval must be positive")
    return config


def load_pairs(path) -> List[Tuple[str, str]]:
    """Read a paired-term list: two tab-separated columns per line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError("pair list is not valid UTF-8: %s" % exc) from None
    pairs: List[Tuple[str, str]] = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for line_no, line in enumerate(lines, start=1):
        if line.endswith("\r"):
            line = line[:-1]
        if line == "":
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise FormatError("expected exactly two tab-separated terms", line_no)
        pairs.append((fields[0], fields[1]))
    return pairs


# -- size predictions --------------------------------------------------


def predicted_tasks_to_process(total_tasks: int, cached_tasks: int) -> int:
    """Tasks a lone cluster must execute: the total minus the cached."""
    if not 0 <= cached_tasks <= total_tasks:
        raise ValueError(
            "cached_tasks must lie in [0, total_tasks], got %d of %d"
            % (cached_tasks, total_tasks)
        )
    return total_tasks - cached_tasks


def predicted_job_size(
    total_tasks: int,
    cached_tasks: int,
    shared_tasks: int,
    cluster_count: int,
    takeovers: int = 0,
) -> float:
    """Expected per-cluster executions when clusters share identical tasks.

    Shared tasks split evenly across the co-operating clusters, so each
    cluster keeps 1/cluster_count of its share; takeovers add back work
    re-executed after another cluster died mid-claim.
    """
    if not 0 <= cached_tasks <= total_tasks:
        raise ValueError("cached_tasks must lie in [0, total_tasks]")
    if not 0 <= shared_tasks <= total_tasks - cached_tasks:
        raise ValueError("shared_tasks must lie in [0, total_tasks - cached_tasks]")
    if cluster_count < 1:
        raise ValueError("cluster_count must be >= 1")
    if takeovers < 0:
        raise ValueError("takeovers must be >= 0")
    return (
        total_tasks
        - cached_tasks
        - shared_tasks * (1.0 - 1.0 / cluster_count)
        + takeovers
    )


# -- planning ----------------------------------------------------------


@dataclass
class PlanRow:
    """One input line: raw spellings plus its normalized identity."""

    raw_a: str
    raw_b: str
    norm_a: Optional[str] = None
    norm_b: Optional[str] = None
    canonical_key: Optional[str] = None
    error: Optional[str] = None


@dataclass
class PlanTask:
    """One distinct unit of work, in canonical term order."""

    canonical_key: str
    pair: PairedTerm


@dataclass
class JobPlan:
    rows: List[PlanRow]
    tasks: List[PlanTask]


def plan_tasks(
    raw_pairs: Sequence[Tuple[str, str]], case_mode: str, shuffle_seed: int = 0
) -> JobPlan:
    """Normalize rows, collapse duplicate pairs, and shuffle the tasks.

    Rows whose terms vanish under normalization become error rows and
    produce no task.  Two rows naming the same pair in either order map
    to one task.  The shuffle is a seeded permutation so distinct
    clusters can be given distinct traversal orders on purpose.
    """
    rows: List[PlanRow] = []
    by_key: Dict[str, PlanTask] = {}
    for raw_a, raw_b in raw_pairs:
        row = PlanRow(raw_a=raw_a, raw_b=raw_b)
        try:
            row.norm_a = normalize_term(raw_a, case_mode)
            row.norm_b = normalize_term(raw_b, case_mode)
        except EmptyTermError:
            row.error = "empty_term"
            rows.append(row)
            continue
        first, second = sorted((row.norm_a, row.norm_b))
        pair = PairedTerm(first, second)
        row.canonical_key = pair.canonical_key
        by_key.setdefault(row.canonical_key, PlanTask(row.canonical_key, pair))
        rows.append(row)
    tasks = list(by_key.values())
    random.Random(shuffle_seed).shuffle(tasks)
    return JobPlan(rows=rows, tasks=tasks)


# -- runtime pieces ----------------------------------------------------


@dataclass
class Task:
    """Runtime state of one planned task inside a job."""

    job_id: str
    canonical_key: str
    pair: PairedTerm
    enqueued_at: int
    resource_id: str = ""
    case_mode: str = ""
    status: str = "todo"
    origin: Optional[str] = None
    task_id: Optional[int] = None


@dataclass
class JobReport:
    """What a finished job did, printed as JSON by the run command."""

    job_id: str
    resource_id: str
    mode: str
    case_mode: str
    workers: int
    tasks_total: int
    tasks_cached: int
    tasks_executed: int
    pending_peak: int
    takeovers: int
    wall_time_seconds: float
    degraded: bool = False

    def as_dict(self) -> Dict:
        return {
            "job_id": self.job_id,
            "resource_id": self.resource_id,
            "mode": self.mode,
            "case_mode": self.case_mode,
            "workers": self.workers,
            "tasks_total": self.tasks_total,
            "tasks_cached": self.tasks_cached,
            "tasks_executed": self.tasks_executed,
            "pending_peak": self.pending_peak,
            "takeovers": self.takeovers,
            "wall_time_seconds": self.wall_time_seconds,
            "degraded": self.degraded,
        }


@dataclass
class ControllerHooks:
    """Injection points used by the simulator; no-ops in production.

    execute_delay stretches every local execution, and the callbacks wrap
    claim and submit calls so a harness can observe or cut a run short.
    """

    execute_delay: float = 0.0
    before_claim: Optional[Callable[[str], None]] = None
    after_claim: Optional[Callable[[str, str], None]] = None
    before_submit: Optional[Callable[[str], None]] = None
    after_submit: Optional[Callable[[str], None]] = None

    def fire(self, callback, *args):
        if callback is not None:
            callback(*args)


class _PendingList:
    """Thread-safe pending collection that remembers its peak size."""

    def __init__(self):
        self._items: List[Task] = []
        self._lock = threading.Lock()
        self.peak = 0

    def add(self, task: Task):
        with self._lock:
            self._items.append(task)
            self.peak = max(self.peak, len(self._items))

    def drain(self) -> List[Task]:
        with self._lock:
            items, self._items = self._items, []
            return items

    def __len__(self):
        with self._lock:
            return len(self._items)


class _HeartbeatManager:
    """Background refresher for every claim the job currently holds."""

    def __init__(self, client, interval: float):
        self._client = client
        self._interval = interval
        self._ids: set = set()
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = threading.Thread(
            target=self._run, name="claim-heartbeats", daemon=True
        )
        self._thread.start()

    def register(self, task_id: int):
        with self._lock:
            self._ids.add(task_id)

    def unregister(self, task_id: int):
        with self._lock:
            self._ids.discard(task_id)

    def stop(self):
        self._stop.set()
        self._thread.join(timeout=5)

    def _run(self):
        while not self._stop.wait(self._interval):
            with self._lock:
                ids = list(self._ids)
            for task_id in ids:
                try:
                    self._client.heartbeat(task_id)
                except (AlreadyCompleteError, NotOwnerError, UnknownTaskError) as exc:
                    logger.debug("dropping heartbeat for task %d: %s", task_id, exc)
                    self.unregister(task_id)
                except SchedulerUnreachableError:
                    # The main flow notices on its next call and degrades.
                    pass


# -- pending resolution ------------------------------------------------


@dataclass
class PendingOutcome:
    task: Task
    origin: str
    payload: Dict


def process_pending(
    client,
    pending_tasks: Sequence[Task],
    *,
    poll_interval: float = 1.0,
    execute_task: Callable[[Task], Dict],
    hooks: Optional[ControllerHooks] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> List[PendingOutcome]:
    """Resolve tasks owned by other clusters.

    The oldest pending task is polled first.  A complete task yields its
    stored result.  A live incomplete claim rotates to the back and is
    not polled again for poll_interval.  A stale claim is taken over,
    executed locally through execute_task, and submitted.  Terminates
    because every claim either completes or goes stale and is re-run.
    """
    hooks = hooks or ControllerHooks()
    queue = deque(
        (task, 0.0) for task in sorted(pending_tasks, key=lambda t: t.enqueued_at)
    )
    outcomes: List[PendingOutcome] = []
    while queue:
        task, not_before = queue[0]
        now = time.monotonic()
        if not_before > now:
            sleep(not_before - now)
        queue.popleft()
        try:
            status = client.status(task.resource_id, task.canonical_key, task.case_mode)
        except UnknownTaskError:
            # The row vanished; claim it ourselves through the normal path.
            status = None

        if status is not None and status.status == STATUS_COMPLETE:
            outcomes.append(PendingOutcome(task, ORIGIN_CACHED, status.result))
            continue
        if status is not None and not status.stale:
            queue.append((task, time.monotonic() + poll_interval))
            continue

        if status is None:
            granted = False
            response = client.claim(task.resource_id, task.canonical_key, task.case_mode)
            if response.kind == CLAIM_CACHED:
                outcomes.append(PendingOutcome(task, ORIGIN_CACHED, response.result))
                continue
            if response.kind == CLAIM_CLAIMED:
                granted = True
                task.task_id = response.task_id
        else:
            granted = client.takeover(status.task_id)
            task.task_id = status.task_id
        if not granted:
            queue.append((task, time.monotonic() + poll_interval))
            continue

        payload = execute_task(task)
        hooks.fire(hooks.before_submit, task.canonical_key)
        try:
            client.submit(task.task_id, payload)
        except NotOwnerError:
            # We went stale mid-execution and lost the grant; poll again.
            queue.append((task, time.monotonic() + poll_interval))
            continue
        hooks.fire(hooks.after_submit, task.canonical_key)
        outcomes.append(PendingOutcome(task, ORIGIN_TAKEN_OVER, payload))
    return outcomes


# -- job execution -----------------------------------------------------


def compute_job_id(resource_id: str, case_mode: str, pair_list_path) -> str:
    """Deterministic job identity from what the job reads."""
    digest = hashlib.md5()
    digest.update(resource_id.encode("utf-8"))
    digest.update(b"\n")
    digest.update(case_mode.encode("utf-8"))
    digest.update(b"\n")
    with open(pair_list_path, "rb") as handle:
        digest.update(handle.read())
    return digest.hexdigest()[:16]


def make_client_id(job_id: str) -> str:
    """Fresh per-job identity, which scopes the fair-share quota to a job."""
    return "%s-%s-%s" % (socket.gethostname(), job_id[:8], uuid.uuid4().hex[:6])


def resolve_scheduler_url(config: Config) -> Optional[str]:
    """Environment beats the config file for the scheduler endpoint."""
    return os.environ.get(SCHEDULER_URL_ENV) or config.scheduler_url


def format_result_row(raw_a: str, raw_b: str, result: CooccurrenceResult) -> str:
    return "%s\t%s\t%d\t%d\t%d\t%d\t%d\t%d\t%.6f" % (
        raw_a,
        raw_b,
        result.n_a,
        result.n_b,
        result.n_ab,
        result.tf_a,
        result.tf_b,
        result.n_docs,
        result.jaccard,
    )


def write_results_file(path, resource_id: str, case_mode: str, outcomes: Sequence[PairOutcome]):
    """One output line per input pair, behind an identity header.

    Pairs that failed normalization keep their slot as ``#!error`` comment
    lines so row order still mirrors the input file.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(
            "# resource_id=%s\tcase_mode=%s\tversion=%s\n"
            % (resource_id, case_mode, __version__)
        )
        for outcome in outcomes:
            if outcome.error is not None:
                handle.write(
                    "%s\t%s\t%s\t%s\n"
                    % (ERROR_ROW_PREFIX, outcome.raw_a, outcome.raw_b, outcome.error)
                )
            else:
                handle.write(format_result_row(outcome.raw_a, outcome.raw_b, outcome.result) + "\n")


def _result_from_payload(norm_a: str, norm_b: str, canonical_key: str, payload: Dict) -> CooccurrenceResult:
    """Orient a canonical payload to one row's term order."""
    first, second = canonical_key.split("\t")
    swap = (norm_a, norm_b) != (first, second)
    return CooccurrenceResult(
        term_a=norm_a,
        term_b=norm_b,
        n_a=payload["n_b"] if swap else payload["n_a"],
        n_b=payload["n_a"] if swap else payload["n_b"],
        n_ab=payload["n_ab"],
        tf_a=payload["tf_b"] if swap else payload["tf_a"],
        tf_b=payload["tf_a"] if swap else payload["tf_b"],
        n_docs=payload["n_docs"],
        jaccard=payload["jaccard"],
    )


def payload_from_result(result: CooccurrenceResult, include_keys: bool) -> Dict:
    payload = {
        "n_a": result.n_a,
        "n_b": result.n_b,
        "n_ab": result.n_ab,
        "tf_a": result.tf_a,
        "tf_b": result.tf_b,
        "n_docs": result.n_docs,
        "jaccard": result.jaccard,
    }
    if include_keys and result.co_keys is not None:
        payload["co_keys"] = result.co_keys
    return payload


class JobController:
    """Runs one job to completion and writes its outputs."""

    def __init__(
        self,
        config: Config,
        client=None,
        hooks: Optional[ControllerHooks] = None,
    ):
        self.config = config
        self.hooks = hooks or ControllerHooks()
        self._client = client
        self._degraded = False
        self._takeovers = 0
        self._payloads: Dict[str, Dict] = {}
        self._origins: Dict[str, str] = {}
        self._state_lock = threading.Lock()
        self._index: Optional[InvertedIndex] = None

    # Local execution shared by the claimed, quota, and degraded paths.
    def _execute_local(self, task: Task) -> Dict:
        if self.hooks.execute_delay > 0:
            time.sleep(self.hooks.execute_delay)
        self._index.materialize([task.pair.a, task.pair.b])
        result = pair_counts(self._index, task.pair, DEFAULT_CO_KEYS_LIMIT)
        include = self.config.data_transfer
        return payload_from_result(result, include_keys=include)

    def _record(self, task: Task, origin: str, payload: Dict):
        with self._state_lock:
            self._payloads[task.canonical_key] = payload
            self._origins[task.canonical_key] = origin
        task.origin = origin
        task.status = "done"

    def run(self) -> JobReport:
        config = self.config
        started = time.perf_counter()
        corpus = load_resource(config.resource_path)
        raw_pairs = load_pairs(config.pair_list_path)
        plan = plan_tasks(raw_pairs, config.case_mode, config.shuffle_seed)
        job_id = compute_job_id(corpus.resource_id, config.case_mode, config.pair_list_path)
        self._index = InvertedIndex(corpus, config.case_mode)
        logger.info(
            "job %s: %d rows, %d distinct tasks, mode=%s",
            job_id,
            len(plan.rows),
            len(plan.tasks),
            config.mode,
        )

        tasks = [
            Task(
                job_id=job_id,
                canonical_key=t.canonical_key,
                pair=t.pair,
                enqueued_at=i,
                resource_id=corpus.resource_id,
                case_mode=config.case_mode,
            )
            for i, t in enumerate(plan.tasks)
        ]

        pending_peak = 0
        cached = executed = 0

        if config.mode == MODE_STANDALONE or not tasks:
            outcomes = run_job_local(
                corpus,
                raw_pairs,
                config.case_mode,
                workers=config.workers,
                index=self._index,
            )
            executed = len(tasks)
        else:
            pending_peak = self._run_cooperation(corpus, tasks)
            outcomes = self._assemble_outcomes(plan)
            for task in tasks:
                if task.origin == ORIGIN_CACHED:
                    cached += 1
                else:
                    executed += 1

        if config.store_intermediate:
            cache_path = str(config.output_path) + ".postings.tsv"
            self._index.save_cache(cache_path)
            logger.info("intermediate postings written to %s", cache_path)

        write_results_file(config.output_path, corpus.resource_id, config.case_mode, outcomes)
        wall = time.perf_counter() - started
        return JobReport(
            job_id=job_id,
            resource_id=corpus.resource_id,
            mode=config.mode,
            case_mode=config.case_mode,
            workers=config.workers,
            tasks_total=len(tasks),
            tasks_cached=cached,
            tasks_executed=executed,
            pending_peak=pending_peak,
            takeovers=self._takeovers,
            wall_time_seconds=wall,
            degraded=self._degraded,
        )

    # -- cooperation ---------------------------------------------------

    def _run_cooperation(self, corpus, tasks: List[Task]) -> int:
        config = self.config
        job_id = tasks[0].job_id
        client = self._client
        if client is None:
            url = resolve_scheduler_url(config)
            if not url:
                raise ConfigError("cooperation mode requires scheduler_url")
            client = SchedulerClient(url, make_client_id(job_id))
        self._client = client

        # Unreachable at start is an abort, not a degraded run.
        client.register_resource(
            corpus.resource_id,
            name=os.path.basename(str(config.resource_path)),
            n_docs=corpus.n_docs,
            granularity=corpus.granularity,
        )

        pending = _PendingList()
        heartbeats = _HeartbeatManager(client, config.heartbeat_interval)
        try:
            if config.workers == 1:
                for task in tasks:
                    self._process_task(client, task, pending, heartbeats)
            else:
                with ThreadPoolExecutor(max_workers=config.workers) as pool:
                    futures = [
                        pool.submit(self._process_task, client, task, pending, heartbeats)
                        for task in tasks
                    ]
                    for future in futures:
                        future.result()

            self._drain_pending(client, pending)
        finally:
            heartbeats.stop()
        return pending.peak

    def _process_task(self, client, task: Task, pending: _PendingList, heartbeats):
        config = self.config
        if self._degraded:
            self._record(task, ORIGIN_EXECUTED, self._execute_local(task))
            return
        self.hooks.fire(self.hooks.before_claim, task.canonical_key)
        try:
            response = client.claim(
                task.resource_id,
                task.canonical_key,
                task.case_mode,
                data_transfer=config.data_transfer,
            )
        except QuotaExceededError:
            # The shared result exists but our share is spent; recompute.
            logger.info("quota exhausted; computing %r locally", task.canonical_key)
            self._record(task, ORIGIN_EXECUTED, self._execute_local(task))
            return
        except SchedulerUnreachableError:
            logger.warning("scheduler lost mid-job; finishing locally")
            self._degraded = True
            self._record(task, ORIGIN_EXECUTED, self._execute_local(task))
            return
        self.hooks.fire(self.hooks.after_claim, task.canonical_key, response.kind)

        if response.kind == CLAIM_CACHED:
            self._record(task, ORIGIN_CACHED, response.result)
            return
        if response.kind == CLAIM_PENDING:
            task.task_id = response.task_id
            task.status = "pending"
            pending.add(task)
            return

        task.task_id = response.task_id
        heartbeats.register(task.task_id)
        try:
            payload = self._execute_local(task)
            self.hooks.fire(self.hooks.before_submit, task.canonical_key)
            try:
                client.submit(task.task_id, payload)
            except NotOwnerError:
                # Someone took the task over while we computed; our value
                # is identical by determinism, so keep it for the output.
                logger.debug("lost claim on %r before submit", task.canonical_key)
            except SchedulerUnreachableError:
                self._degraded = True
            else:
                self.hooks.fire(self.hooks.after_submit, task.canonical_key)
            origin = ORIGIN_TAKEN_OVER if response.recovered else ORIGIN_EXECUTED
            if response.recovered:
                with self._state_lock:
                    self._takeovers += 1
            self._record(task, origin, payload)
        finally:
            heartbeats.unregister(task.task_id)

    def _drain_pending(self, client, pending: _PendingList):
        tasks = pending.drain()
        if not tasks:
            return
        try:
            outcomes = process_pending(
                client,
                tasks,
                poll_interval=self.config.pending_poll_interval,
                execute_task=self._execute_local,
                hooks=self.hooks,
            )
        except SchedulerUnreachableError:
            logger.warning("scheduler lost while draining pending; finishing locally")
            self._degraded = True
            for task in tasks:
                if task.status != "done":
                    self._record(task, ORIGIN_EXECUTED, self._execute_local(task))
            return
        for outcome in outcomes:
            if outcome.origin == ORIGIN_TAKEN_OVER:
                with self._state_lock:
                    self._takeovers += 1
            self._record(outcome.task, outcome.origin, outcome.payload)

    def _assemble_outcomes(self, plan: JobPlan) -> List[PairOutcome]:
        outcomes = []
        for row in plan.rows:
            if row.error is not None:
                outcomes.append(PairOutcome(row.raw_a, row.raw_b, error=row.error))
                continue
            payload = self._payloads[row.canonical_key]
            result = _result_from_payload(
                row.norm_a, row.norm_b, row.canonical_key, payload
            )
            outcomes.append(PairOutcome(row.raw_a, row.raw_b, result=result))
        return outcomes


def execute_job(
    config: Config,
    client=None,
    hooks: Optional[ControllerHooks] = None,
) -> JobReport:
    """Run one job described by config and return its report.

    An injected client (anything with the SchedulerClient surface) is used
    as-is; otherwise cooperation mode builds one from the resolved
    scheduler URL.
    """
    return JobController(config, client=client, hooks=hooks).run()
