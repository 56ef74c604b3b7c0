"""Multi-cluster co-operation simulator.

Spins up one scheduler core in-process, gives every simulated cluster its
own job controller thread and pair list, and measures how the work splits:
who executed what, what came from the shared cache, and how much work got
duplicated when a cluster died mid-claim.  Crashes are injected through
controller hooks, so the production claim and submit paths run unmodified.
"""

from __future__ import annotations

import dataclasses
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from . import CASE_INSENSITIVE
from .controller import (
    Config,
    ControllerHooks,
    JobReport,
    MODE_COOPERATION,
    execute_job,
    parse_key_value_file,
    payload_from_result,
    predicted_job_size,
    predicted_tasks_to_process,
)
from .cooccur import DEFAULT_CO_KEYS_LIMIT, PairedTerm, pair_counts
from .corpus import Corpus, load_resource
from .errors import ScenarioError
from .gen import generate_corpus, sample_pairs
from .index import InvertedIndex, normalize_term
from .scheduler.client import LocalSchedulerClient
from .scheduler.core import CLAIM_CACHED, CLAIM_CLAIMED, STATUS_COMPLETE, SchedulerCore
from .scheduler.store import SchedulerStore

logger = logging.getLogger(__name__)


class SimulatedCrash(Exception):
    """Raised inside a cluster thread to cut its run short mid-job."""


@dataclass
class Scenario:
    """Knobs for one simulated multi-cluster run."""

    clusters: int = 3
    tasks_per_cluster: int = 30
    overlap_fraction: float = 1.0
    precache_fraction: float = 0.0
    crash_cluster: Optional[int] = None
    crash_after: int = 0
    # Execution must outweigh scheduling noise for the split to even out.
    task_duration: float = 0.01
    seed: int = 0
    stale_timeout: float = 1.0
    poll_interval: float = 0.05
    heartbeat_interval: float = 0.25
    workers: int = 1
    n_docs: int = 40
    vocab_size: int = 60


_SCENARIO_INT_KEYS = (
    "clusters",
    "tasks_per_cluster",
    "crash_after",
    "seed",
    "workers",
    "n_docs",
    "vocab_size",
)
_SCENARIO_FLOAT_KEYS = (
    "overlap_fraction",
    "precache_fraction",
    "task_duration",
    "stale_timeout",
    "poll_interval",
    "heartbeat_interval",
)


def validate_scenario(scenario: Scenario) -> None:
    if scenario.clusters < 1:
        raise ScenarioError("clusters must be >= 1")
    if scenario.tasks_per_cluster < 1:
        raise ScenarioError("tasks_per_cluster must be >= 1")
    for name in ("overlap_fraction", "precache_fraction"):
        value = getattr(scenario, name)
        if not 0.0 <= value <= 1.0:
            raise ScenarioError("%s must lie in [0, 1]" % name)
    if scenario.crash_cluster is not None and not (
        0 <= scenario.crash_cluster < scenario.clusters
    ):
        raise ScenarioError("crash_cluster must name one of the clusters")
    if scenario.crash_after < 0:
        raise ScenarioError("crash_after must be >= 0")
    if scenario.task_duration < 0:
        raise ScenarioError("task_duration must be >= 0")
    if scenario.stale_timeout <= 0 or scenario.poll_interval <= 0:
        raise ScenarioError("stale_timeout and poll_interval must be positive")
    if scenario.heartbeat_interval <= 0:
        raise ScenarioError("heartbeat_interval must be positive")
    if scenario.workers < 1:
        raise ScenarioError("workers must be >= 1")
    if scenario.n_docs < 1 or scenario.vocab_size < 2:
        raise ScenarioError("n_docs must be >= 1 and vocab_size >= 2")


def parse_scenario(path) -> Scenario:
    """Load a scenario from a ``key = value`` file."""
    values = parse_key_value_file(path)
    known = set(Scenario.__dataclass_fields__)
    for key in values:
        if key not in known:
            raise ScenarioError("unknown scenario setting %r" % key)
    scenario = Scenario()
    for key in _SCENARIO_INT_KEYS:
        if key in values:
            try:
                setattr(scenario, key, int(values[key]))
            except ValueError:
                raise ScenarioError("%s must be an integer" % key) from None
    for key in _SCENARIO_FLOAT_KEYS:
        if key in values:
            try:
                setattr(scenario, key, float(values[key]))
            except ValueError:
                raise ScenarioError("%s must be a number" % key) from None
    if "crash_cluster" in values:
        raw = values["crash_cluster"].lower()
        if raw in ("", "none"):
            scenario.crash_cluster = None
        else:
            try:
                scenario.crash_cluster = int(raw)
            except ValueError:
                raise ScenarioError("crash_cluster must be an integer or none") from None
    validate_scenario(scenario)
    return scenario


# -- instrumentation ---------------------------------------------------


class _ClusterProbe:
    """Hook target for one cluster: records traffic, injects the crash."""

    def __init__(self, cluster: int, crash_after: Optional[int] = None):
        self.cluster = cluster
        self.claimed: Set[str] = set()
        self.cached: Set[str] = set()
        self.submitted: Set[str] = set()
        self._crash_after = crash_after
        self._lock = threading.Lock()

    def _maybe_crash(self):
        if self._crash_after is None:
            return
        with self._lock:
            tripped = len(self.submitted) >= self._crash_after
        if tripped:
            raise SimulatedCrash(
                "cluster %d dies after %d submissions" % (self.cluster, self._crash_after)
            )

    def before_claim(self, pair_key: str):
        self._maybe_crash()

    def after_claim(self, pair_key: str, kind: str):
        with self._lock:
            if kind == CLAIM_CLAIMED:
                self.claimed.add(pair_key)
            elif kind == CLAIM_CACHED:
                self.cached.add(pair_key)

    def before_submit(self, pair_key: str):
        self._maybe_crash()

    def after_submit(self, pair_key: str):
        with self._lock:
            self.submitted.add(pair_key)

    def abandoned(self) -> Set[str]:
        with self._lock:
            return self.claimed - self.submitted

    def hooks(self, execute_delay: float) -> ControllerHooks:
        return ControllerHooks(
            execute_delay=execute_delay,
            before_claim=self.before_claim,
            after_claim=self.after_claim,
            before_submit=self.before_submit,
            after_submit=self.after_submit,
        )


# -- report shapes -----------------------------------------------------


@dataclass
class ClusterOutcome:
    """What one simulated cluster did, next to what the model expected."""

    cluster: int
    crashed: bool
    tasks_total: int
    cached: int
    executed: int
    takeovers: int
    pending_peak: int
    wall_time_seconds: float
    predicted_alone: int
    predicted_executions: float


@dataclass
class SimReport:
    scenario: Scenario
    resource_id: str
    tasks_distinct: int
    precached: int
    executions_total: int
    takeover_duplicates: int
    abandoned_claims: int
    results_recorded: int
    all_tasks_complete: bool
    conservation_ok: Optional[bool]
    per_cluster: List[ClusterOutcome] = field(default_factory=list)
    wall_time_seconds: float = 0.0

    def as_dict(self) -> Dict:
        return {
            "scenario": dataclasses.asdict(self.scenario),
            "resource_id": self.resource_id,
            "tasks_distinct": self.tasks_distinct,
            "precached": self.precached,
            "executions_total": self.executions_total,
            "takeover_duplicates": self.takeover_duplicates,
            "abandoned_claims": self.abandoned_claims,
            "results_recorded": self.results_recorded,
            "all_tasks_complete": self.all_tasks_complete,
            "conservation_ok": self.conservation_ok,
            "per_cluster": [dataclasses.asdict(c) for c in self.per_cluster],
            "wall_time_seconds": self.wall_time_seconds,
        }


def verify_bounds(report: SimReport) -> List[str]:
    """Check the run against the cost model; returns violation messages.

    Crash-free runs must land each cluster within clusters-1 executions of
    its prediction, with at most clusters-1 racy duplicates.  Runs with a
    crash must still complete every task, re-executing at least one
    abandoned claim and at most all of them plus the racy allowance.
    """
    violations: List[str] = []
    slack = report.scenario.clusters - 1
    crashed = any(c.crashed for c in report.per_cluster)

    if not report.all_tasks_complete:
        violations.append("not every distinct task reached a stored result")

    if not crashed:
        for outcome in report.per_cluster:
            gap = abs(outcome.executed - outcome.predicted_executions)
            if gap > slack:
                violations.append(
                    "cluster %d executed %d tasks, predicted %.1f (allowed gap %d)"
                    % (
                        outcome.cluster,
                        outcome.executed,
                        outcome.predicted_executions,
                        slack,
                    )
                )
        if report.takeover_duplicates > slack:
            violations.append(
                "%d duplicated executions without a crash (allowed %d)"
                % (report.takeover_duplicates, slack)
            )
        if report.conservation_ok is False:
            violations.append("executed plus cached does not cover the task lists")
    else:
        if report.abandoned_claims > 0 and report.takeover_duplicates < 1:
            violations.append("a crash left claims behind but nothing was re-executed")
        if report.takeover_duplicates > report.abandoned_claims + slack:
            violations.append(
                "%d duplicated executions for %d abandoned claims (allowed %d)"
                % (
                    report.takeover_duplicates,
                    report.abandoned_claims,
                    report.abandoned_claims + slack,
                )
            )
    return violations


# -- scenario construction ---------------------------------------------


def _canonical_key(raw_a: str, raw_b: str, case_mode: str) -> str:
    return "\t".join(sorted((normalize_term(raw_a, case_mode), normalize_term(raw_b, case_mode))))


def build_pair_lists(
    scenario: Scenario, vocab: List[str]
) -> Tuple[List[List[Tuple[str, str]]], List[Tuple[str, str]]]:
    """Per-cluster pair lists sharing a common pool, plus that pool."""
    shared_count = round(scenario.overlap_fraction * scenario.tasks_per_cluster)
    distinct_count = scenario.tasks_per_cluster - shared_count
    total = shared_count + scenario.clusters * distinct_count
    pairs = sample_pairs(vocab, total, scenario.seed + 1)
    shared = pairs[:shared_count]
    lists = []
    for i in range(scenario.clusters):
        start = shared_count + i * distinct_count
        lists.append(shared + pairs[start : start + distinct_count])
    return lists, shared


def _precache(
    core: SchedulerCore,
    corpus: Corpus,
    index: InvertedIndex,
    cluster_pairs: List[List[Tuple[str, str]]],
    count_per_cluster: int,
    case_mode: str,
) -> Set[str]:
    """Seed the cache with the head of every cluster's list; returns the keys."""
    seeded: Set[str] = set()
    if count_per_cluster <= 0:
        return seeded
    seeder = LocalSchedulerClient(core, "sim-seed")
    for own in cluster_pairs:
        for raw_a, raw_b in own[:count_per_cluster]:
            key = _canonical_key(raw_a, raw_b, case_mode)
            if key in seeded:
                continue
            response = seeder.claim(corpus.resource_id, key, case_mode)
            if response.kind == CLAIM_CLAIMED:
                term_a, term_b = key.split("\t")
                index.materialize([term_a, term_b])
                result = pair_counts(
                    index, PairedTerm(term_a, term_b), DEFAULT_CO_KEYS_LIMIT
                )
                seeder.submit(response.task_id, payload_from_result(result, True))
            seeded.add(key)
    return seeded


def _run_cluster(config, client, hooks, slot, reports, errors):
    try:
        reports[slot] = execute_job(config, client=client, hooks=hooks)
    except Exception as exc:  # held for the coordinator, crash or not
        errors[slot] = exc


# -- the simulation itself ---------------------------------------------


def run_scenario(scenario: Scenario, workdir) -> SimReport:
    """Run one scenario end to end inside this process.

    The scheduler core is shared by every cluster through in-process
    clients; cluster claim traffic, crash recovery, and quota behavior all
    exercise the same code paths a remote deployment runs.
    """
    validate_scenario(scenario)
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    case_mode = CASE_INSENSITIVE
    started = time.perf_counter()

    corpus_path = workdir / "corpus.tsv"
    vocab = generate_corpus(corpus_path, scenario.n_docs, scenario.vocab_size, scenario.seed)
    corpus = load_resource(corpus_path)

    cluster_pairs, _ = build_pair_lists(scenario, vocab)
    pair_paths = []
    for i, own in enumerate(cluster_pairs):
        path = workdir / ("pairs-%d.tsv" % i)
        path.write_text(
            "".join("%s\t%s\n" % pair for pair in own), encoding="utf-8"
        )
        pair_paths.append(path)

    cluster_keys = [
        {_canonical_key(a, b, case_mode) for a, b in own} for own in cluster_pairs
    ]
    all_keys = set().union(*cluster_keys)
    key_spread: Dict[str, int] = {}
    for keys in cluster_keys:
        for key in keys:
            key_spread[key] = key_spread.get(key, 0) + 1

    store = SchedulerStore()
    core = SchedulerCore(store, stale_timeout=scenario.stale_timeout)
    core.register_resource(
        corpus.resource_id,
        name=corpus_path.name,
        n_docs=corpus.n_docs,
        granularity=corpus.granularity,
    )

    precache_count = round(scenario.precache_fraction * scenario.tasks_per_cluster)
    seed_index = InvertedIndex(corpus, case_mode)
    precached = _precache(
        core, corpus, seed_index, cluster_pairs, precache_count, case_mode
    )

    probes = []
    reports: List[Optional[JobReport]] = [None] * scenario.clusters
    errors: List[Optional[Exception]] = [None] * scenario.clusters
    threads = []
    for i in range(scenario.clusters):
        crash_after = (
            scenario.crash_after if scenario.crash_cluster == i else None
        )
        probe = _ClusterProbe(i, crash_after)
        probes.append(probe)
        config = Config(
            resource_path=str(corpus_path),
            pair_list_path=str(pair_paths[i]),
            output_path=str(workdir / ("results-%d.tsv" % i)),
            mode=MODE_COOPERATION,
            case_mode=case_mode,
            workers=scenario.workers,
            shuffle_seed=scenario.seed + i,
            pending_poll_interval=scenario.poll_interval,
            heartbeat_interval=scenario.heartbeat_interval,
        )
        client = LocalSchedulerClient(core, "sim-cluster-%d" % i)
        thread = threading.Thread(
            target=_run_cluster,
            args=(config, client, probe.hooks(scenario.task_duration), i, reports, errors),
            name="sim-cluster-%d" % i,
        )
        threads.append(thread)
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    for i, error in enumerate(errors):
        if error is not None and not isinstance(error, SimulatedCrash):
            raise error
        if error is not None:
            logger.info("cluster %d crashed as scripted: %s", i, error)

    abandoned: Set[str] = set()
    for i, error in enumerate(errors):
        if error is not None:
            abandoned |= probes[i].abandoned()

    shared_live = {
        key for key, spread in key_spread.items() if spread > 1
    } - precached
    per_cluster: List[ClusterOutcome] = []
    executions_total = 0
    takeover_duplicates = 0
    cached_total = 0
    for i in range(scenario.clusters):
        crashed = errors[i] is not None
        keys = cluster_keys[i]
        cached_seen = len(keys & precached)
        shared_here = len(keys & shared_live)
        report = reports[i]
        if report is not None:
            executed = report.tasks_executed
            cached = report.tasks_cached
            takeovers = report.takeovers
            pending_peak = report.pending_peak
            wall = report.wall_time_seconds
        else:
            executed = len(probes[i].submitted)
            cached = len(probes[i].cached)
            takeovers = 0
            pending_peak = 0
            wall = 0.0
        executions_total += executed
        takeover_duplicates += takeovers
        cached_total += cached
        per_cluster.append(
            ClusterOutcome(
                cluster=i,
                crashed=crashed,
                tasks_total=len(keys),
                cached=cached,
                executed=executed,
                takeovers=takeovers,
                pending_peak=pending_peak,
                wall_time_seconds=wall,
                predicted_alone=predicted_tasks_to_process(len(keys), cached_seen),
                predicted_executions=predicted_job_size(
                    len(keys),
                    cached_seen,
                    shared_here,
                    scenario.clusters,
                    takeovers,
                ),
            )
        )

    results_recorded = core.result_count()
    rows = core.task_rows()
    all_complete = results_recorded == len(all_keys) and all(
        row.status == STATUS_COMPLETE for row in rows
    )

    # Without a crash: every listed task resolves exactly once per cluster,
    # every live distinct task runs exactly once globally plus any racy
    # re-executions, and every distinct task leaves one stored result.
    conservation: Optional[bool] = None
    if not any(c.crashed for c in per_cluster):
        listed = sum(len(keys) for keys in cluster_keys)
        live_distinct = len(all_keys) - len(precached)
        conservation = (
            cached_total + executions_total == listed
            and executions_total == live_distinct + takeover_duplicates
            and results_recorded == len(all_keys)
        )

    store.close()
    report = SimReport(
        scenario=scenario,
        resource_id=corpus.resource_id,
        tasks_distinct=len(all_keys),
        precached=len(precached),
        executions_total=executions_total,
        takeover_duplicates=takeover_duplicates,
        abandoned_claims=len(abandoned),
        results_recorded=results_recorded,
        all_tasks_complete=all_complete,
        conservation_ok=conservation,
        per_cluster=per_cluster,
        wall_time_seconds=time.perf_counter() - started,
    )
    logger.info(
        "scenario done: %d distinct tasks, %d executions, %d duplicated",
        report.tasks_distinct,
        report.executions_total,
        report.takeover_duplicates,
    )
    return report
