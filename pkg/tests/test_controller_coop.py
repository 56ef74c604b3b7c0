"""Cooperation mode: caching across jobs, pending, takeover, degradation."""

import threading
import time

import pytest

from coterm.controller import (
    Config,
    ControllerHooks,
    MODE_COOPERATION,
    MODE_STANDALONE,
    ORIGIN_CACHED,
    ORIGIN_TAKEN_OVER,
    PendingOutcome,
    Task,
    _HeartbeatManager,
    execute_job,
    process_pending,
)
from coterm.cooccur import PairedTerm
from coterm.corpus import load_resource
from coterm.errors import (
    AlreadyCompleteError,
    ConfigError,
    NotOwnerError,
    SchedulerUnreachableError,
)
from coterm.scheduler.client import LocalSchedulerClient
from coterm.scheduler.core import (
    CLAIM_CACHED,
    CLAIM_CLAIMED,
    STATUS_COMPLETE,
    STATUS_INCOMPLETE,
    ClaimResponse,
    SchedulerCore,
    TaskStatus,
)
from coterm.scheduler.store import SchedulerStore

from conftest import SAMPLE_LINES, write_corpus_file

PAIRS = "aspirin\tcancer\naspirin\tpain\ncancer\ttherapy\npain\ttherapy\n"


@pytest.fixture
def job_env(tmp_path):
    corpus_path = write_corpus_file(tmp_path / "corpus.tsv", SAMPLE_LINES)
    pairs_path = tmp_path / "pairs.tsv"
    pairs_path.write_text(PAIRS, encoding="utf-8")
    return tmp_path, corpus_path, pairs_path


def make_config(env, name, **overrides):
    tmp_path, corpus_path, pairs_path = env
    settings = dict(
        resource_path=str(corpus_path),
        pair_list_path=str(pairs_path),
        output_path=str(tmp_path / ("%s.out.tsv" % name)),
        mode=MODE_COOPERATION,
        pending_poll_interval=0.05,
        heartbeat_interval=0.1,
    )
    settings.update(overrides)
    return Config(**settings)


@pytest.fixture
def core():
    core = SchedulerCore(SchedulerStore(), stale_timeout=30.0)
    yield core
    core.store.close()


class TestCooperationFlow:
    def test_cold_scheduler_executes_everything(self, job_env, core):
        config = make_config(job_env, "cold")
        report = execute_job(config, client=LocalSchedulerClient(core, "job-a"))
        assert report.mode == MODE_COOPERATION
        assert report.tasks_total == 4
        assert report.tasks_executed == 4
        assert report.tasks_cached == 0
        assert report.takeovers == 0
        assert not report.degraded
        assert core.result_count() == 4

    def test_second_job_is_fully_cached(self, job_env, core):
        first = make_config(job_env, "first")
        execute_job(first, client=LocalSchedulerClient(core, "job-a"))
        second = make_config(job_env, "second")
        report = execute_job(second, client=LocalSchedulerClient(core, "job-b"))
        assert report.tasks_cached == 4
        assert report.tasks_executed == 0
        first_out = open(first.output_path, "rb").read()
        second_out = open(second.output_path, "rb").read()
        assert first_out == second_out

    def test_cooperation_matches_standalone_output(self, job_env, core):
        coop = make_config(job_env, "coop")
        execute_job(coop, client=LocalSchedulerClient(core, "job-a"))
        alone = make_config(job_env, "alone", mode=MODE_STANDALONE)
        execute_job(alone)
        assert open(coop.output_path, "rb").read() == open(alone.output_path, "rb").read()

    def test_partial_cache_split(self, job_env, core):
        tmp_path, corpus_path, _ = job_env
        subset = tmp_path / "subset.tsv"
        subset.write_text("aspirin\tcancer\npain\ttherapy\n", encoding="utf-8")
        warm = make_config(job_env, "warm", pair_list_path=str(subset))
        execute_job(warm, client=LocalSchedulerClient(core, "job-a"))

        full = make_config(job_env, "full")
        report = execute_job(full, client=LocalSchedulerClient(core, "job-b"))
        assert report.tasks_cached == 2
        assert report.tasks_executed == 2

    def test_counts_only_cached_delivery(self, job_env, core):
        execute_job(
            make_config(job_env, "seed"), client=LocalSchedulerClient(core, "job-a")
        )
        lean = make_config(job_env, "lean", data_transfer=False)
        report = execute_job(lean, client=LocalSchedulerClient(core, "job-b"))
        assert report.tasks_cached == 4
        seed_out = open(make_config(job_env, "seed").output_path, "rb").read()
        assert open(lean.output_path, "rb").read() == seed_out

    def test_quota_exhaustion_falls_back_to_local(self, job_env):
        core = SchedulerCore(SchedulerStore(), fair_share_limit=2)
        execute_job(
            make_config(job_env, "seed"), client=LocalSchedulerClient(core, "job-a")
        )
        capped = make_config(job_env, "capped", data_transfer=False)
        report = execute_job(capped, client=LocalSchedulerClient(core, "job-b"))
        # Two deliveries fit the quota; the rest are recomputed locally.
        assert report.tasks_cached == 2
        assert report.tasks_executed == 2
        assert not report.degraded
        seed_out = open(make_config(job_env, "seed").output_path, "rb").read()
        assert open(capped.output_path, "rb").read() == seed_out
        core.store.close()

    def test_multiworker_cooperation_matches_single(self, job_env, core):
        one = make_config(job_env, "one", workers=1)
        execute_job(one, client=LocalSchedulerClient(core, "job-a"))
        fresh = SchedulerCore(SchedulerStore())
        four = make_config(job_env, "four", workers=4)
        report = execute_job(four, client=LocalSchedulerClient(fresh, "job-b"))
        assert report.tasks_executed == 4
        assert open(one.output_path, "rb").read() == open(four.output_path, "rb").read()
        fresh.store.close()

    def test_pending_takeover_of_dead_claimant(self, job_env):
        # A rival claims one task and dies; the job must take it over.
        core = SchedulerCore(SchedulerStore(), stale_timeout=0.2)
        corpus = load_resource(job_env[1])
        rival = LocalSchedulerClient(core, "rival")
        rival.register_resource(corpus.resource_id, "corpus", corpus.n_docs, "document")
        resp = rival.claim(corpus.resource_id, "aspirin\tcancer", "insensitive")
        assert resp.kind == CLAIM_CLAIMED

        config = make_config(job_env, "rescue")
        report = execute_job(config, client=LocalSchedulerClient(core, "job-a"))
        assert report.takeovers == 1
        assert report.tasks_total == 4
        assert report.pending_peak == 1
        assert core.result_count() == 4
        alone = make_config(job_env, "alone", mode=MODE_STANDALONE)
        execute_job(alone)
        assert open(config.output_path, "rb").read() == open(alone.output_path, "rb").read()
        core.store.close()

    def test_live_rival_result_arrives_via_pending(self, job_env, core):
        corpus = load_resource(job_env[1])
        rival = LocalSchedulerClient(core, "rival")
        rival.register_resource(corpus.resource_id, "corpus", corpus.n_docs, "document")
        resp = rival.claim(corpus.resource_id, "aspirin\tcancer", "insensitive")

        def finish_later():
            time.sleep(0.15)
            rival.submit(
                resp.task_id,
                {"n_a": 2, "n_b": 2, "n_ab": 1, "tf_a": 2, "tf_b": 2,
                 "n_docs": 3, "jaccard": 1 / 3, "co_keys": ["d2"]},
            )

        thread = threading.Thread(target=finish_later)
        thread.start()
        report = execute_job(
            make_config(job_env, "waiter"),
            client=LocalSchedulerClient(core, "job-a"),
        )
        thread.join()
        assert report.tasks_cached == 1
        assert report.tasks_executed == 3
        assert report.takeovers == 0
        assert report.pending_peak == 1


class TestDegradation:
    def test_no_url_in_cooperation_mode(self, job_env):
        config = make_config(job_env, "nourl")
        with pytest.raises(ConfigError):
            execute_job(config)

    def test_unreachable_at_start_aborts(self, job_env):
        config = make_config(job_env, "dead", scheduler_url="http://127.0.0.1:9")
        with pytest.raises(SchedulerUnreachableError):
            execute_job(config)

    def test_mid_job_loss_degrades_and_finishes(self, job_env, core):
        inner = LocalSchedulerClient(core, "job-a")

        class DropsAfter:
            """Forwards two claims, then the scheduler vanishes."""

            def __init__(self):
                self.claims = 0

            def register_resource(self, *a, **k):
                return inner.register_resource(*a, **k)

            def claim(self, *a, **k):
                self.claims += 1
                if self.claims > 2:
                    raise SchedulerUnreachableError("connection refused")
                return inner.claim(*a, **k)

            def heartbeat(self, task_id):
                inner.heartbeat(task_id)

            def submit(self, task_id, result):
                return inner.submit(task_id, result)

            def status(self, *a):
                raise SchedulerUnreachableError("connection refused")

            def takeover(self, task_id):
                raise SchedulerUnreachableError("connection refused")

            def close(self):
                pass

        config = make_config(job_env, "degraded")
        report = execute_job(config, client=DropsAfter())
        assert report.degraded
        assert report.tasks_total == 4
        assert report.tasks_cached + report.tasks_executed == 4
        alone = make_config(job_env, "alone", mode=MODE_STANDALONE)
        execute_job(alone)
        assert open(config.output_path, "rb").read() == open(alone.output_path, "rb").read()

    def test_lost_grant_before_submit_keeps_local_value(self, job_env, core):
        inner = LocalSchedulerClient(core, "job-a")

        class LosesFirstSubmit:
            def __init__(self):
                self.failed = False

            def __getattr__(self, name):
                return getattr(inner, name)

            def submit(self, task_id, result):
                if not self.failed:
                    self.failed = True
                    raise NotOwnerError("reassigned while computing")
                return inner.submit(task_id, result)

        config = make_config(job_env, "lost")
        report = execute_job(config, client=LosesFirstSubmit())
        assert not report.degraded
        assert report.tasks_executed == 4
        alone = make_config(job_env, "alone", mode=MODE_STANDALONE)
        execute_job(alone)
        assert open(config.output_path, "rb").read() == open(alone.output_path, "rb").read()


def make_task(key, enqueued_at=0):
    a, b = key.split("\t")
    return Task(
        job_id="j",
        canonical_key=key,
        pair=PairedTerm(a, b),
        enqueued_at=enqueued_at,
        resource_id="r" * 32,
        case_mode="insensitive",
    )


def fake_payload(n_ab=1):
    return {"n_a": 2, "n_b": 2, "n_ab": n_ab, "tf_a": 2, "tf_b": 2,
            "n_docs": 3, "jaccard": 0.25}


class ScriptedClient:
    """Plays back canned per-key responses and logs every call."""

    def __init__(self, statuses=None, takeovers=None, claims=None, submits=None):
        self.statuses = {k: list(v) for k, v in (statuses or {}).items()}
        self.takeovers = dict(takeovers or {})
        self.claims = dict(claims or {})
        self.submits = {k: list(v) for k, v in (submits or {}).items()}
        self.calls = []

    def status(self, resource_id, pair_key, case_mode):
        self.calls.append(("status", pair_key))
        step = self.statuses[pair_key].pop(0)
        if isinstance(step, Exception):
            raise step
        return step

    def takeover(self, task_id):
        self.calls.append(("takeover", task_id))
        return self.takeovers[task_id]

    def claim(self, resource_id, pair_key, case_mode, **kwargs):
        self.calls.append(("claim", pair_key))
        return self.claims[pair_key]

    def submit(self, task_id, result):
        self.calls.append(("submit", task_id))
        outcomes = self.submits.get(task_id)
        if outcomes:
            step = outcomes.pop(0)
            if isinstance(step, Exception):
                raise step
            return step
        return "recorded"


class TestProcessPending:
    def run_pending(self, client, tasks):
        return process_pending(
            client,
            tasks,
            poll_interval=0.01,
            execute_task=lambda task: fake_payload(),
        )

    def test_completed_task_yields_cached(self):
        task = make_task("a\tb")
        client = ScriptedClient(
            statuses={"a\tb": [TaskStatus(STATUS_COMPLETE, result=fake_payload(3))]}
        )
        outcomes = self.run_pending(client, [task])
        assert len(outcomes) == 1
        assert outcomes[0].origin == ORIGIN_CACHED
        assert outcomes[0].payload["n_ab"] == 3

    def test_live_claim_rotates_until_complete(self):
        task = make_task("a\tb")
        client = ScriptedClient(
            statuses={
                "a\tb": [
                    TaskStatus(STATUS_INCOMPLETE, stale=False, task_id=7),
                    TaskStatus(STATUS_INCOMPLETE, stale=False, task_id=7),
                    TaskStatus(STATUS_COMPLETE, result=fake_payload()),
                ]
            }
        )
        outcomes = self.run_pending(client, [task])
        assert [c[0] for c in client.calls] == ["status", "status", "status"]
        assert outcomes[0].origin == ORIGIN_CACHED

    def test_stale_claim_taken_over_and_submitted(self):
        task = make_task("a\tb")
        client = ScriptedClient(
            statuses={"a\tb": [TaskStatus(STATUS_INCOMPLETE, stale=True, task_id=7)]},
            takeovers={7: True},
        )
        outcomes = self.run_pending(client, [task])
        assert outcomes[0].origin == ORIGIN_TAKEN_OVER
        assert ("submit", 7) in client.calls

    def test_lost_takeover_race_rotates(self):
        task = make_task("a\tb")
        client = ScriptedClient(
            statuses={
                "a\tb": [
                    TaskStatus(STATUS_INCOMPLETE, stale=True, task_id=7),
                    TaskStatus(STATUS_COMPLETE, result=fake_payload()),
                ]
            },
            takeovers={7: False},
        )
        outcomes = self.run_pending(client, [task])
        assert outcomes[0].origin == ORIGIN_CACHED
        assert ("takeover", 7) in client.calls

    def test_vanished_row_reclaims(self):
        task = make_task("a\tb")
        from coterm.errors import UnknownTaskError

        client = ScriptedClient(
            statuses={"a\tb": [UnknownTaskError("gone")]},
            claims={"a\tb": ClaimResponse(kind=CLAIM_CLAIMED, task_id=9)},
        )
        outcomes = self.run_pending(client, [task])
        assert outcomes[0].origin == ORIGIN_TAKEN_OVER
        assert ("claim", "a\tb") in client.calls
        assert ("submit", 9) in client.calls

    def test_vanished_row_can_come_back_cached(self):
        task = make_task("a\tb")
        from coterm.errors import UnknownTaskError

        client = ScriptedClient(
            statuses={"a\tb": [UnknownTaskError("gone")]},
            claims={"a\tb": ClaimResponse(kind=CLAIM_CACHED, result=fake_payload(5))},
        )
        outcomes = self.run_pending(client, [task])
        assert outcomes[0].origin == ORIGIN_CACHED
        assert outcomes[0].payload["n_ab"] == 5

    def test_submit_refusal_requeues(self):
        task = make_task("a\tb")
        client = ScriptedClient(
            statuses={
                "a\tb": [
                    TaskStatus(STATUS_INCOMPLETE, stale=True, task_id=7),
                    TaskStatus(STATUS_COMPLETE, result=fake_payload(2)),
                ]
            },
            takeovers={7: True},
            submits={7: [NotOwnerError("lost it")]},
        )
        outcomes = self.run_pending(client, [task])
        assert outcomes[0].origin == ORIGIN_CACHED
        assert outcomes[0].payload["n_ab"] == 2

    def test_oldest_first(self):
        young = make_task("a\tb", enqueued_at=5)
        old = make_task("c\td", enqueued_at=1)
        client = ScriptedClient(
            statuses={
                "a\tb": [TaskStatus(STATUS_COMPLETE, result=fake_payload())],
                "c\td": [TaskStatus(STATUS_COMPLETE, result=fake_payload())],
            }
        )
        self.run_pending(client, [young, old])
        assert client.calls[0] == ("status", "c\td")


class TestHeartbeatManager:
    class CountingClient:
        def __init__(self, fail_with=None):
            self.beats = []
            self.fail_with = fail_with

        def heartbeat(self, task_id):
            self.beats.append(task_id)
            if self.fail_with is not None:
                raise self.fail_with

    def test_registered_ids_get_heartbeats(self):
        client = self.CountingClient()
        manager = _HeartbeatManager(client, interval=0.02)
        manager.register(42)
        time.sleep(0.15)
        manager.stop()
        assert client.beats.count(42) >= 2

    def test_unregister_stops_beats(self):
        client = self.CountingClient()
        manager = _HeartbeatManager(client, interval=0.02)
        manager.register(42)
        time.sleep(0.1)
        manager.unregister(42)
        time.sleep(0.05)
        before = len(client.beats)
        time.sleep(0.1)
        manager.stop()
        assert len(client.beats) == before

    def test_completed_task_dropped_after_refusal(self):
        client = self.CountingClient(fail_with=AlreadyCompleteError("done"))
        manager = _HeartbeatManager(client, interval=0.02)
        manager.register(42)
        time.sleep(0.15)
        manager.stop()
        assert client.beats.count(42) == 1
