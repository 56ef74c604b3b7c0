"""Job configuration, planning, prediction formulas, and output files."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coterm import CASE_INSENSITIVE
from coterm.controller import (
    Config,
    ERROR_ROW_PREFIX,
    MODE_STANDALONE,
    compute_job_id,
    execute_job,
    format_result_row,
    load_pairs,
    make_client_id,
    parse_config,
    plan_tasks,
    predicted_job_size,
    predicted_tasks_to_process,
    resolve_scheduler_url,
    write_results_file,
)
from coterm.cooccur import CooccurrenceResult, run_job_local
from coterm.errors import ConfigError, FormatError

from conftest import SAMPLE_LINES, write_corpus_file


# -- config parsing ----------------------------------------------------


def write_config(tmp_path, body):
    path = tmp_path / "job.conf"
    path.write_text(body, encoding="utf-8")
    return path


BASE_CONFIG = "resource_path = r.tsv\npair_list_path = p.tsv\noutput_path = out.tsv\n"


def test_parse_config_defaults(tmp_path):
    config = parse_config(write_config(tmp_path, BASE_CONFIG))
    assert config.mode == MODE_STANDALONE
    assert config.case_mode == CASE_INSENSITIVE
    assert config.workers == 1
    assert config.data_transfer is True
    assert config.scheduler_url is None


def test_parse_config_full(tmp_path):
    body = BASE_CONFIG + (
        "mode = cooperation\ncase_mode = sensitive\nworkers = 4\n"
        "scheduler_url = http://localhost:9999\ndata_transfer = false\n"
        "shuffle_seed = 9\npending_poll_interval = 0.5\n"
        "heartbeat_interval = 2.5\nstore_intermediate = yes\n"
        "# a comment\n\n"
    )
    config = parse_config(write_config(tmp_path, body))
    assert config.mode == "cooperation"
    assert config.workers == 4
    assert config.data_transfer is False
    assert config.shuffle_seed == 9
    assert config.pending_poll_interval == 0.5
    assert config.heartbeat_interval == 2.5
    assert config.store_intermediate is True


@pytest.mark.parametrize(
    "line",
    [
        "unknown_key = 1",
        "mode = sideways",
        "case_mode = shouty",
        "workers = zero",
        "workers = 0",
        "pending_poll_interval = -1",
        "data_transfer = maybe",
    ],
)
def test_parse_config_rejects(tmp_path, line):
    with pytest.raises(ConfigError):
        parse_config(write_config(tmp_path, BASE_CONFIG + line + "\n"))


def test_parse_config_requires_paths(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(write_config(tmp_path, "resource_path = r.tsv\n"))


def test_parse_config_rejects_missing_equals(tmp_path):
    with pytest.raises(ConfigError) as err:
        parse_config(write_config(tmp_path, BASE_CONFIG + "just words\n"))
    assert "line 4" in str(err.value)


# -- pair list loading -------------------------------------------------


def test_load_pairs_basic(tmp_path):
    path = tmp_path / "p.tsv"
    path.write_text("a\tb\nc d\te\n\nf\tg\n", encoding="utf-8")
    assert load_pairs(path) == [("a", "b"), ("c d", "e"), ("f", "g")]


def test_load_pairs_keeps_raw_spelling(tmp_path):
    path = tmp_path / "p.tsv"
    path.write_text("  Aspirin \tCANCER-\n", encoding="utf-8")
    assert load_pairs(path) == [("  Aspirin ", "CANCER-")]


@pytest.mark.parametrize("line", ["only-one-column", "a\tb\tc"])
def test_load_pairs_rejects_wrong_arity(tmp_path, line):
    path = tmp_path / "p.tsv"
    path.write_text(line + "\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_pairs(path)


# -- prediction formulas -----------------------------------------------


def test_predicted_tasks_to_process():
    assert predicted_tasks_to_process(10, 0) == 10
    assert predicted_tasks_to_process(10, 3) == 7
    assert predicted_tasks_to_process(10, 10) == 0
    with pytest.raises(ValueError):
        predicted_tasks_to_process(5, 6)
    with pytest.raises(ValueError):
        predicted_tasks_to_process(5, -1)


def test_predicted_job_size():
    # 30 tasks, nothing cached, all shared across 3 clusters -> 10 each.
    assert predicted_job_size(30, 0, 30, 3) == pytest.approx(10.0)
    # A lone cluster keeps everything.
    assert predicted_job_size(30, 0, 30, 1) == pytest.approx(30.0)
    # Cached tasks leave the pool before sharing splits it.
    assert predicted_job_size(10, 4, 6, 2) == pytest.approx(3.0)
    # Takeovers add back re-executed work.
    assert predicted_job_size(30, 0, 30, 3, takeovers=2) == pytest.approx(12.0)
    with pytest.raises(ValueError):
        predicted_job_size(10, 11, 0, 2)
    with pytest.raises(ValueError):
        predicted_job_size(10, 0, 11, 2)
    with pytest.raises(ValueError):
        predicted_job_size(10, 0, 5, 0)
    with pytest.raises(ValueError):
        predicted_job_size(10, 0, 5, 2, takeovers=-1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 200), st.integers(0, 200), st.integers(0, 200), st.integers(1, 8))
def test_predicted_job_size_within_solo_bound(total, cached, shared, clusters):
    cached = min(cached, total)
    shared = min(shared, total - cached)
    with_sharing = predicted_job_size(total, cached, shared, clusters)
    alone = predicted_tasks_to_process(total, cached)
    assert with_sharing <= alone
    assert with_sharing >= alone - shared


# -- planning ----------------------------------------------------------


def test_plan_tasks_dedups_and_marks_errors():
    raw = [("A", "b"), ("b", "a"), ("", "x"), ("a", "b")]
    plan = plan_tasks(raw, CASE_INSENSITIVE, shuffle_seed=0)
    assert len(plan.rows) == 4
    assert plan.rows[2].error == "empty_term"
    assert len(plan.tasks) == 1
    assert plan.tasks[0].canonical_key == "a\tb"


def test_plan_tasks_shuffle_is_seeded():
    raw = [("t%d" % i, "u%d" % i) for i in range(12)]
    one = [t.canonical_key for t in plan_tasks(raw, CASE_INSENSITIVE, 1).tasks]
    same = [t.canonical_key for t in plan_tasks(raw, CASE_INSENSITIVE, 1).tasks]
    other = [t.canonical_key for t in plan_tasks(raw, CASE_INSENSITIVE, 2).tasks]
    assert one == same
    assert sorted(one) == sorted(other)
    assert one != other


# -- identities --------------------------------------------------------


def test_job_id_depends_on_inputs(tmp_path):
    pair_path = tmp_path / "p.tsv"
    pair_path.write_text("a\tb\n", encoding="utf-8")
    base = compute_job_id("f" * 32, CASE_INSENSITIVE, pair_path)
    assert base == compute_job_id("f" * 32, CASE_INSENSITIVE, pair_path)
    assert base != compute_job_id("e" * 32, CASE_INSENSITIVE, pair_path)
    assert base != compute_job_id("f" * 32, "sensitive", pair_path)
    pair_path.write_text("a\tc\n", encoding="utf-8")
    assert base != compute_job_id("f" * 32, CASE_INSENSITIVE, pair_path)


def test_client_ids_are_unique_per_call():
    ids = {make_client_id("0123456789abcdef") for _ in range(20)}
    assert len(ids) == 20


def test_scheduler_url_env_override(monkeypatch, tmp_path):
    config = Config("r", "p", "o", scheduler_url="http://from-config:1")
    monkeypatch.delenv("COTERM_SCHEDULER_URL", raising=False)
    assert resolve_scheduler_url(config) == "http://from-config:1"
    monkeypatch.setenv("COTERM_SCHEDULER_URL", "http://from-env:2")
    assert resolve_scheduler_url(config) == "http://from-env:2"


# -- results file ------------------------------------------------------


def test_format_result_row_layout():
    result = CooccurrenceResult(
        term_a="a", term_b="b", n_a=2, n_b=3, n_ab=1, tf_a=4, tf_b=5,
        n_docs=10, jaccard=0.25,
    )
    assert format_result_row("RawA", "rawB", result) == (
        "RawA\trawB\t2\t3\t1\t4\t5\t10\t0.250000"
    )


def test_write_results_file_rows_and_errors(tmp_path, sample_corpus):
    raw = [("aspirin", "cancer"), ("??", "x"), ("therapy", "pain")]
    outcomes = run_job_local(sample_corpus, raw, CASE_INSENSITIVE)
    out = tmp_path / "results.tsv"
    write_results_file(out, sample_corpus.resource_id, CASE_INSENSITIVE, outcomes)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == (
        "# resource_id=%s\tcase_mode=%s\tversion=0.1.0"
        % (sample_corpus.resource_id, CASE_INSENSITIVE)
    )
    assert len(lines) == 4
    assert lines[1].startswith("aspirin\tcancer\t2\t2\t1\t")
    assert lines[2] == "%s\t??\tx\tempty_term" % ERROR_ROW_PREFIX
    assert lines[3].startswith("therapy\tpain\t")


# -- standalone end to end ---------------------------------------------


def test_execute_job_standalone_report(tmp_path):
    resource = write_corpus_file(tmp_path / "r.tsv", SAMPLE_LINES)
    pair_path = tmp_path / "p.tsv"
    pair_path.write_text("aspirin\tcancer\nCancer\tAspirin\n", encoding="utf-8")
    out = tmp_path / "results.tsv"
    config = Config(str(resource), str(pair_path), str(out))
    report = execute_job(config)
    assert report.mode == MODE_STANDALONE
    assert report.tasks_total == 1
    assert report.tasks_executed == 1
    assert report.tasks_cached == 0
    assert report.degraded is False
    assert json.loads(json.dumps(report.as_dict()))["tasks_total"] == 1

    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    # Both spellings of the same task resolve, in input order.
    assert lines[1].split("\t")[:2] == ["aspirin", "cancer"]
    assert lines[2].split("\t")[:2] == ["Cancer", "Aspirin"]


def test_execute_job_store_intermediate(tmp_path):
    resource = write_corpus_file(tmp_path / "r.tsv", SAMPLE_LINES)
    pair_path = tmp_path / "p.tsv"
    pair_path.write_text("aspirin\tcancer\n", encoding="utf-8")
    out = tmp_path / "results.tsv"
    config = Config(str(resource), str(pair_path), str(out), store_intermediate=True)
    execute_job(config)
    cache = out.parent / (out.name + ".postings.tsv")
    text = cache.read_text(encoding="utf-8")
    assert text.startswith("# resource_id=")
    assert "aspirin\t" in text
