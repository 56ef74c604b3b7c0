"""Benchmark harness: the indexed batch path against a naive full scan.

The naive mode re-reads every document for every pair with its own
counting loop, sharing only the tokenizer, so agreement between the two
modes is a genuine cross-check and the timing gap measures what the
index buys.
"""

from __future__ import annotations

import logging
import multiprocessing
import threading
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .cooccur import PairOutcome, CooccurrenceResult, ERROR_EMPTY_TERM, run_job_local
from .corpus import Corpus
from .errors import CotermError, EmptyTermError
from .index import normalize_term, tokenize

logger = logging.getLogger(__name__)

MODE_INDEXED = "indexed"
MODE_NAIVE = "naive"

BENCH_COLUMNS = ("mode", "workers", "n_docs", "n_pairs", "wall_time_seconds")

# Fork-shared corpus for naive workers, guarded the same way the index
# module guards its scan records.
_NAIVE_CORPUS: Optional[Corpus] = None
_NAIVE_LOCK = threading.Lock()


class BenchMismatchError(CotermError):
    """The two modes disagreed on at least one result value."""


@dataclass
class BenchmarkRow:
    """One timed run of one mode at one worker count."""

    mode: str
    workers: int
    n_docs: int
    n_pairs: int
    wall_time_seconds: float

    def tsv(self) -> str:
        return "%s\t%d\t%d\t%d\t%.4f" % (
            self.mode,
            self.workers,
            self.n_docs,
            self.n_pairs,
            self.wall_time_seconds,
        )


def _count_runs(tokens: List[str], pattern: List[str]) -> int:
    """Occurrences of pattern as a contiguous run, overlaps included."""
    size = len(pattern)
    if size == 0 or size > len(tokens):
        return 0
    count = 0
    for i in range(len(tokens) - size + 1):
        if tokens[i : i + size] == pattern:
            count += 1
    return count


def naive_pair_counts(corpus: Corpus, raw_a: str, raw_b: str, case_mode: str) -> CooccurrenceResult:
    """Count one pair by scanning every document, no index involved."""
    norm_a = normalize_term(raw_a, case_mode)
    norm_b = normalize_term(raw_b, case_mode)
    pattern_a = norm_a.split(" ")
    pattern_b = norm_b.split(" ")
    n_a = n_b = n_ab = tf_a = tf_b = 0
    shared: List[str] = []
    for record in corpus.records:
        tokens = tokenize(record.text, case_mode)
        hits_a = _count_runs(tokens, pattern_a)
        hits_b = hits_a if norm_b == norm_a else _count_runs(tokens, pattern_b)
        tf_a += hits_a
        tf_b += hits_b
        if hits_a:
            n_a += 1
        if hits_b:
            n_b += 1
        if hits_a and hits_b:
            n_ab += 1
            shared.append(record.key)
    union = n_a + n_b - n_ab
    return CooccurrenceResult(
        term_a=norm_a,
        term_b=norm_b,
        n_a=n_a,
        n_b=n_b,
        n_ab=n_ab,
        tf_a=tf_a,
        tf_b=tf_b,
        n_docs=corpus.n_docs,
        jaccard=(n_ab / union) if union else 0.0,
        co_keys=sorted(shared),
    )


def _naive_chunk(args) -> List[Tuple[int, Optional[dict], Optional[str]]]:
    case_mode, chunk = args
    corpus = _NAIVE_CORPUS
    out = []
    for position, raw_a, raw_b in chunk:
        try:
            result = naive_pair_counts(corpus, raw_a, raw_b, case_mode)
        except EmptyTermError:
            out.append((position, None, ERROR_EMPTY_TERM))
            continue
        out.append(
            (
                position,
                {
                    "term_a": result.term_a,
                    "term_b": result.term_b,
                    "n_a": result.n_a,
                    "n_b": result.n_b,
                    "n_ab": result.n_ab,
                    "tf_a": result.tf_a,
                    "tf_b": result.tf_b,
                    "n_docs": result.n_docs,
                    "jaccard": result.jaccard,
                },
                None,
            )
        )
    return out


def run_naive(
    corpus: Corpus,
    raw_pairs: Sequence[Tuple[str, str]],
    case_mode: str,
    workers: int = 1,
) -> List[PairOutcome]:
    """Answer every pair by full scans, fanned out over forked workers."""
    global _NAIVE_CORPUS
    jobs = [(i, a, b) for i, (a, b) in enumerate(raw_pairs)]
    outcomes: List[Optional[PairOutcome]] = [None] * len(jobs)

    def absorb(batch):
        for position, values, error in batch:
            raw_a, raw_b = raw_pairs[position]
            if error is not None:
                outcomes[position] = PairOutcome(raw_a, raw_b, error=error)
            else:
                outcomes[position] = PairOutcome(
                    raw_a, raw_b, result=CooccurrenceResult(**values)
                )

    with _NAIVE_LOCK:
        _NAIVE_CORPUS = corpus
        try:
            if workers <= 1 or len(jobs) <= 1:
                absorb(_naive_chunk((case_mode, jobs)))
            else:
                chunks = [c for c in (jobs[i::workers] for i in range(workers)) if c]
                context = multiprocessing.get_context("fork")
                with ProcessPoolExecutor(max_workers=len(chunks), mp_context=context) as pool:
                    for batch in pool.map(_naive_chunk, [(case_mode, c) for c in chunks]):
                        absorb(batch)
        finally:
            _NAIVE_CORPUS = None
    return outcomes


def _values(outcome: PairOutcome) -> Optional[tuple]:
    if outcome.error is not None:
        return None
    r = outcome.result
    return (r.n_a, r.n_b, r.n_ab, r.tf_a, r.tf_b, r.n_docs, round(r.jaccard, 12))


def check_agreement(indexed: Sequence[PairOutcome], naive: Sequence[PairOutcome]):
    """Both modes must agree row for row before any timing is reported."""
    if len(indexed) != len(naive):
        raise BenchMismatchError(
            "row count differs: %d vs %d" % (len(indexed), len(naive))
        )
    for position, (left, right) in enumerate(zip(indexed, naive)):
        if left.error != right.error or _values(left) != _values(right):
            raise BenchMismatchError(
                "row %d differs: indexed=%r naive=%r"
                % (position, _values(left), _values(right))
            )


def run_benchmark(
    corpus: Corpus,
    raw_pairs: Sequence[Tuple[str, str]],
    case_mode: str,
    workers_list: Sequence[int],
    modes: Sequence[str] = (MODE_INDEXED, MODE_NAIVE),
) -> List[BenchmarkRow]:
    """Time every requested mode at every worker count.

    The two modes are cross-checked for identical values at each worker
    count before their rows are returned.
    """
    rows: List[BenchmarkRow] = []
    for workers in workers_list:
        outcomes: Dict[str, List[PairOutcome]] = {}
        for mode in modes:
            started = time.perf_counter()
            if mode == MODE_INDEXED:
                outcomes[mode] = run_job_local(corpus, raw_pairs, case_mode, workers=workers)
            elif mode == MODE_NAIVE:
                outcomes[mode] = run_naive(corpus, raw_pairs, case_mode, workers=workers)
            else:
                raise CotermError("unknown bench mode %r" % mode)
            wall = time.perf_counter() - started
            rows.append(
                BenchmarkRow(
                    mode=mode,
                    workers=workers,
                    n_docs=corpus.n_docs,
                    n_pairs=len(raw_pairs),
                    wall_time_seconds=wall,
                )
            )
            logger.info("bench %s workers=%d: %.3fs", mode, workers, wall)
        if MODE_INDEXED in outcomes and MODE_NAIVE in outcomes:
            check_agreement(outcomes[MODE_INDEXED], outcomes[MODE_NAIVE])
    return rows
