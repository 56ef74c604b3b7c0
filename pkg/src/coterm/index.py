"""Tokenization and a lazily materialized inverted index.

Tokens are maximal runs of Unicode letters and digits; everything else
separates.  The index answers per-term statistics (document frequency,
total occurrence count, matching document keys) but only pays one corpus
pass per batch of unseen terms instead of indexing the whole vocabulary
up front.  Multi-token terms match as contiguous token subsequences and
overlapping matches all count.
"""

from __future__ import annotations

import multiprocessing
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import re

from . import CASE_INSENSITIVE, CASE_MODES
from .corpus import Corpus
from .errors import EmptyTermError, FormatError

# Letters and digits only: \w minus the underscore.
TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Below this many documents a parallel scan costs more than it saves.
_SHARD_MIN_DOCS = 2048

CACHE_HEADER_PREFIX = "#"

# Shared state for forked scan workers: set by the parent just before the
# pool forks, read by children through inherited memory.  The module lock
# keeps two concurrent sharded scans from clobbering each other's records.
_SCAN_RECORDS: Optional[Sequence] = None
_SCAN_FORK_LOCK = threading.Lock()


def tokenize(text: str, case_mode: str) -> List[str]:
    """Token list for one text, case-folded first when insensitive."""
    if case_mode not in CASE_MODES:
        raise ValueError("unknown case mode %r" % case_mode)
    if case_mode == CASE_INSENSITIVE:
        text = text.lower()
    return TOKEN_RE.findall(text)


def normalize_term(term: str, case_mode: str) -> str:
    """Tokenize a term and rejoin with single spaces.

    Raises EmptyTermError when nothing survives tokenization.
    """
    tokens = tokenize(term, case_mode)
    if not tokens:
        raise EmptyTermError("term %r has no tokens" % term)
    return " ".join(tokens)


def unique_terms(pairs: Iterable) -> Set[str]:
    """Distinct normalized terms across both columns of a pair list.

    Each column is de-duplicated on its own, then the columns are merged
    and de-duplicated again.
    """
    col_a = list(dict.fromkeys(p.a for p in pairs))
    col_b = list(dict.fromkeys(p.b for p in pairs))
    merged = list(dict.fromkeys(col_a + col_b))
    return set(merged)


@dataclass
class PostingEntry:
    """Per-term statistics over one corpus.

    doc_keys is strictly ascending and duplicate-free; doc_freq is its
    length and term_freq counts every (possibly overlapping) occurrence.
    """

    term: str
    doc_freq: int
    term_freq: int
    doc_keys: List[str]


def _scan_forked(args) -> Tuple[Dict[str, int], Dict[str, List[int]]]:
    """Fork-pool entry point: records come from the inherited module global."""
    case_mode, singles, multi_first, start, end = args
    return _scan_range(_SCAN_RECORDS, case_mode, singles, multi_first, start, end)


def _scan_range(records, case_mode, singles, multi_first, start, end):
    """Scan a record range for the given terms.

    Positions in the result are global record ordinals, ascending within
    the range, so shard outputs concatenate in corpus order.
    """
    freqs: Dict[str, int] = {}
    positions: Dict[str, List[int]] = {}
    for pos in range(start, end):
        tokens = tokenize(records[pos].text, case_mode)
        hits: Dict[str, int] = {}
        for token in tokens:
            if token in singles:
                hits[token] = hits.get(token, 0) + 1
        if multi_first:
            for i, token in enumerate(tokens):
                patterns = multi_first.get(token)
                if not patterns:
                    continue
                for pattern, term in patterns:
                    if tuple(tokens[i : i + len(pattern)]) == pattern:
                        hits[term] = hits.get(term, 0) + 1
        for term, count in hits.items():
            freqs[term] = freqs.get(term, 0) + count
            positions.setdefault(term, []).append(pos)
    return freqs, positions


class InvertedIndex:
    """Posting entries for one corpus under one case mode, built on demand."""

    def __init__(self, corpus: Corpus, case_mode: str):
        if case_mode not in CASE_MODES:
            raise ValueError("unknown case mode %r" % case_mode)
        self.corpus = corpus
        self.case_mode = case_mode
        self._entries: Dict[str, PostingEntry] = {}
        self._lock = threading.Lock()

    @property
    def resource_id(self) -> str:
        return self.corpus.resource_id

    @property
    def n_docs(self) -> int:
        return self.corpus.n_docs

    def known_terms(self) -> Set[str]:
        with self._lock:
            return set(self._entries)

    def materialize(self, terms: Iterable[str], workers: int = 1) -> None:
        """Ensure posting entries exist for every given normalized term.

        Unseen terms are gathered and resolved with a single pass over the
        corpus, sharded across forked workers when the corpus is large
        enough and workers > 1.
        """
        with self._lock:
            missing = sorted(t for t in set(terms) if t not in self._entries)
            if not missing:
                return
            for term in missing:
                if term == "":
                    raise EmptyTermError("empty term in batch")
            singles = frozenset(t for t in missing if " " not in t)
            multi_first: Dict[str, List[Tuple[tuple, str]]] = {}
            for term in missing:
                if " " in term:
                    pattern = tuple(term.split(" "))
                    multi_first.setdefault(pattern[0], []).append((pattern, term))

            records = self.corpus.records
            n = len(records)
            if workers <= 1 or n < _SHARD_MIN_DOCS:
                results = [_scan_range(records, self.case_mode, singles, multi_first, 0, n)]
            else:
                results = _scan_sharded(records, self.case_mode, singles, multi_first, workers)

            keys = self.corpus.keys()
            for term in missing:
                freq = 0
                doc_keys: List[str] = []
                for shard_freqs, shard_positions in results:
                    freq += shard_freqs.get(term, 0)
                    doc_keys.extend(keys[p] for p in shard_positions.get(term, ()))
                doc_keys.sort()
                self._entries[term] = PostingEntry(term, len(doc_keys), freq, doc_keys)

    def term_stats(self, term: str, workers: int = 1) -> PostingEntry:
        """Posting entry for one term, normalizing it first.

        Terms absent from the corpus yield an entry with zero counts.
        """
        normalized = normalize_term(term, self.case_mode)
        self.materialize([normalized], workers=workers)
        with self._lock:
            return self._entries[normalized]

    def entry(self, normalized_term: str) -> PostingEntry:
        """Posting entry for an already materialized normalized term."""
        with self._lock:
            return self._entries[normalized_term]

    def save_cache(self, path) -> None:
        """Write materialized entries as a tab-separated cache file.

        Line format is ``term<TAB>term_freq<TAB>doc_key,doc_key,...`` after
        a header that records the resource identity.  Document keys must
        not contain commas or the list column would be ambiguous.
        """
        with self._lock:
            entries = sorted(self._entries.values(), key=lambda e: e.term)
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(
                "%s resource_id=%s\tcase_mode=%s\n"
                % (CACHE_HEADER_PREFIX, self.resource_id, self.case_mode)
            )
            for entry in entries:
                for key in entry.doc_keys:
                    if "," in key:
                        raise FormatError("doc key %r contains a comma" % key)
                handle.write(
                    "%s\t%d\t%s\n" % (entry.term, entry.term_freq, ",".join(entry.doc_keys))
                )

    @classmethod
    def load_cache(cls, path, corpus: Corpus, case_mode: str) -> "InvertedIndex":
        """Rebuild an index from a cache file written by save_cache.

        The header identity must match the corpus and case mode at hand;
        a cache written for different bytes must never be reused.
        """
        index = cls(corpus, case_mode)
        with open(path, "r", encoding="utf-8") as handle:
            header = handle.readline().rstrip("\n")
            expected = "%s resource_id=%s\tcase_mode=%s" % (
                CACHE_HEADER_PREFIX,
                corpus.resource_id,
                case_mode,
            )
            if header != expected:
                raise FormatError("cache header mismatch: %r" % header)
            for line_no, line in enumerate(handle, start=2):
                line = line.rstrip("\n")
                if not line or line.startswith(CACHE_HEADER_PREFIX):
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise FormatError("expected 3 tab-separated fields", line_no)
                term, freq_text, keys_text = fields
                try:
                    freq = int(freq_text)
                except ValueError:
                    raise FormatError("bad term_freq %r" % freq_text, line_no) from None
                doc_keys = keys_text.split(",") if keys_text else []
                index._entries[term] = PostingEntry(term, len(doc_keys), freq, doc_keys)
        return index


def _scan_sharded(records, case_mode, singles, multi_first, workers):
    """Fan one corpus pass out over forked workers, one contiguous shard each."""
    global _SCAN_RECORDS
    n = len(records)
    workers = min(workers, n)
    bounds = [(n * i) // workers for i in range(workers + 1)]
    jobs = [
        (case_mode, singles, multi_first, bounds[i], bounds[i + 1])
        for i in range(workers)
        if bounds[i] < bounds[i + 1]
    ]
    with _SCAN_FORK_LOCK:
        _SCAN_RECORDS = records
        try:
            context = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=len(jobs), mp_context=context) as pool:
                return list(pool.map(_scan_forked, jobs))
        finally:
            _SCAN_RECORDS = None
