"""Co-occurrence counting over paired terms.

A pair query asks how often two terms appear in the same document.  The
batch planner groups pairs by whichever input column repeats its terms
more, so each repeated term's postings are fetched once and intersected
against every partner.  Significance is the Jaccard ratio of the two
document sets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import EmptyTermError, InvalidCountsError
from .index import InvertedIndex, PostingEntry, normalize_term, unique_terms

logger = logging.getLogger(__name__)

ERROR_EMPTY_TERM = "empty_term"

# Shared document keys above this count are dropped from results unless a
# caller raises the limit; the counts themselves are always kept.
DEFAULT_CO_KEYS_LIMIT = 10000


@dataclass(frozen=True)
class PairedTerm:
    """Two normalized terms in input-column order."""

    a: str
    b: str

    @property
    def canonical_key(self) -> str:
        """Order-independent identity: the terms sorted, tab-joined."""
        first, second = sorted((self.a, self.b))
        return "%s\t%s" % (first, second)


@dataclass
class CooccurrenceResult:
    """Counts for one term pair over one corpus.

    n_a and n_b are document frequencies, n_ab the number of documents
    containing both, tf_a and tf_b total occurrence counts.  co_keys holds
    the shared document keys when retained, None when dropped.
    """

    term_a: str
    term_b: str
    n_a: int
    n_b: int
    n_ab: int
    tf_a: int
    tf_b: int
    n_docs: int
    jaccard: float
    co_keys: Optional[List[str]] = None


@dataclass
class PairGroups:
    """A batch plan: pairs grouped under the terms of one column."""

    group_column: int
    groups: Dict[str, List[PairedTerm]]


@dataclass
class PairOutcome:
    """Per-input-row outcome: a result or an error code, never both."""

    raw_a: str
    raw_b: str
    result: Optional[CooccurrenceResult] = None
    error: Optional[str] = None


def duplication_score(pairs: Sequence[PairedTerm], column: int) -> int:
    """How many postings fetches grouping by this column would save."""
    terms = {p.a for p in pairs} if column == 0 else {p.b for p in pairs}
    return len(pairs) - len(terms)


def group_pairs(pairs: Sequence[PairedTerm], force_column: Optional[int] = None) -> PairGroups:
    """Group pairs under the more-duplicated column; ties keep the first.

    force_column overrides the choice, which must not change any counts,
    only the traversal order.
    """
    if force_column is not None:
        column = force_column
    else:
        score_a = duplication_score(pairs, 0)
        score_b = duplication_score(pairs, 1)
        column = 1 if score_b > score_a else 0
    groups: Dict[str, List[PairedTerm]] = {}
    for pair in pairs:
        term = pair.a if column == 0 else pair.b
        groups.setdefault(term, []).append(pair)
    return PairGroups(group_column=column, groups=groups)


def intersect_postings(left: PostingEntry, right: PostingEntry) -> Tuple[int, List[str]]:
    """Linear merge of two sorted key lists: shared count and shared keys."""
    keys_a = left.doc_keys
    keys_b = right.doc_keys
    i = j = 0
    shared: List[str] = []
    while i < len(keys_a) and j < len(keys_b):
        ka = keys_a[i]
        kb = keys_b[j]
        if ka == kb:
            shared.append(ka)
            i += 1
            j += 1
        elif ka < kb:
            i += 1
        else:
            j += 1
    return len(shared), shared


def jaccard(n_a: int, n_b: int, n_ab: int) -> float:
    """Jaccard significance n_ab / (n_a + n_b - n_ab).

    Zero when both document counts are zero; counts where the overlap
    exceeds either side are rejected.
    """
    if n_ab > min(n_a, n_b):
        raise InvalidCountsError(
            "n_ab=%d exceeds min(n_a=%d, n_b=%d)" % (n_ab, n_a, n_b)
        )
    union = n_a + n_b - n_ab
    if union == 0:
        return 0.0
    return n_ab / union


def pair_counts(
    index: InvertedIndex,
    pair: PairedTerm,
    co_keys_limit: int = DEFAULT_CO_KEYS_LIMIT,
) -> CooccurrenceResult:
    """Counts for one pair from already materialized postings."""
    entry_a = index.entry(pair.a)
    entry_b = index.entry(pair.b)
    n_ab, shared = intersect_postings(entry_a, entry_b)
    keep = shared if n_ab <= co_keys_limit else None
    return CooccurrenceResult(
        term_a=pair.a,
        term_b=pair.b,
        n_a=entry_a.doc_freq,
        n_b=entry_b.doc_freq,
        n_ab=n_ab,
        tf_a=entry_a.term_freq,
        tf_b=entry_b.term_freq,
        n_docs=index.n_docs,
        jaccard=jaccard(entry_a.doc_freq, entry_b.doc_freq, n_ab),
        co_keys=keep,
    )


def run_job_local(
    corpus,
    raw_pairs: Sequence[Tuple[str, str]],
    case_mode: str,
    workers: int = 1,
    co_keys_limit: int = DEFAULT_CO_KEYS_LIMIT,
    force_column: Optional[int] = None,
    index: Optional[InvertedIndex] = None,
) -> List[PairOutcome]:
    """Answer every pair in one batch against a local index.

    Postings for all distinct terms are materialized with a single corpus
    pass, then pairs are traversed group by group.  Pairs whose terms
    normalize to nothing become per-pair error records instead of failing
    the batch.  The returned list parallels the input order.
    """
    if index is None:
        index = InvertedIndex(corpus, case_mode)

    outcomes: List[PairOutcome] = []
    normalized: List[Optional[PairedTerm]] = []
    for raw_a, raw_b in raw_pairs:
        try:
            pair = PairedTerm(
                normalize_term(raw_a, case_mode), normalize_term(raw_b, case_mode)
            )
        except EmptyTermError:
            outcomes.append(PairOutcome(raw_a, raw_b, error=ERROR_EMPTY_TERM))
            normalized.append(None)
            continue
        outcomes.append(PairOutcome(raw_a, raw_b))
        normalized.append(pair)

    valid = [p for p in normalized if p is not None]
    if not valid:
        return outcomes

    index.materialize(unique_terms(valid), workers=workers)

    # Distinct pairs are computed once even when the input repeats them.
    distinct: Dict[str, PairedTerm] = {}
    for pair in valid:
        distinct.setdefault(pair.canonical_key, pair)
    plan = group_pairs(list(distinct.values()), force_column=force_column)
    logger.debug(
        "batch of %d pairs grouped by column %d into %d groups",
        len(distinct),
        plan.group_column,
        len(plan.groups),
    )

    by_key: Dict[str, CooccurrenceResult] = {}
    for pairs in plan.groups.values():
        for pair in pairs:
            by_key[pair.canonical_key] = pair_counts(index, pair, co_keys_limit)

    for outcome, pair in zip(outcomes, normalized):
        if pair is None:
            continue
        base = by_key[pair.canonical_key]
        outcome.result = _orient(base, pair)
    return outcomes


def _orient(base: CooccurrenceResult, pair: PairedTerm) -> CooccurrenceResult:
    """Re-express a computed result in the orientation of one input row."""
    swap = not (base.term_a == pair.a and base.term_b == pair.b)
    return CooccurrenceResult(
        term_a=pair.a,
        term_b=pair.b,
        n_a=base.n_b if swap else base.n_a,
        n_b=base.n_a if swap else base.n_b,
        n_ab=base.n_ab,
        tf_a=base.tf_b if swap else base.tf_a,
        tf_b=base.tf_a if swap else base.tf_b,
        n_docs=base.n_docs,
        jaccard=base.jaccard,
        co_keys=list(base.co_keys) if base.co_keys is not None else None,
    )
