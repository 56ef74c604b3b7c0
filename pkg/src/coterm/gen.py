"""Deterministic synthetic corpora for benchmarks and simulations.

Documents draw their words from a Zipf-weighted vocabulary with a seeded
generator, so the same parameters always produce byte-identical files.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import List, Tuple

from .errors import ScenarioError

_DOC_LEN_RANGE = (8, 16)
_ZIPF_EXPONENT = 1.1


def vocabulary(vocab_size: int) -> List[str]:
    """Rank-ordered synthetic word list: w0000 is the most frequent."""
    if vocab_size < 1:
        raise ScenarioError("vocab_size must be >= 1")
    width = max(4, len(str(vocab_size - 1)))
    return ["w%0*d" % (width, i) for i in range(vocab_size)]


def generate_corpus(
    path,
    n_docs: int,
    vocab_size: int,
    seed: int,
    doc_len_range: Tuple[int, int] = _DOC_LEN_RANGE,
) -> List[str]:
    """Write a resource file of n_docs synthetic documents; returns the vocabulary.

    Word ranks follow a Zipf law so a few words dominate, as term
    frequencies do in real text.  Same arguments, same bytes.
    """
    if n_docs < 1:
        raise ScenarioError("n_docs must be >= 1")
    vocab = vocabulary(vocab_size)
    low, high = doc_len_range
    if low < 1 or high < low:
        raise ScenarioError("doc_len_range must satisfy 1 <= low <= high")

    rng = random.Random(seed)
    weights = [1.0 / (rank + 1) ** _ZIPF_EXPONENT for rank in range(vocab_size)]
    cumulative = []
    running = 0.0
    for weight in weights:
        running += weight
        cumulative.append(running)

    key_width = max(7, len(str(n_docs - 1)))
    lines = []
    for i in range(n_docs):
        length = rng.randint(low, high)
        words = rng.choices(vocab, cum_weights=cumulative, k=length)
        lines.append("d%0*d\t%s\n" % (key_width, i, " ".join(words)))
    Path(path).write_bytes("".join(lines).encode("utf-8"))
    return vocab


def sample_pairs(vocab: List[str], n_pairs: int, seed: int) -> List[Tuple[str, str]]:
    """Distinct term pairs drawn from a vocabulary with a seeded generator."""
    if n_pairs < 0:
        raise ScenarioError("n_pairs must be >= 0")
    max_pairs = len(vocab) * (len(vocab) - 1) // 2
    if n_pairs > max_pairs:
        raise ScenarioError(
            "cannot draw %d distinct pairs from %d terms" % (n_pairs, len(vocab))
        )
    rng = random.Random(seed)
    seen = set()
    pairs: List[Tuple[str, str]] = []
    while len(pairs) < n_pairs:
        a, b = rng.sample(vocab, 2)
        key = (a, b) if a < b else (b, a)
        if key in seen:
            continue
        seen.add(key)
        pairs.append((a, b))
    return pairs
