import random
import sys
from pathlib import Path
from typing import Dict, List, Tuple

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coterm.corpus import load_resource

# The three-document corpus used across the unit tests.  Hand counts:
# aspirin in {d1, d2}, cancer in {d2, d3}, shared {d2},
# so jaccard(aspirin, cancer) = 1 / (2 + 2 - 1) = 1/3.
SAMPLE_LINES = "d1\taspirin reduces pain\nd2\taspirin linked to cancer\nd3\tcancer therapy\n"


def write_corpus_file(path: Path, lines: str) -> Path:
    path.write_bytes(lines.encode("utf-8"))
    return path


@pytest.fixture
def sample_path(tmp_path) -> Path:
    return write_corpus_file(tmp_path / "sample.tsv", SAMPLE_LINES)


@pytest.fixture
def sample_corpus(sample_path):
    return load_resource(sample_path)


def make_random_records(
    rng: random.Random, n_docs: int, vocab_size: int
) -> List[Tuple[str, str]]:
    """Random documents that stress the tokenizer: mixed case, punctuation."""
    vocab = ["term%03d" % i for i in range(vocab_size)]
    separators = [" ", " ", " ", "-", ", ", "; ", " (", ") "]
    records = []
    for i in range(n_docs):
        words = []
        for _ in range(rng.randint(3, 20)):
            word = rng.choice(vocab)
            if rng.random() < 0.25:
                word = word.upper() if rng.random() < 0.5 else word.capitalize()
            words.append(word)
        text = words[0]
        for word in words[1:]:
            text += rng.choice(separators) + word
        records.append(("doc%04d" % i, text))
    return records


def records_to_lines(records: List[Tuple[str, str]]) -> str:
    return "".join("%s\t%s\n" % (key, text) for key, text in records)


def make_random_pairs(
    rng: random.Random, records: List[Tuple[str, str]], n_pairs: int
) -> List[Tuple[str, str]]:
    """Raw pairs mixing single tokens, phrases, case noise, and junk."""
    words = sorted({w for _, text in records for w in text.lower().split(" ")})
    words = [w.strip("(),;-") for w in words]
    words = [w for w in words if w]
    pairs = []
    for _ in range(n_pairs):
        terms = []
        for _ in range(2):
            roll = rng.random()
            if roll < 0.08:
                terms.append(rng.choice(["", "  ", "-", "_", "!!"]))
            elif roll < 0.30:
                terms.append("%s %s" % (rng.choice(words), rng.choice(words)))
            else:
                word = rng.choice(words)
                if rng.random() < 0.3:
                    word = word.upper()
                if rng.random() < 0.2:
                    word = "%s-" % word
                terms.append(word)
        pairs.append((terms[0], terms[1]))
    return pairs


def corpus_and_oracle(tmp_path: Path, rng: random.Random, case_mode: str, n_docs: int, vocab: int):
    from oracle import OracleCorpus

    records = make_random_records(rng, n_docs, vocab)
    path = write_corpus_file(tmp_path / "random.tsv", records_to_lines(records))
    return load_resource(path), OracleCorpus(records, case_mode)


def result_fields(outcome) -> Dict:
    """PairOutcome squeezed into the oracle's comparison shape."""
    if outcome.error is not None:
        return {"error": outcome.error}
    r = outcome.result
    return {
        "error": None,
        "n_a": r.n_a,
        "n_b": r.n_b,
        "n_ab": r.n_ab,
        "tf_a": r.tf_a,
        "tf_b": r.tf_b,
        "n_docs": r.n_docs,
        "jaccard": r.jaccard,
    }
