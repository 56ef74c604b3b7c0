"""Line-oriented text resources and their identity.

A resource file holds one document per line as ``key<TAB>text`` encoded in
UTF-8.  The identity of a resource is the MD5 digest of its bytes, so two
clusters holding byte-identical files agree on what they are searching
without shipping the file anywhere.  Splitting documents into sentences
produces a new resource with derived keys and a freshly computed identity.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, List

from .errors import EncodingError, FormatError

GRANULARITY_ABSTRACT = "abstract"
GRANULARITY_SENTENCE = "sentence"

_FINGERPRINT_CHUNK = 1 << 16

_TERMINATORS = ".!?"

# Trailing-dot abbreviations that do not end a sentence even when followed
# by whitespace and a capital or digit.  Compared lowercase, final dot
# stripped; "et al" is matched as a two-token unit.
_ABBREVIATIONS = frozenset(
    [
        "e.g",
        "i.e",
        "et al",
        "etc",
        "cf",
        "vs",
        "fig",
        "figs",
        "eq",
        "eqs",
        "dr",
        "mr",
        "mrs",
        "ms",
        "prof",
        "st",
    ]
)


@dataclass(frozen=True)
class Record:
    """One document: a unique key and its text."""

    key: str
    text: str


@dataclass
class Corpus:
    """A parsed resource: identity, granularity, and documents in file order."""

    resource_id: str
    granularity: str
    records: List[Record]

    @property
    def n_docs(self) -> int:
        return len(self.records)

    def keys(self) -> List[str]:
        return [r.key for r in self.records]


def resource_fingerprint(path) -> str:
    """MD5 of the file bytes as 32 lowercase hex digits, streamed."""
    digest = hashlib.md5()
    with open(path, "rb") as handle:
        while True:
            chunk = handle.read(_FINGERPRINT_CHUNK)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def _parse_lines(data: str) -> List[Record]:
    records = []
    seen = set()
    lines = data.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for line_no, line in enumerate(lines, start=1):
        if line.endswith("\r"):
            line = line[:-1]
        if line == "":
            continue
        if "\t" not in line:
            raise FormatError("expected key<TAB>text", line_no)
        key, text = line.split("\t", 1)
        if key == "":
            raise FormatError("empty document key", line_no)
        if key in seen:
            raise FormatError("duplicate document key %r" % key, line_no)
        seen.add(key)
        records.append(Record(key, text))
    return records


def load_resource(path, granularity: str = GRANULARITY_ABSTRACT) -> Corpus:
    """Parse a resource file and stamp it with its fingerprint.

    Blank lines are skipped.  A line without a tab, an empty key, or a
    repeated key raises FormatError with the offending line number; bytes
    that are not UTF-8 raise EncodingError.
    """
    with open(path, "rb") as handle:
        data = handle.read()
    resource_id = hashlib.md5(data).hexdigest()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError("resource is not valid UTF-8: %s" % exc) from None
    records = _parse_lines(text)
    if not records:
        raise FormatError("resource contains no documents")
    return Corpus(resource_id=resource_id, granularity=granularity, records=records)


def serialize_corpus(corpus: Corpus) -> bytes:
    """Render records back to resource-file bytes, one line per document."""
    parts = ["%s\t%s\n" % (r.key, r.text) for r in corpus.records]
    return "".join(parts).encode("utf-8")


def corpus_from_records(records: Iterable[Record], granularity: str = GRANULARITY_ABSTRACT) -> Corpus:
    """Build a corpus directly from records, fingerprinting the serialized form."""
    records = list(records)
    body = "".join("%s\t%s\n" % (r.key, r.text) for r in records).encode("utf-8")
    return Corpus(
        resource_id=hashlib.md5(body).hexdigest(),
        granularity=granularity,
        records=records,
    )


def _token_before(text: str, pos: int) -> tuple[str, str]:
    """The whitespace-delimited chunks just before pos, (previous, last)."""
    end = pos
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    last = text[start:end]
    pend = start
    while pend > 0 and text[pend - 1].isspace():
        pend -= 1
    pstart = pend
    while pstart > 0 and not text[pstart - 1].isspace():
        pstart -= 1
    return text[pstart:pend], last


def _strip_leading_punct(chunk: str) -> str:
    while chunk and not chunk[0].isalnum():
        chunk = chunk[1:]
    return chunk


def _suppressed_by_abbreviation(text: str, pos: int) -> bool:
    prev, last = _token_before(text, pos)
    last = _strip_leading_punct(last)
    # Single capitals are initials ("John F. Kennedy"), not sentence ends.
    if len(last) == 1 and last.isalpha() and last.isupper():
        return True
    low = last.lower()
    if low in _ABBREVIATIONS:
        return True
    prev = _strip_leading_punct(prev).rstrip(".").lower()
    if prev and "%s %s" % (prev, low) in _ABBREVIATIONS:
        return True
    return False


def split_sentences(text: str) -> List[str]:
    """Split one document body into sentences.

    A sentence ends after '.', '!' or '?' when whitespace and then an
    uppercase letter or digit follow, unless the token before the
    terminator is a single capital letter or a known abbreviation.
    """
    out = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _TERMINATORS:
            j = i + 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            if k > j and k < n and (text[k].isupper() or text[k].isdigit()):
                if not _suppressed_by_abbreviation(text, i):
                    piece = text[start:j].strip()
                    if piece:
                        out.append(piece)
                    start = k
                    i = k
                    continue
        i += 1
    tail = text[start:].strip()
    if tail:
        out.append(tail)
    return out


def sentence_split(corpus: Corpus) -> Corpus:
    """Re-key a corpus at sentence granularity.

    Sentence keys are ``<document key>.<ordinal>`` with ordinals starting
    at 1.  Documents that yield no sentences are dropped.  The returned
    corpus carries a fresh resource_id computed from its own serialized
    form, since it is a different body of text than the source.
    """
    records = []
    for record in corpus.records:
        for ordinal, sentence in enumerate(split_sentences(record.text), start=1):
            records.append(Record("%s.%d" % (record.key, ordinal), sentence))
    if not records:
        raise FormatError("sentence split produced no documents")
    return corpus_from_records(records, granularity=GRANULARITY_SENTENCE)
