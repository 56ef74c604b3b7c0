"""Co-occurring term search over line-oriented corpora.

The package has two halves.  The search half turns a resource file (one
document per line) into an inverted index and answers batched term and
term-pair queries with document counts, occurrence counts, and a Jaccard
significance score.  The scheduling half lets independent clusters working
on the same resource share results through a small HTTP service so that
identical tasks are computed once globally instead of once per cluster.
"""

__version__ = "0.1.0"

CASE_SENSITIVE = "sensitive"
CASE_INSENSITIVE = "insensitive"
CASE_MODES = (CASE_SENSITIVE, CASE_INSENSITIVE)
