"""n-gram counting and longest-common-subsequence helpers."""

from __future__ import annotations

from collections import Counter


def ngram_counts(tokens: list[str], n: int) -> Counter:
    """Counts of n-grams (as tuples) of one order."""
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def all_ngram_counts(tokens: list[str], max_n: int = 4) -> Counter:
    """Counts of every n-gram of orders 1..max_n, mixed in one Counter."""
    counts: Counter = Counter()
    for n in range(1, max_n + 1):
        counts.update(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return counts


def lcs_length(a: list[str], b: list[str]) -> int:
    """Length of the longest common subsequence (O(len(a)*len(b)))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(cur[j - 1], prev[j]))
        prev = cur
    return prev[-1]
