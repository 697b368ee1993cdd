"""Multi-reference metrics: BLEU-n, ROUGE-L, CIDEr, METEOR-lite.

BLEU, ROUGE-L, and CIDEr follow the conventions of the evaluation script
in common use for this task (corpus-level BLEU with closest-reference
length and epsilon smoothing; ROUGE-L with beta=1.2 taking max precision
and max recall over references; CIDEr with corpus idf, count-clipped
tf-idf cosine over n=1..4, a length gaussian with sigma=6, scaled by 10).
METEOR-lite is this package's approximation of METEOR: exact plus
stemmed unigram matching, no synonym or paraphrase tables.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .ngram import lcs_length, ngram_counts
from .stemmer import stem


@dataclass
class EvalInstance:
    """One hypothesis story with its reference stories (token lists)."""

    hypothesis: list[str]
    references: list[list[str]]

    def __post_init__(self):
        if not self.references:
            raise ValueError("EvalInstance needs at least one reference")


# ---------------------------------------------------------------------------
# BLEU

_TINY = 1e-15
_SMALL = 1e-9


def bleu(instances: list[EvalInstance], n: int = 4) -> float:
    """Corpus-level BLEU-n with clipped precision and brevity penalty."""
    if not 1 <= n <= 4:
        raise ValueError(f"BLEU order must be in 1..4, got {n}")
    if not instances:
        raise ValueError("BLEU needs at least one instance")
    correct = [0] * n
    guess = [0] * n
    test_len = 0
    ref_len = 0
    for inst in instances:
        hyp = inst.hypothesis
        test_len += len(hyp)
        # closest reference length; ties go to the shorter reference
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in inst.references)[1]
        for k in range(1, n + 1):
            hyp_counts = ngram_counts(hyp, k)
            max_ref: Counter = Counter()
            for ref in inst.references:
                for gram, c in ngram_counts(ref, k).items():
                    if c > max_ref[gram]:
                        max_ref[gram] = c
            correct[k - 1] += sum(min(c, max_ref[g]) for g, c in hyp_counts.items())
            guess[k - 1] += max(0, len(hyp) - k + 1)
    value = 1.0
    for k in range(n):
        value *= (correct[k] + _TINY) / (guess[k] + _SMALL)
    score = value ** (1.0 / n)
    ratio = (test_len + _TINY) / (ref_len + _SMALL)
    if ratio < 1.0:
        score *= math.exp(1.0 - 1.0 / ratio)
    return score


# ---------------------------------------------------------------------------
# ROUGE-L

_ROUGE_BETA = 1.2


def rouge_l(instances: list[EvalInstance]) -> float:
    """LCS F-measure (beta=1.2), max P and max R over references, averaged."""
    if not instances:
        raise ValueError("ROUGE-L needs at least one instance")
    total = 0.0
    for inst in instances:
        hyp = inst.hypothesis
        if not hyp:
            continue
        precs = []
        recs = []
        for ref in inst.references:
            lcs = lcs_length(ref, hyp)
            precs.append(lcs / len(hyp))
            recs.append(lcs / len(ref) if ref else 0.0)
        p, r = max(precs), max(recs)
        if p != 0 and r != 0:
            b2 = _ROUGE_BETA ** 2
            total += (1 + b2) * p * r / (r + b2 * p)
    return total / len(instances)


# ---------------------------------------------------------------------------
# CIDEr

_CIDER_N = 4
_CIDER_SIGMA = 6.0


def cider(instances: list[EvalInstance]) -> float:
    """Consensus tf-idf n-gram cosine over n=1..4, scaled to [0, 10].

    idf comes from the reference corpus of the evaluation set; a
    single-instance corpus makes every idf zero, so a degeneracy warning
    is emitted.
    """
    if not instances:
        raise ValueError("CIDEr needs at least one instance")
    if len(instances) < 2:
        warnings.warn("CIDEr idf is degenerate with fewer than 2 instances",
                      stacklevel=2)
    # document frequency: one count per instance whose references contain the gram
    df: dict = defaultdict(float)
    for inst in instances:
        grams = set()
        for ref in inst.references:
            for k in range(1, _CIDER_N + 1):
                grams.update(ngram_counts(ref, k))
        for g in grams:
            df[g] += 1.0
    log_corpus = math.log(float(len(instances)))

    def tfidf_vec(tokens):
        vec = [defaultdict(float) for _ in range(_CIDER_N)]
        norm = [0.0] * _CIDER_N
        for k in range(1, _CIDER_N + 1):
            for gram, tf in ngram_counts(tokens, k).items():
                w = tf * (log_corpus - math.log(max(1.0, df[gram])))
                vec[k - 1][gram] = w
                norm[k - 1] += w * w
        return vec, [math.sqrt(x) for x in norm], len(tokens)

    total = 0.0
    for inst in instances:
        hvec, hnorm, hlen = tfidf_vec(inst.hypothesis)
        score = np.zeros(_CIDER_N)
        for ref in inst.references:
            rvec, rnorm, rlen = tfidf_vec(ref)
            delta = float(hlen - rlen)
            val = np.zeros(_CIDER_N)
            for k in range(_CIDER_N):
                for gram, w in hvec[k].items():
                    val[k] += min(w, rvec[k][gram]) * rvec[k][gram]
                if hnorm[k] != 0 and rnorm[k] != 0:
                    val[k] /= hnorm[k] * rnorm[k]
                val[k] *= math.exp(-(delta ** 2) / (2 * _CIDER_SIGMA ** 2))
            score += val
        total += float(score.mean()) / len(inst.references) * 10.0
    return total / len(instances)


# ---------------------------------------------------------------------------
# METEOR-lite

_METEOR_ALPHA = 0.9     # recall weighted 9x over precision
_METEOR_GAMMA = 0.5     # fragmentation penalty weight
_METEOR_BETA = 3.0      # fragmentation penalty exponent


def _align(hyp: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Unigram alignment: exact matches first, then stem matches.

    Both stages are leftmost-greedy over still-unmatched tokens; each
    reference token is used at most once. Returns (hyp_idx, ref_idx)
    pairs sorted by hypothesis position.
    """
    matched_ref = [False] * len(ref)
    pairs: list[tuple[int, int]] = []
    matched_hyp = [False] * len(hyp)
    for key_fn in (lambda t: t, stem):
        ref_keys = [key_fn(t) for t in ref]
        for i, tok in enumerate(hyp):
            if matched_hyp[i]:
                continue
            key = key_fn(tok)
            for j, rk in enumerate(ref_keys):
                if not matched_ref[j] and rk == key:
                    matched_ref[j] = True
                    matched_hyp[i] = True
                    pairs.append((i, j))
                    break
    pairs.sort()
    return pairs


def _meteor_single(hyp: list[str], ref: list[str]) -> float:
    pairs = _align(hyp, ref)
    m = len(pairs)
    if m == 0 or not hyp or not ref:
        return 0.0
    p = m / len(hyp)
    r = m / len(ref)
    f_mean = p * r / (_METEOR_ALPHA * p + (1 - _METEOR_ALPHA) * r)
    chunks = 1
    for (hi, ri), (hj, rj) in zip(pairs, pairs[1:]):
        if hj != hi + 1 or rj != ri + 1:
            chunks += 1
    penalty = _METEOR_GAMMA * (chunks / m) ** _METEOR_BETA
    return f_mean * (1.0 - penalty)


def meteor_lite(instances: list[EvalInstance]) -> float:
    """Exact+stem unigram METEOR approximation; max over refs, averaged."""
    if not instances:
        raise ValueError("METEOR-lite needs at least one instance")
    total = 0.0
    for inst in instances:
        total += max(_meteor_single(inst.hypothesis, ref) for ref in inst.references)
    return total / len(instances)
