#!/usr/bin/env python3
"""Generate frozen metric fixtures for tests/fixtures/metric_fixtures.json.

The expected values come from a deliberately independent, straight-line
transcription of the reference caption-evaluation scorers in common use
(corpus BLEU with 'closest' reference length and epsilon smoothing,
ROUGE-L with beta=1.2, CIDEr with corpus idf and a sigma=6 length
gaussian). This file shares no code with the storyanchor library; it is
run once and its output committed, so the library's metrics module is
checked against an implementation it never touches.

Usage: python3 tools/make_metric_fixtures.py > tests/fixtures/metric_fixtures.json
"""

import json
import math
import random
from collections import defaultdict


# --- BLEU (corpus level, closest ref length, tiny/small smoothing) ---------

def bleu_transcription(hyps, refs_list, n=4):
    small = 1e-9
    tiny = 1e-15
    correct = [0] * n
    guess = [0] * n
    testlen = 0
    reflen = 0
    for hyp, refs in zip(hyps, refs_list):
        testlen += len(hyp)
        # closest length, ties to the shorter reference
        best = None
        for ref in refs:
            key = (abs(len(ref) - len(hyp)), len(ref))
            if best is None or key < best:
                best = key
        reflen += best[1]
        for k in range(1, n + 1):
            counts = defaultdict(int)
            for i in range(len(hyp) - k + 1):
                counts[tuple(hyp[i:i + k])] += 1
            maxref = defaultdict(int)
            for ref in refs:
                rc = defaultdict(int)
                for i in range(len(ref) - k + 1):
                    rc[tuple(ref[i:i + k])] += 1
                for g, c in rc.items():
                    if c > maxref[g]:
                        maxref[g] = c
            correct[k - 1] += sum(min(c, maxref[g]) for g, c in counts.items())
            guess[k - 1] += max(0, len(hyp) - k + 1)
    out = []
    prod = 1.0
    for k in range(n):
        prod *= (correct[k] + tiny) / (guess[k] + small)
        out.append(prod ** (1.0 / (k + 1)))
    ratio = (testlen + tiny) / (reflen + small)
    if ratio < 1:
        for k in range(n):
            out[k] *= math.exp(1 - 1 / ratio)
    return out


# --- ROUGE-L ----------------------------------------------------------------

def my_lcs(string, sub):
    if len(string) < len(sub):
        sub, string = string, sub
    lengths = [[0] * (len(sub) + 1) for _ in range(len(string) + 1)]
    for j in range(1, len(sub) + 1):
        for i in range(1, len(string) + 1):
            if string[i - 1] == sub[j - 1]:
                lengths[i][j] = lengths[i - 1][j - 1] + 1
            else:
                lengths[i][j] = max(lengths[i - 1][j], lengths[i][j - 1])
    return lengths[len(string)][len(sub)]


def rouge_transcription(hyps, refs_list, beta=1.2):
    scores = []
    for hyp, refs in zip(hyps, refs_list):
        prec = []
        rec = []
        for ref in refs:
            lcs = my_lcs(ref, hyp)
            prec.append(lcs / float(len(hyp)) if hyp else 0.0)
            rec.append(lcs / float(len(ref)) if ref else 0.0)
        prec_max = max(prec)
        rec_max = max(rec)
        if prec_max != 0 and rec_max != 0:
            score = ((1 + beta ** 2) * prec_max * rec_max) / \
                    (rec_max + beta ** 2 * prec_max)
        else:
            score = 0.0
        scores.append(score)
    return sum(scores) / len(scores)


# --- CIDEr ------------------------------------------------------------------

def precook(words, n=4):
    counts = defaultdict(int)
    for k in range(1, n + 1):
        for i in range(len(words) - k + 1):
            counts[tuple(words[i:i + k])] += 1
    return counts


def cider_transcription(hyps, refs_list, n=4, sigma=6.0):
    crefs = [[precook(ref) for ref in refs] for refs in refs_list]
    ctest = [precook(hyp) for hyp in hyps]
    document_frequency = defaultdict(float)
    for refs in crefs:
        for ngram in set(ng for ref in refs for ng in ref):
            document_frequency[ngram] += 1
    ref_len = math.log(float(len(crefs)))

    def counts2vec(cnts):
        vec = [defaultdict(float) for _ in range(n)]
        length = 0
        norm = [0.0] * n
        for ngram, term_freq in cnts.items():
            df = math.log(max(1.0, document_frequency[ngram]))
            k = len(ngram) - 1
            vec[k][ngram] = float(term_freq) * (ref_len - df)
            norm[k] += pow(vec[k][ngram], 2)
            if k == 0:
                length += term_freq
        norm = [math.sqrt(x) for x in norm]
        return vec, norm, length

    def sim(vec_hyp, vec_ref, norm_hyp, norm_ref, length_hyp, length_ref):
        delta = float(length_hyp - length_ref)
        val = [0.0] * n
        for k in range(n):
            for ngram, count in vec_hyp[k].items():
                val[k] += min(vec_hyp[k][ngram], vec_ref[k][ngram]) * vec_ref[k][ngram]
            if norm_hyp[k] != 0 and norm_ref[k] != 0:
                val[k] /= norm_hyp[k] * norm_ref[k]
            val[k] *= math.e ** (-(delta ** 2) / (2 * sigma ** 2))
        return val

    scores = []
    for test, refs in zip(ctest, crefs):
        vec, norm, length = counts2vec(test)
        score = [0.0] * n
        for ref in refs:
            vec_ref, norm_ref, length_ref = counts2vec(ref)
            for k, v in enumerate(sim(vec, vec_ref, norm, norm_ref,
                                      length, length_ref)):
                score[k] += v
        score_avg = sum(score) / n
        score_avg /= len(refs)
        score_avg *= 10.0
        scores.append(score_avg)
    return sum(scores) / len(scores)


# --- toy corpus -------------------------------------------------------------

NOUNS = ["party", "beach", "dog", "family", "cake", "friends", "museum", "car",
         "mountain", "garden", "band", "river"]
VERBS = ["went", "played", "watched", "enjoyed", "visited", "walked", "danced",
         "smiled"]
ADJS = ["happy", "sunny", "beautiful", "little", "great", "quiet"]
FILLER = ["the", "a", "we", "they", "to", "and", "then", "everyone", "it", "was"]


def make_sentence(rng):
    length = rng.randint(4, 9)
    words = []
    for _ in range(length):
        pool = rng.choice([NOUNS, VERBS, ADJS, FILLER, FILLER])
        words.append(rng.choice(pool))
    words.append(".")
    return words


def make_corpus(seed=20240817, albums=20, refs=5, sents=5):
    rng = random.Random(seed)
    hyps = []
    refs_list = []
    for _ in range(albums):
        base = [make_sentence(rng) for _ in range(sents)]
        album_refs = []
        for _ in range(refs):
            ref = []
            for s in base:
                s2 = list(s)
                # perturb: swap a word with some probability
                for i in range(len(s2) - 1):
                    if rng.random() < 0.25:
                        s2[i] = rng.choice(NOUNS + VERBS + ADJS + FILLER)
                ref.extend(s2)
            album_refs.append(ref)
        hyp = []
        for s in base:
            s2 = list(s)
            for i in range(len(s2) - 1):
                if rng.random() < 0.35:
                    s2[i] = rng.choice(NOUNS + VERBS + ADJS + FILLER)
            hyp.extend(s2)
        hyps.append(hyp)
        refs_list.append(album_refs)
    return hyps, refs_list


def main():
    hyps, refs_list = make_corpus()
    bleus = bleu_transcription(hyps, refs_list)
    out = {
        "hypotheses": hyps,
        "references": refs_list,
        "expected": {
            "bleu1": bleus[0],
            "bleu2": bleus[1],
            "bleu3": bleus[2],
            "bleu4": bleus[3],
            "rouge_l": rouge_transcription(hyps, refs_list),
            "cider": cider_transcription(hyps, refs_list),
        },
    }
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
