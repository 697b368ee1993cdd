"""Inference-time sentence generation: greedy and beam-search decoding.

Scores are raw cumulative log-probabilities (no length normalization by
default). Finished hypotheses leave the beam, so they never block
expansion slots; the beam keeps ``beam_size`` live hypotheses until all
finish or hit the length limit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .corpus import BOS, EOS, StorySequence, Vocabulary
from .model import StoryAnchorModel
from .tensor import Tensor


@dataclass
class BeamHypothesis:
    tokens: list[int] = field(default_factory=list)
    log_prob: float = 0.0
    hidden: np.ndarray | None = None
    finished: bool = False

    @property
    def last_token(self) -> int:
        return self.tokens[-1] if self.tokens else BOS


@dataclass
class GeneratedStory:
    album_id: str
    sentences: list[list[str]]
    log_probs: list[float]

    def to_json(self) -> dict:
        return {"album_id": self.album_id,
                "story": [" ".join(s) for s in self.sentences],
                "log_probs": self.log_probs}

    @staticmethod
    def from_json(obj: dict) -> "GeneratedStory":
        return GeneratedStory(obj["album_id"],
                              [s.split() for s in obj["story"]],
                              obj["log_probs"])


def _step(model: StoryAnchorModel, v: Tensor, hidden: np.ndarray,
          token_id: int) -> tuple[np.ndarray, np.ndarray]:
    """One inference decoder step; detaches from the tape."""
    logits, h_next = model.decode_step(v, T.constant(hidden), token_id)
    return T.log_softmax(logits.data), h_next.data


def greedy_decode(model: StoryAnchorModel, v: Tensor,
                  max_len: int = 25) -> tuple[list[int], float]:
    """Argmax decoding until EOS or ``max_len``; ties break to lowest id.

    Returns the token ids (EOS included when emitted) and the cumulative
    log-probability of the chosen tokens.
    """
    hidden = model.decoder_init(v).data
    tokens: list[int] = []
    total = 0.0
    prev = BOS
    for _ in range(max_len):
        logp, hidden = _step(model, v, hidden, prev)
        prev = int(np.argmax(logp))
        tokens.append(prev)
        total += float(logp[prev])
        if prev == EOS:
            break
    return tokens, total


def beam_search(model: StoryAnchorModel, v: Tensor, beam_size: int = 3,
                max_len: int = 25, length_normalize: bool = False,
                ) -> tuple[list[int], float]:
    """Beam search over the decoder; returns the best finished hypothesis.

    Each step expands every live hypothesis over the full vocabulary and
    keeps the top ``beam_size`` unfinished candidates by cumulative
    log-probability; candidates ending in EOS retire to a pool. Live
    hypotheses reaching ``max_len`` retire as finished. The winner is the
    pool's highest-scoring hypothesis, ties broken by shorter length and
    then lexicographically lower token ids.
    """
    if beam_size < 1:
        raise ValueError(f"beam_size must be >= 1, got {beam_size}")
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    h0 = model.decoder_init(v).data
    live = [BeamHypothesis(hidden=h0)]
    pool: list[BeamHypothesis] = []
    for _ in range(max_len):
        if not live:
            break
        candidates: list[tuple[float, int, int]] = []  # (cum, parent idx, token)
        logps = []
        hiddens = []
        for pi, hyp in enumerate(live):
            logp, h_next = _step(model, v, hyp.hidden, hyp.last_token)
            logps.append(logp)
            hiddens.append(h_next)
            for tok in range(len(logp)):
                candidates.append((hyp.log_prob + float(logp[tok]), pi, tok))
        candidates.sort(key=lambda c: (-c[0], c[2], c[1]))
        next_live: list[BeamHypothesis] = []
        for cum, pi, tok in candidates:
            child = BeamHypothesis(tokens=live[pi].tokens + [tok], log_prob=cum,
                                   hidden=hiddens[pi])
            if tok == EOS:
                child.finished = True
                pool.append(child)
            else:
                next_live.append(child)
            if len(next_live) >= beam_size:
                break
        live = next_live
    for hyp in live:  # length limit reached: retire as finished
        hyp.finished = True
        pool.append(hyp)

    def score(h: BeamHypothesis) -> float:
        return h.log_prob / len(h.tokens) if length_normalize and h.tokens \
            else h.log_prob

    best = min(pool, key=lambda h: (-score(h), len(h.tokens), h.tokens))
    return best.tokens, best.log_prob


def generate_story(model: StoryAnchorModel, seq: StorySequence, vocab: Vocabulary,
                   anchor_mode: str, beam_size: int = 3, max_len: int = 25,
                   length_normalize: bool = False) -> GeneratedStory:
    """Generate all N sentences of one album sample.

    ``anchor_mode`` selects predicted anchors (the deployment setting),
    gold anchors (the oracle setting), or the zero slot (image-only).
    """
    contexts = model.encode_story(seq, anchor_mode)
    sentences = []
    log_probs = []
    for v in contexts:
        v = T.constant(v.data)  # drop the encoder tape
        ids, lp = beam_search(model, v, beam_size, max_len, length_normalize)
        if ids and ids[-1] == EOS:
            ids = ids[:-1]
        sentences.append(vocab.decode(ids))
        log_probs.append(lp)
    return GeneratedStory(seq.story.album_id, sentences, log_probs)


def write_generated(path, generated: list[GeneratedStory]):
    with open(path, "w") as f:
        for g in generated:
            f.write(json.dumps(g.to_json(), sort_keys=True) + "\n")


def read_generated(path) -> list[GeneratedStory]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(GeneratedStory.from_json(json.loads(line)))
    return out
