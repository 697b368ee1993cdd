import json
from pathlib import Path

import numpy as np
import pytest

from storyanchor.corpus import (Vocabulary, VocabSpec, assign_anchors, build_vocab,
                                stories, synth_corpus)
from storyanchor.model import ModelConfig, StoryAnchorModel

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def metric_fixture():
    with open(FIXTURES / "metric_fixtures.json") as f:
        return json.load(f)


def tiny_config(vocab_size=24, **overrides) -> ModelConfig:
    base = dict(feature_dim=8, embed_dim=6, fusion_hidden=10, fusion_out=12,
                enc_hidden=5, dec_hidden=7, predictor_hidden=9,
                vocab_size=vocab_size, max_sentence_len=8, n_images=3)
    base.update(overrides)
    return ModelConfig(**base)


def tiny_model(seed=0, **overrides) -> StoryAnchorModel:
    return StoryAnchorModel.init(tiny_config(**overrides),
                                 np.random.default_rng(seed))


@pytest.fixture(scope="session")
def toy_dataset():
    """8 deterministic synthetic albums with anchors assigned."""
    seqs, lexicon = synth_corpus(7, 8, VocabSpec(10, 5, 4, 3), 1.0,
                                 n_refs=1, feature_dim=16)
    vocab = build_vocab(stories(seqs), 1)
    assign_anchors(seqs, "NOUN", vocab, 0)
    return seqs, vocab, lexicon
