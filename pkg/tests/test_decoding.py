import numpy as np
import pytest

from storyanchor import decoding as D
from storyanchor import tensor as T
from storyanchor.corpus import EOS, build_vocab, Story
from storyanchor.model import ANCHOR_GOLD

from conftest import tiny_model
from test_model import make_seq


class ScriptedDecoder:
    """Decoder whose step-t distribution is a scripted function of the
    step index and incoming token; hidden state carries the step count."""

    def __init__(self, table):
        self.table = table  # (step, token) -> probability vector

    def decoder_init(self, v):
        return T.constant(np.array([0.0]))

    def decode_step(self, v, h, token_id):
        step = int(h.data[0])
        probs = np.asarray(self.table[(step, token_id)], dtype=np.float64)
        return T.constant(np.log(probs)), T.constant(np.array([step + 1.0]))


def test_hand_worked_beam_case():
    # Three tokens {0, 1, EOS=2}.  Start: p=[.5,.3,.2]; after emitting 0:
    # p=[.1,.2,.7]; after emitting 1: p=[.6,.3,.1].
    #
    # Beam 2, max_len 2, by hand:
    #   step 1: EOS (lp -1.609) retires; live = [0] (-0.693), [1] (-1.204)
    #   step 2: best candidate is [0, EOS] at ln .5 + ln .7 = ln .35;
    #           [1,0] (-1.715) and [0,1] (-2.303) retire at the length cap.
    # Winner: [0, EOS] with log-prob ln 0.35.
    table = {(0, 1): [0.5, 0.3, 0.2],       # first call arrives with BOS=1
             (1, 0): [0.1, 0.2, 0.7],
             (1, 1): [0.6, 0.3, 0.1]}
    model = ScriptedDecoder(table)
    v = T.constant(np.zeros(1))
    tokens, lp = D.beam_search(model, v, beam_size=2, max_len=2)
    assert tokens == [0, EOS]
    assert lp == pytest.approx(np.log(0.35), abs=1e-12)
    # greedy agrees here
    g_tokens, g_lp = D.greedy_decode(model, v, max_len=2)
    assert g_tokens == [0, EOS]
    assert g_lp == pytest.approx(lp, abs=1e-12)


def test_beam_wins_where_greedy_is_myopic():
    # Greedy takes token 0 (p=.6) then faces a flat tail; the beam keeps
    # token 1 (p=.4) whose continuation is near-certain EOS.
    table = {(0, 1): [0.6, 0.4, 1e-9],
             (1, 0): [0.499999999, 0.5, 1e-9],
             (1, 1): [0.05, 0.05, 0.9]}
    model = ScriptedDecoder(table)
    v = T.constant(np.zeros(1))
    g_tokens, g_lp = D.greedy_decode(model, v, max_len=2)
    b_tokens, b_lp = D.beam_search(model, v, beam_size=2, max_len=2)
    assert b_tokens == [1, EOS]
    assert b_lp == pytest.approx(np.log(0.4 * 0.9), abs=1e-8)
    assert b_lp > g_lp


def exhaustive_best(model, v, max_len):
    """Enumerate every decodable sequence and return the best by the
    beam-search ordering (-log_prob, length, tokens)."""
    h0 = model.decoder_init(v).data
    done = []

    def walk(prefix, lp, hidden, last):
        logits, h_next = model.decode_step(v, T.constant(hidden), last)
        logp = T.log_softmax(logits.data)
        for tok in range(len(logp)):
            seq = prefix + [tok]
            cum = lp + float(logp[tok])
            if tok == EOS or len(seq) == max_len:
                done.append((seq, cum))
            else:
                walk(seq, cum, h_next.data, tok)

    walk([], 0.0, h0, 1)  # BOS = 1
    return min(done, key=lambda p: (-p[1], len(p[0]), p[0]))


def test_full_width_beam_matches_exhaustive_search():
    for seed in range(6):
        model = tiny_model(seed=seed, vocab_size=6)
        v = T.constant(np.random.default_rng(seed).normal(
            size=2 * model.config.enc_hidden))
        want_tokens, want_lp = exhaustive_best(model, v, max_len=3)
        got_tokens, got_lp = D.beam_search(model, v, beam_size=125, max_len=3)
        assert got_tokens == want_tokens
        assert got_lp == pytest.approx(want_lp, abs=1e-12)


def test_beam_one_equals_greedy():
    for seed in range(30):
        model = tiny_model(seed=seed, vocab_size=9)
        v = T.constant(np.random.default_rng(100 + seed).normal(
            size=2 * model.config.enc_hidden))
        g_tokens, g_lp = D.greedy_decode(model, v, max_len=6)
        b_tokens, b_lp = D.beam_search(model, v, beam_size=1, max_len=6)
        assert b_tokens == g_tokens
        assert b_lp == pytest.approx(g_lp, abs=1e-12)


def test_score_monotone_in_beam_size():
    for seed in range(10):
        model = tiny_model(seed=seed, vocab_size=7)
        v = T.constant(np.random.default_rng(200 + seed).normal(
            size=2 * model.config.enc_hidden))
        scores = [D.beam_search(model, v, beam_size=b, max_len=5)[1]
                  for b in (1, 2, 4, 8)]
        for lo, hi in zip(scores, scores[1:]):
            assert hi >= lo - 1e-12


def test_beam_size_validated():
    model = tiny_model(seed=0)
    v = T.constant(np.zeros(2 * model.config.enc_hidden))
    with pytest.raises(ValueError):
        D.beam_search(model, v, beam_size=0)
    with pytest.raises(ValueError):
        D.beam_search(model, v, max_len=0)


def test_generate_story_shape_and_eos_stripped():
    model = tiny_model(seed=14)
    seq = make_seq(model, seed=3)
    vocab = build_vocab([Story("x", [[f"w{k}" for k in range(20)]], ["i"])])
    story = D.generate_story(model, seq, vocab, ANCHOR_GOLD,
                             beam_size=2, max_len=5)
    assert story.album_id == seq.story.album_id
    assert len(story.sentences) == model.config.n_images
    assert len(story.log_probs) == model.config.n_images
    for sent in story.sentences:
        assert len(sent) <= 5
        assert "<eos>" not in sent


def test_generated_roundtrip(tmp_path):
    stories = [D.GeneratedStory("a1", [["the", "dog", "."]], [-1.5]),
               D.GeneratedStory("a2", [["hi"], ["there", "."]], [-0.1, -2.0])]
    path = tmp_path / "gen.jsonl"
    D.write_generated(path, stories)
    back = D.read_generated(path)
    assert [g.to_json() for g in back] == [g.to_json() for g in stories]
