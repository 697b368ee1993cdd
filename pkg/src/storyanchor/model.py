"""The anchor-word storytelling architecture.

Per story of N images: each image feature is concatenated with an anchor
word embedding (ground-truth, predicted, or zero) and passed through a
fusion MLP; a bidirectional GRU encodes the N fused vectors into context
vectors v_1..v_N; each v_i initializes a GRU decoder that emits one
sentence. The anchor predictor is a one-hidden-layer ReLU MLP trained by
regression against embedding rows, which are shared with the decoder's
input embeddings.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .corpus import BOS, EOS, StorySequence
from .errors import ConfigError, ShapeError
from .optim import ParamStore
from .tensor import Tensor

ANCHOR_GOLD = "gold"
ANCHOR_PREDICTED = "predicted"
ANCHOR_ZERO = "zero"


@dataclass
class ModelConfig:
    feature_dim: int = 2048
    embed_dim: int = 512
    fusion_hidden: int = 2048
    fusion_out: int = 2048
    enc_hidden: int = 256
    dec_hidden: int = 512
    predictor_hidden: int = 512
    vocab_size: int = 0
    max_sentence_len: int = 25
    n_images: int = 5
    # v_i conditions the decoder as projected initial state by default;
    # set context_every_step to also concatenate v_i to every input.
    context_every_step: bool = False
    # "single": predictor sees one image feature; "sequence": the feature
    # concatenated with the mean-pooled sequence features.
    predictor_context: str = "single"
    # scheduled sampling uses softmax sampling by default; "argmax" greedy.
    ss_sample_mode: str = "sample"

    def __post_init__(self):
        if self.predictor_context not in ("single", "sequence"):
            raise ConfigError(f"predictor_context must be single|sequence, "
                              f"got {self.predictor_context!r}")
        if self.ss_sample_mode not in ("sample", "argmax"):
            raise ConfigError(f"ss_sample_mode must be sample|argmax, "
                              f"got {self.ss_sample_mode!r}")

    @property
    def context_dim(self) -> int:
        return 2 * self.enc_hidden

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(obj: dict) -> "ModelConfig":
        return ModelConfig(**obj)


_GRU_GATES = ("z", "r", "h")


class StoryAnchorModel:
    """Parameters plus forward computations (tape-based, see tensor.py)."""

    def __init__(self, config: ModelConfig, params: ParamStore):
        if config.vocab_size < 4:
            raise ConfigError("vocab_size must include the 4 special tokens")
        self.config = config
        self.params = params

    # -- construction -------------------------------------------------

    @staticmethod
    def init(config: ModelConfig, rng: np.random.Generator) -> "StoryAnchorModel":
        c = config
        params = ParamStore()

        def linear(name, out_dim, in_dim):
            a = 1.0 / np.sqrt(in_dim)
            params.add(f"{name}.W", rng.uniform(-a, a, size=(out_dim, in_dim)))
            params.add(f"{name}.b", np.zeros(out_dim))

        def gru(prefix, in_dim, hidden):
            a_in = 1.0 / np.sqrt(in_dim)
            a_h = 1.0 / np.sqrt(hidden)
            for gate in _GRU_GATES:
                params.add(f"{prefix}.W{gate}", rng.uniform(-a_in, a_in, (hidden, in_dim)))
                params.add(f"{prefix}.U{gate}", rng.uniform(-a_h, a_h, (hidden, hidden)))
                params.add(f"{prefix}.b{gate}", np.zeros(hidden))

        params.add("embed", rng.uniform(-0.1, 0.1, size=(c.vocab_size, c.embed_dim)))
        linear("fusion.l1", c.fusion_hidden, c.feature_dim + c.embed_dim)
        linear("fusion.l2", c.fusion_out, c.fusion_hidden)
        pred_in = c.feature_dim * (2 if c.predictor_context == "sequence" else 1)
        linear("pred.l1", c.predictor_hidden, pred_in)
        linear("pred.l2", c.embed_dim, c.predictor_hidden)
        gru("enc.fwd", c.fusion_out, c.enc_hidden)
        gru("enc.bwd", c.fusion_out, c.enc_hidden)
        linear("dec.init", c.dec_hidden, c.context_dim)
        dec_in = c.embed_dim + (c.context_dim if c.context_every_step else 0)
        gru("dec", dec_in, c.dec_hidden)
        linear("out", c.vocab_size, c.dec_hidden)
        return StoryAnchorModel(config, params)

    def predictor_names(self) -> list[str]:
        return [n for n in self.params.names() if n.startswith("pred.")]

    # -- building blocks ----------------------------------------------

    def _linear(self, name: str, x: Tensor) -> Tensor:
        return T.add(T.matmul(self.params[f"{name}.W"], x), self.params[f"{name}.b"])

    def predict_anchor(self, feature: np.ndarray,
                       sequence_mean: np.ndarray | None = None) -> Tensor:
        """Regress a word-embedding vector from an image feature."""
        c = self.config
        if feature.shape != (c.feature_dim,):
            raise ShapeError(f"predict_anchor: feature shape {feature.shape} "
                             f"!= ({c.feature_dim},)")
        if c.predictor_context == "sequence":
            if sequence_mean is None:
                raise ShapeError("predictor_context=sequence requires the "
                                 "mean-pooled sequence features")
            x = T.constant(np.concatenate([feature, sequence_mean]))
        else:
            x = T.constant(feature)
        return self._linear("pred.l2", T.relu(self._linear("pred.l1", x)))

    def fuse(self, feature: np.ndarray, anchor_embedding: Tensor) -> Tensor:
        """concat(feature, anchor embedding) through the fusion MLP."""
        c = self.config
        if feature.shape != (c.feature_dim,):
            raise ShapeError(f"fuse: feature shape {feature.shape} != ({c.feature_dim},)")
        if anchor_embedding.shape != (c.embed_dim,):
            raise ShapeError(f"fuse: anchor embedding shape {anchor_embedding.shape} "
                             f"!= ({c.embed_dim},)")
        x = T.concat([T.constant(feature), anchor_embedding])
        return self._linear("fusion.l2", T.relu(self._linear("fusion.l1", x)))

    def gru_cell(self, prefix: str, x: Tensor, h_prev: Tensor) -> Tensor:
        """z = s(Wz x + Uz h + bz); r = s(...); h~ = tanh(Wh x + Uh (r*h) + bh);
        h' = (1 - z)*h + z*h~."""
        p = self.params
        z = T.sigmoid(T.add(T.add(T.matmul(p[f"{prefix}.Wz"], x),
                                  T.matmul(p[f"{prefix}.Uz"], h_prev)),
                            p[f"{prefix}.bz"]))
        r = T.sigmoid(T.add(T.add(T.matmul(p[f"{prefix}.Wr"], x),
                                  T.matmul(p[f"{prefix}.Ur"], h_prev)),
                            p[f"{prefix}.br"]))
        h_tilde = T.tanh(T.add(T.add(T.matmul(p[f"{prefix}.Wh"], x),
                                     T.matmul(p[f"{prefix}.Uh"], T.mul(r, h_prev))),
                               p[f"{prefix}.bh"]))
        one_minus_z = T.add(T.scale(z, -1.0), T.constant(np.ones(z.shape)))
        return T.add(T.mul(one_minus_z, h_prev), T.mul(z, h_tilde))

    def encode_sequence(self, fused: list[Tensor]) -> list[Tensor]:
        """BiGRU over the fused image vectors; v_i = [h_fwd_i ; h_bwd_i]."""
        if not fused:
            raise ValueError("encode_sequence: empty input sequence")
        h = T.constant(np.zeros(self.config.enc_hidden))
        forward = []
        for x in fused:
            h = self.gru_cell("enc.fwd", x, h)
            forward.append(h)
        h = T.constant(np.zeros(self.config.enc_hidden))
        backward = [None] * len(fused)
        for i in range(len(fused) - 1, -1, -1):
            h = self.gru_cell("enc.bwd", fused[i], h)
            backward[i] = h
        return [T.concat([f, b]) for f, b in zip(forward, backward)]

    def decoder_init(self, v: Tensor) -> Tensor:
        return self._linear("dec.init", v)

    def _decoder_input(self, token_id: int, v: Tensor) -> Tensor:
        emb = T.rows(self.params["embed"], token_id)
        if self.config.context_every_step:
            return T.concat([emb, v])
        return emb

    def decode_step(self, v: Tensor, h: Tensor, token_id: int) -> tuple[Tensor, Tensor]:
        """One decoder step: returns (logits, next hidden)."""
        x = self._decoder_input(token_id, v)
        h_next = self.gru_cell("dec", x, h)
        logits = self._linear("out", h_next)
        return logits, h_next

    def decode_sentence(self, v: Tensor, target_ids: list[int], ss_prob: float,
                        rng: np.random.Generator | None) -> tuple[Tensor, int]:
        """Teacher-forced / scheduled-sampling decoding of one sentence.

        Returns the summed cross-entropy and the number of positions whose
        argmax prediction matches the target. With ss_prob > 0, each input
        after the first is the model's own previous token with probability
        ss_prob (sampled from the softmax, or argmax per config).
        """
        if not target_ids or target_ids[-1] != EOS:
            raise ValueError("decode_sentence: target must be non-empty and end with EOS")
        if not 0.0 <= ss_prob <= 1.0:
            raise ValueError(f"ss_prob must be in [0, 1], got {ss_prob}")
        if ss_prob > 0.0 and rng is None:
            raise ValueError("scheduled sampling requires an RNG")
        h = self.decoder_init(v)
        prev_id = BOS
        losses = []
        correct = 0
        prev_logits: Tensor | None = None
        for target in target_ids:
            if prev_logits is not None and ss_prob > 0.0 and rng.random() < ss_prob:
                logp = T.log_softmax(prev_logits.data)
                if self.config.ss_sample_mode == "sample":
                    prev_id = int(rng.choice(len(logp), p=np.exp(logp)))
                else:
                    prev_id = int(np.argmax(logp))
            logits, h = self.decode_step(v, h, prev_id)
            losses.append(T.softmax_cross_entropy(logits, target))
            if int(np.argmax(logits.data)) == target:
                correct += 1
            prev_logits = logits
            prev_id = target
        return T.add_n(losses), correct

    # -- story-level forward ------------------------------------------

    def anchor_embeddings(self, seq: StorySequence, mode: str) -> list[Tensor]:
        """Per-image anchor embedding per the requested conditioning mode."""
        c = self.config
        if mode == ANCHOR_ZERO:
            return [T.constant(np.zeros(c.embed_dim)) for _ in range(seq.story.n)]
        if mode == ANCHOR_GOLD:
            if seq.anchors is None:
                raise ValueError(f"story {seq.story.album_id}: no anchors assigned")
            return [T.rows(self.params["embed"], a.vocab_id) for a in seq.anchors]
        if mode == ANCHOR_PREDICTED:
            mean = seq.features.mean(axis=0) if c.predictor_context == "sequence" else None
            return [self.predict_anchor(f, mean) for f in seq.features]
        raise ValueError(f"unknown anchor mode {mode!r}")

    def encode_story(self, seq: StorySequence, mode: str) -> list[Tensor]:
        embeddings = self.anchor_embeddings(seq, mode)
        fused = [self.fuse(f, e) for f, e in zip(seq.features, embeddings)]
        return self.encode_sequence(fused)

    def story_loss(self, seq: StorySequence, vocab_encode, mode: str,
                   ss_prob: float = 0.0, rng: np.random.Generator | None = None,
                   ) -> tuple[Tensor, int, int]:
        """Summed generation cross-entropy over the story's sentences.

        ``vocab_encode`` maps a token list to ids ending in EOS. Returns
        (loss, correct argmax predictions, total target tokens).
        """
        contexts = self.encode_story(seq, mode)
        losses = []
        correct = 0
        total = 0
        for v, sentence in zip(contexts, seq.story.sentences):
            target = vocab_encode(sentence)
            loss, c = self.decode_sentence(v, target, ss_prob, rng)
            losses.append(loss)
            correct += c
            total += len(target)
        return T.add_n(losses), correct, total
