"""Two-stage training.

Stage 1 trains embeddings, fusion, encoder, and decoder end to end with
ground-truth anchor words (or the zero anchor slot for the image-only
ablation). Stage 2 freezes everything except the anchor predictor and
trains it with an embedding-regression loss plus the generation
cross-entropy routed through the predicted anchors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .corpus import StorySequence, Vocabulary, assign_anchors, group_by_album
from .decoding import GeneratedStory, generate_story
from .errors import DataError, DivergedError
from .metrics import MetricReport, aggregate, evaluate_run, meteor_lite, references_by_album
from .metrics.scores import EvalInstance
from .model import ANCHOR_GOLD, ANCHOR_PREDICTED, ANCHOR_ZERO, ModelConfig, StoryAnchorModel
from .optim import AdamState, adam_step
from .rng import stream
from .tensor import Tensor, add_n, constant, mse, scale


@dataclass
class TrainConfig:
    lr: float = 4e-4
    batch_size: int = 64
    epochs: int = 100
    ss_p0: float = 0.05
    ss_delta: float = 0.05
    ss_period: int = 5
    ss_cap_epoch: int = 25
    seed: int = 0
    eval_every: int = 1
    checkpoint_dir: str | None = None
    clip_norm: float | None = None
    max_sentence_len: int = 25
    stage2_mse_weight: float = 1.0
    stage2_gen_weight: float = 1.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("ss_p0", "ss_delta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def ss_probability(epoch: int, cfg: TrainConfig) -> float:
    """Scheduled-sampling probability for a (0-based) epoch.

    Starts at ss_p0 and grows by ss_delta every ss_period epochs, capped
    at the value reached just before ss_cap_epoch (0.25 under defaults).
    """
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    cap = cfg.ss_p0 + cfg.ss_delta * ((cfg.ss_cap_epoch - 1) // cfg.ss_period)
    return min(cfg.ss_p0 + cfg.ss_delta * (epoch // cfg.ss_period), cap)


@dataclass
class Checkpoint:
    """Serialized parameters plus metadata; byte-deterministic."""

    data: bytes
    meta: dict = field(repr=False)

    @property
    def checkpoint_id(self) -> str:
        return hashlib.sha256(self.data).hexdigest()[:16]

    def save(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.data)
        return path

    @staticmethod
    def load(path) -> "Checkpoint":
        data = Path(path).read_bytes()
        _, meta, _ = ckpt_io.deserialize(data)
        return Checkpoint(data, meta)

    def restore(self) -> tuple[StoryAnchorModel, Vocabulary, AdamState | None]:
        params, meta, adam = ckpt_io.deserialize(self.data)
        config = ModelConfig.from_json(meta["config"])
        vocab = Vocabulary.from_json(meta["vocab"])
        return StoryAnchorModel(config, params), vocab, adam


def anchor_targets(embedding_table: np.ndarray, anchors) -> list[np.ndarray]:
    """Embedding-row regression targets; UNK anchors hit the UNK row."""
    out = []
    for a in anchors:
        if not 0 <= a.vocab_id < embedding_table.shape[0]:
            raise IndexError(f"anchor vocab id {a.vocab_id} outside table of "
                             f"{embedding_table.shape[0]} rows")
        out.append(embedding_table[a.vocab_id].copy())
    return out


class _Logger:
    def __init__(self, path):
        self.path = Path(path) if path else None
        if self.path:
            self.path.write_text("")

    def log(self, record: dict):
        if self.path:
            with open(self.path, "a") as f:
                f.write(json.dumps(record, sort_keys=True) + "\n")


def _validation_meteor(model: StoryAnchorModel, vocab: Vocabulary,
                       val_sequences: list[StorySequence], anchor_mode: str,
                       max_len: int) -> float:
    """Greedy-decoded METEOR-lite on one story per validation album."""
    refs = references_by_album(val_sequences)
    instances = []
    for album, seqs in sorted(group_by_album(val_sequences).items()):
        story = generate_story(model, seqs[0], vocab, anchor_mode,
                               beam_size=1, max_len=max_len)
        hyp = [tok for sent in story.sentences for tok in sent]
        flat_refs = [[tok for sent in r for tok in sent] for r in refs[album]]
        instances.append(EvalInstance(hyp, flat_refs))
    return meteor_lite(instances)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _collect_grads(model: StoryAnchorModel) -> dict[str, np.ndarray]:
    grads = {}
    for name in model.params.trainable_names():
        g = model.params[name].grad
        grads[name] = g if g is not None else np.zeros_like(model.params[name].data)
    return grads


def _train_loop(model: StoryAnchorModel, vocab: Vocabulary,
                sequences: list[StorySequence], cfg: TrainConfig, stage: int,
                loss_fn, anchor_mode: str, val_sequences, logger: _Logger,
                parent_id: str | None = None,
                val_metric_fn=None) -> Checkpoint:
    adam = AdamState(lr=cfg.lr)
    rng_shuffle = stream(cfg.seed, f"stage{stage}-shuffle")
    rng_ss = stream(cfg.seed, f"stage{stage}-ss-sampling")
    best: Checkpoint | None = None
    best_score = -np.inf
    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    def snapshot(epoch, val_meteor):
        meta = {"config": model.config.to_json(), "vocab": vocab.to_json(),
                "stage": stage, "epoch": epoch, "val_meteor": val_meteor,
                "anchor_mode": anchor_mode}
        if parent_id is not None:
            meta["parent"] = parent_id
        return Checkpoint(ckpt_io.serialize(model.params, meta, adam), meta)

    last_epoch_loss = 0.0
    for epoch in range(cfg.epochs):
        ss = ss_probability(epoch, cfg)
        epoch_loss = 0.0
        n_batches = 0
        for step, batch_idx in enumerate(_batches(len(sequences), cfg.batch_size,
                                                  rng_shuffle)):
            batch = [sequences[i] for i in batch_idx]
            model.params.zero_grad()
            try:
                loss = loss_fn(batch, ss, rng_ss)
            except FloatingPointError as e:
                raise DivergedError(f"non-finite loss at stage {stage} epoch "
                                    f"{epoch} step {step}: {e}") from None
            loss.backward()
            adam_step(model.params, _collect_grads(model), adam, cfg.clip_norm)
            epoch_loss += float(loss.data)
            n_batches += 1
        last_epoch_loss = epoch_loss / max(1, n_batches)

        val_meteor = None
        ckpt_path = None
        if (epoch + 1) % cfg.eval_every == 0 or epoch == cfg.epochs - 1:
            if val_metric_fn is not None:
                val_meteor = float(val_metric_fn(epoch, model))
            elif val_sequences:
                val_meteor = _validation_meteor(model, vocab, val_sequences,
                                                anchor_mode, cfg.max_sentence_len)
            score = val_meteor if val_meteor is not None else float(epoch)
            if score > best_score:
                best_score = score
                best = snapshot(epoch, val_meteor)
                if ckpt_dir:
                    ckpt_path = str(best.save(ckpt_dir / f"stage{stage}_best.ckpt"))
        logger.log({"epoch": epoch, "stage": stage, "loss": last_epoch_loss,
                    "ss_prob": ss, "val_meteor": val_meteor,
                    "checkpoint_path": ckpt_path})
    if best is None:
        best = snapshot(cfg.epochs - 1, None)
        if ckpt_dir:
            best.save(ckpt_dir / f"stage{stage}_best.ckpt")
    return best


def train_stage1(sequences: list[StorySequence], vocab: Vocabulary,
                 model_cfg: ModelConfig, cfg: TrainConfig,
                 anchor_mode: str = ANCHOR_GOLD,
                 val_sequences: list[StorySequence] | None = None,
                 log_path=None, val_metric_fn=None) -> Checkpoint:
    """End-to-end anchored (or image-only) encoder-decoder training.

    Returns the checkpoint with the highest validation METEOR-lite, or
    the final epoch's when no validation set is given.
    """
    if not sequences:
        raise DataError("train_stage1: empty dataset")
    if anchor_mode == ANCHOR_GOLD and any(s.anchors is None for s in sequences):
        raise DataError("train_stage1: dataset has no anchors assigned; "
                        "run dataset preparation first")
    model = StoryAnchorModel.init(model_cfg, stream(cfg.seed, "init"))
    encode = lambda s: vocab.encode_sentence(s, model_cfg.max_sentence_len)

    def loss_fn(batch, ss, rng_ss):
        losses = []
        n_sentences = 0
        for seq in batch:
            loss, _, _ = model.story_loss(seq, encode, anchor_mode, ss, rng_ss)
            losses.append(loss)
            n_sentences += seq.story.n
        return scale(add_n(losses), 1.0 / n_sentences)

    return _train_loop(model, vocab, sequences, cfg, 1, loss_fn, anchor_mode,
                       val_sequences, _Logger(log_path), val_metric_fn=val_metric_fn)


def train_stage2(stage1_ckpt: Checkpoint, sequences: list[StorySequence],
                 cfg: TrainConfig,
                 val_sequences: list[StorySequence] | None = None,
                 log_path=None, val_metric_fn=None) -> Checkpoint:
    """Anchor-predictor training with everything else frozen.

    Loss per story: MSE between predicted and stage-1 anchor embeddings
    (summed over positions) plus the generation cross-entropy computed
    with predicted anchors; only predictor parameters receive updates.
    """
    if not sequences:
        raise DataError("train_stage2: empty dataset")
    if any(s.anchors is None for s in sequences):
        raise DataError("train_stage2: dataset has no anchors assigned")
    model, vocab, _ = stage1_ckpt.restore()
    predictor = set(model.predictor_names())
    for name in model.params.names():
        model.params.set_trainable(name, name in predictor)
    encode = lambda s: vocab.encode_sentence(s, model.config.max_sentence_len)
    embed = model.params["embed"].data

    def loss_fn(batch, ss, rng_ss):
        terms = []
        n_sentences = 0
        for seq in batch:
            targets = anchor_targets(embed, seq.anchors)
            mean = (seq.features.mean(axis=0)
                    if model.config.predictor_context == "sequence" else None)
            mse_terms = [mse(model.predict_anchor(f, mean), constant(t))
                         for f, t in zip(seq.features, targets)]
            terms.append(scale(add_n(mse_terms), cfg.stage2_mse_weight))
            if cfg.stage2_gen_weight != 0.0:
                gen, _, _ = model.story_loss(seq, encode, ANCHOR_PREDICTED,
                                             ss, rng_ss)
                terms.append(scale(gen, cfg.stage2_gen_weight))
            n_sentences += seq.story.n
        return scale(add_n(terms), 1.0 / n_sentences)

    return _train_loop(model, vocab, sequences, cfg, 2, loss_fn, ANCHOR_PREDICTED,
                       val_sequences, _Logger(log_path),
                       parent_id=stage1_ckpt.checkpoint_id,
                       val_metric_fn=val_metric_fn)


def run_ablation(train_sequences: list[StorySequence],
                 val_sequences: list[StorySequence], vocab: Vocabulary,
                 model_cfg: ModelConfig, cfg: TrainConfig,
                 pos_classes: list[str], runs: int = 3, anchor_seed: int = 0,
                 beam_size: int = 3) -> dict[str, MetricReport]:
    """Image-only vs per-POS anchored models, ground-truth anchors at
    inference (the oracle setting); mean/std over ``runs`` seeds."""
    refs = references_by_album(val_sequences)
    rows: dict[str, list[dict[str, float]]] = {}

    def eval_model(ckpt: Checkpoint, mode: str) -> dict[str, float]:
        model, vb, _ = ckpt.restore()
        generated = [generate_story(model, seqs[0], vb, mode, beam_size,
                                    model.config.max_sentence_len)
                     for _, seqs in sorted(group_by_album(val_sequences).items())]
        return evaluate_run(generated, refs, k_refs=None)

    for run in range(runs):
        run_cfg = TrainConfig(**{**cfg.__dict__, "seed": cfg.seed + run,
                                 "checkpoint_dir": None})
        ckpt = train_stage1(train_sequences, vocab, model_cfg, run_cfg,
                            anchor_mode=ANCHOR_ZERO, val_sequences=None)
        rows.setdefault("ImageOnly", []).append(eval_model(ckpt, ANCHOR_ZERO))
        for pos in pos_classes:
            for seqs in (train_sequences, val_sequences):
                assign_anchors(seqs, pos, vocab, anchor_seed)
            ckpt = train_stage1(train_sequences, vocab, model_cfg, run_cfg,
                                anchor_mode=ANCHOR_GOLD, val_sequences=None)
            rows.setdefault(pos, []).append(eval_model(ckpt, ANCHOR_GOLD))

    n_albums = len(group_by_album(val_sequences))
    return {label: aggregate(scores, n_albums) for label, scores in rows.items()}
