"""Command-line entry point.

Subcommands: prepare, stats, train, generate, evaluate, ablate,
human-baseline, gradcheck. Exit codes: 0 success, 2 usage/config error,
3 data error, 4 divergence. Failures print one line to stderr:
``error:<category>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import gradcheck as gc
from .corpus import (POS_CLASSES, PosLexicon, StorySequence, Vocabulary, VocabSpec,
                     assign_anchors, avg_pos_per_sentence, build_vocab, corpus_stats,
                     group_by_album, load_dataset, save_dataset, stories,
                     synth_corpus, tag_pos, write_synth_corpus)
from .decoding import generate_story, read_generated, write_generated
from .errors import (ConfigError, DataError, DivergedError, FormatError,
                     StoryAnchorError)
from .metrics import (MetricReport, aggregate, evaluate_run, format_table,
                      human_baseline, references_by_album, save_report)
from .model import ANCHOR_GOLD, ANCHOR_PREDICTED, ANCHOR_ZERO, ModelConfig
from .training import Checkpoint, TrainConfig, run_ablation, train_stage1, train_stage2

log = logging.getLogger("storyanchor")

_POS_FLAG = {"noun": "NOUN", "verb": "VERB", "adj": "ADJ", "adv": "ADV"}

_MODEL_KEYS = set(ModelConfig().to_json())
_TRAIN_KEYS = set(TrainConfig().__dict__)


def _load_config(path: str | None, overrides: dict) -> dict:
    """Config file merged with CLI overrides; unknown keys are an error."""
    merged: dict = {}
    if path:
        with open(path) as f:
            merged.update(json.load(f))
        unknown = set(merged) - _MODEL_KEYS - _TRAIN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


def _split_config(merged: dict) -> tuple[dict, dict]:
    model = {k: v for k, v in merged.items() if k in _MODEL_KEYS}
    train = {k: v for k, v in merged.items() if k in _TRAIN_KEYS}
    return model, train


def _one_sequence_per_album(sequences: list[StorySequence]) -> list[StorySequence]:
    return [seqs[0] for _, seqs in sorted(group_by_album(sequences).items())]


# ---------------------------------------------------------------------------
# subcommands

def cmd_prepare(args) -> int:
    pos = _POS_FLAG[args.pos]
    if args.synth_albums:
        spec = VocabSpec(args.synth_nouns, args.synth_verbs,
                         args.synth_adjs, args.synth_advs)
        sequences, lexicon = synth_corpus(
            args.seed, args.synth_albums, spec, args.correlation,
            n_images=args.synth_images, n_refs=args.synth_refs,
            feature_dim=args.synth_feature_dim, feature_noise=args.synth_noise)
        out_dir = Path(args.out)
        manifest = write_synth_corpus(out_dir, sequences, lexicon, name="dataset")
        sequences = load_dataset(manifest)  # round-trip through the file format
        out_path = manifest
    else:
        if not args.dataset:
            raise ConfigError("prepare needs --dataset or --synth-albums")
        sequences = load_dataset(args.dataset)
        lexicon = PosLexicon.load(args.lexicon) if args.lexicon else None
        for seq in sequences:
            if seq.pos_tags is None:
                if lexicon is None:
                    raise DataError(f"story {seq.story.album_id}: no pos_tags in "
                                    "the manifest and no --lexicon given")
                seq.pos_tags = [tag_pos(s, lexicon) for s in seq.story.sentences]
        out_path = Path(args.out)

    vocab = build_vocab(stories(sequences), args.min_freq)
    assign_anchors(sequences, pos, vocab, args.seed)
    save_dataset(out_path, sequences)

    vocab_path = Path(str(out_path) + ".vocab.json")
    with open(vocab_path, "w") as f:
        json.dump(vocab.to_json(), f, sort_keys=True)
    print(f"prepared {len(sequences)} stories "
          f"({len(group_by_album(sequences))} albums), vocab size {len(vocab)} "
          f"-> {out_path}")
    return 0


def cmd_stats(args) -> int:
    sequences = load_dataset(args.dataset)
    if args.lexicon:
        lexicon = PosLexicon.load(args.lexicon)
    else:
        table = {}
        for seq in sequences:
            if seq.pos_tags is None:
                raise DataError("stats needs --lexicon or pos_tags in the manifest")
            for sent, tags in zip(seq.story.sentences, seq.pos_tags):
                for tok, t in zip(sent, tags):
                    if t:
                        table[tok] = frozenset(t)
        lexicon = PosLexicon(table)
    corpus = stories(sequences)
    st = corpus_stats(corpus, lexicon)
    per_sent = avg_pos_per_sentence(corpus, lexicon)
    print(f"{'Stories':>22}")
    print(f"{'Vocabulary Size':<18} {st.vocab_size:>7}")
    print(f"{'Avg. Sent. Length':<18} {st.avg_sentence_length:>7.1f}")
    print(f"{'# of Nouns':<18} {st.n_nouns:>7}")
    print(f"{'# of Verbs':<18} {st.n_verbs:>7}")
    print(f"{'# of Adjectives':<18} {st.n_adjectives:>7}")
    print(f"{'# of Adverbs':<18} {st.n_adverbs:>7}")
    print("Per-sentence averages: " + "  ".join(
        f"{c.lower()}s {per_sent[c]:.2f}" for c in POS_CLASSES))
    return 0


def _load_vocab_for(dataset_path: str) -> Vocabulary:
    vocab_path = Path(str(dataset_path) + ".vocab.json")
    if not vocab_path.exists():
        raise DataError(f"vocabulary file {vocab_path} not found; "
                        "run prepare first")
    with open(vocab_path) as f:
        return Vocabulary.from_json(json.load(f))


def cmd_train(args) -> int:
    merged = _load_config(args.config, {
        "lr": args.lr, "batch_size": args.batch_size, "epochs": args.epochs,
        "seed": args.seed, "eval_every": args.eval_every,
        "checkpoint_dir": args.checkpoint_dir,
    })
    model_kwargs, train_kwargs = _split_config(merged)
    cfg = TrainConfig(**train_kwargs)
    sequences = load_dataset(args.dataset)
    if args.max_stories_per_album:
        kept = []
        seen: dict[str, int] = {}
        for seq in sequences:
            c = seen.get(seq.story.album_id, 0)
            if c < args.max_stories_per_album:
                kept.append(seq)
                seen[seq.story.album_id] = c + 1
        sequences = kept
    val_sequences = load_dataset(args.val) if args.val else None
    if args.stage == 1:
        vocab = _load_vocab_for(args.dataset)
        model_kwargs.setdefault("feature_dim", sequences[0].features.shape[1])
        model_kwargs["vocab_size"] = len(vocab)
        model_cfg = ModelConfig(**model_kwargs)
        mode = ANCHOR_ZERO if args.image_only else ANCHOR_GOLD
        ckpt = train_stage1(sequences, vocab, model_cfg, cfg, anchor_mode=mode,
                            val_sequences=val_sequences, log_path=args.log)
    else:
        if not args.checkpoint or not Path(args.checkpoint).exists():
            raise DataError("train --stage 2 needs --checkpoint with a "
                            "stage-1 checkpoint")
        parent = Checkpoint.load(args.checkpoint)
        if parent.meta.get("stage") != 1:
            raise DataError(f"{args.checkpoint} is not a stage-1 checkpoint")
        ckpt = train_stage2(parent, sequences, cfg, val_sequences=val_sequences,
                            log_path=args.log)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ckpt.save(out)
    print(f"stage {args.stage} checkpoint {ckpt.checkpoint_id} "
          f"(epoch {ckpt.meta['epoch']}, val_meteor {ckpt.meta['val_meteor']}) "
          f"-> {out}")
    return 0


def cmd_generate(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    model, vocab, _ = ckpt.restore()
    sequences = load_dataset(args.dataset)
    if args.oracle_anchors:
        mode = ANCHOR_GOLD
    elif args.image_only:
        mode = ANCHOR_ZERO
    else:
        mode = ANCHOR_PREDICTED
    samples = _one_sequence_per_album(sequences)
    if mode == ANCHOR_GOLD and any(s.anchors is None for s in samples):
        raise DataError("--oracle-anchors needs anchors in the dataset")
    generated = [generate_story(model, seq, vocab, mode, args.beam,
                                model.config.max_sentence_len)
                 for seq in samples]
    write_generated(args.out, generated)
    print(f"generated {len(generated)} stories ({mode} anchors, beam {args.beam}) "
          f"-> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    generated = read_generated(args.generated)
    sequences = load_dataset(args.dataset)
    refs = references_by_album(sequences)
    scores = evaluate_run(generated, refs, k_refs=args.k_refs)
    report = aggregate([scores], len(generated))
    if args.out:
        save_report(args.out, report)
    print(format_table({"run": report}))
    return 0


def cmd_ablate(args) -> int:
    merged = _load_config(args.config, {"epochs": args.epochs, "lr": args.lr,
                                        "batch_size": args.batch_size,
                                        "seed": args.seed})
    model_kwargs, train_kwargs = _split_config(merged)
    cfg = TrainConfig(**train_kwargs)
    sequences = load_dataset(args.dataset)
    val_sequences = load_dataset(args.val)
    vocab = _load_vocab_for(args.dataset)
    model_kwargs.setdefault("feature_dim", sequences[0].features.shape[1])
    model_kwargs["vocab_size"] = len(vocab)
    model_cfg = ModelConfig(**model_kwargs)
    pos_classes = [_POS_FLAG[p] for p in args.pos]
    table = run_ablation(sequences, val_sequences, vocab, model_cfg, cfg,
                         pos_classes, runs=args.runs, anchor_seed=cfg.seed,
                         beam_size=args.beam)
    print(format_table(table))
    if args.out:
        with open(args.out, "w") as f:
            json.dump({k: v.to_json() for k, v in table.items()}, f,
                      sort_keys=True, indent=1)
    return 0


def cmd_human_baseline(args) -> int:
    sequences = load_dataset(args.dataset)
    refs = references_by_album(sequences)
    model_runs = {}
    for spec in args.generated or []:
        name, _, path = spec.partition("=")
        if not path:
            raise ConfigError(f"--generated expects NAME=PATH, got {spec!r}")
        model_runs[name] = read_generated(path)
    human, models = human_baseline(refs, model_runs, runs=args.runs,
                                   rng_seed=args.seed)
    rows = {"Human": human}
    rows.update(models)
    print(format_table(rows))
    if args.out:
        with open(args.out, "w") as f:
            json.dump({k: v.to_json() for k, v in rows.items()}, f,
                      sort_keys=True, indent=1)
    return 0


def cmd_gradcheck(args) -> int:
    results = gc.run_all(eps=args.eps, seed=args.seed)
    worst = max(results.values())
    for name, err in sorted(results.items()):
        print(f"{name:<24} max rel err {err:.3e}")
    status = "PASS" if worst <= args.tolerance else "FAIL"
    print(f"{status}: worst {worst:.3e} vs tolerance {args.tolerance:g}")
    if status == "FAIL":
        print("error:gradcheck-failed: worst relative error "
              f"{worst:.3e} > {args.tolerance:g}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="storyanchor",
        description="Anchor-word visual storytelling pipeline")
    parser.add_argument("--log-level", default=os.environ.get("STORYANCHOR_LOG", "warn"),
                        choices=["debug", "info", "warn"])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        p.add_argument("--seed", type=int, default=0, help="root RNG seed (default 0)")
        if dataset:
            p.add_argument("--dataset", help="dataset manifest (JSON lines)")

    p = sub.add_parser("prepare", help="assign anchor words / build synthetic data")
    common(p)
    p.add_argument("--lexicon", help="POS lexicon file (token TAB classes)")
    p.add_argument("--pos", default="noun", choices=sorted(_POS_FLAG),
                   help="anchor POS class (default noun)")
    p.add_argument("--min-freq", type=int, default=1,
                   help="vocabulary frequency threshold (default 1)")
    p.add_argument("--out", required=True, help="output manifest path or synth dir")
    p.add_argument("--synth-albums", type=int, default=0,
                   help="generate this many synthetic albums instead of reading "
                        "--dataset (default 0 = off)")
    p.add_argument("--synth-refs", type=int, default=1)
    p.add_argument("--synth-images", type=int, default=5)
    p.add_argument("--synth-feature-dim", type=int, default=32)
    p.add_argument("--synth-noise", type=float, default=0.1)
    p.add_argument("--synth-nouns", type=int, default=12)
    p.add_argument("--synth-verbs", type=int, default=6)
    p.add_argument("--synth-adjs", type=int, default=5)
    p.add_argument("--synth-advs", type=int, default=4)
    p.add_argument("--correlation", type=float, default=1.0,
                   help="feature/noun correlation for synthetic data (default 1)")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("stats", help="corpus statistics table")
    common(p)
    p.add_argument("--lexicon")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="stage-1 / stage-2 training")
    common(p)
    p.add_argument("--stage", type=int, required=True, choices=[1, 2])
    p.add_argument("--val", help="validation manifest")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--checkpoint", help="stage-1 parent checkpoint (stage 2)")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--log", help="JSON-lines training log path")
    p.add_argument("--image-only", action="store_true",
                   help="train the image-only ablation (zero anchor slot)")
    p.add_argument("--max-stories-per-album", type=int, default=0)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    p.set_defaults(func=cmd_train, seed=None)

    p = sub.add_parser("generate", help="beam-search story generation")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=3, help="beam size (default 3)")
    p.add_argument("--oracle-anchors", action="store_true",
                   help="condition on ground-truth anchors")
    p.add_argument("--image-only", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score generated stories")
    common(p)
    p.add_argument("--generated", required=True, help="decoder JSONL output")
    p.add_argument("--k-refs", type=int, default=5, dest="k_refs",
                   help="references per album (default 5)")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="image-only vs per-POS anchored models")
    common(p)
    p.add_argument("--val", required=True)
    p.add_argument("--config")
    p.add_argument("--pos", nargs="+", default=["noun"],
                   choices=sorted(_POS_FLAG))
    p.add_argument("--runs", type=int, default=3, help="seeds per row (default 3)")
    p.add_argument("--beam", type=int, default=3)
    p.add_argument("--out")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("human-baseline",
                       help="leave-one-out human score on 5-reference albums")
    common(p)
    p.add_argument("--generated", nargs="*", metavar="NAME=PATH",
                   help="model outputs to re-score against 4 references")
    p.add_argument("--runs", type=int, default=5, help="sampling runs (default 5)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_human_baseline)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    common(p, dataset=False)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level={"debug": logging.DEBUG, "info": logging.INFO,
                               "warn": logging.WARNING}[args.log_level])
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error:config: {e}", file=sys.stderr)
        return 2
    except (DataError, FormatError, FileNotFoundError) as e:
        print(f"error:data: {e}", file=sys.stderr)
        return 3
    except DivergedError as e:
        print(f"error:diverged: {e}", file=sys.stderr)
        return 4
    except StoryAnchorError as e:
        print(f"error:internal: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
