import json

import numpy as np
import pytest

from storyanchor import training as TR
from storyanchor.corpus import (UNK, VocabSpec, assign_anchors, build_vocab,
                                stories, synth_corpus)
from storyanchor.errors import DataError
from storyanchor.model import ANCHOR_PREDICTED, ModelConfig
from storyanchor.tensor import constant, mse

from conftest import tiny_config


class TestSchedule:
    def cfg(self, **kw):
        return TR.TrainConfig(**kw)

    def test_default_schedule_golden(self):
        cfg = self.cfg()
        got = [TR.ss_probability(e, cfg) for e in range(31)]
        want = ([0.05] * 5 + [0.10] * 5 + [0.15] * 5 + [0.20] * 5
                + [0.25] * 11)
        assert got == pytest.approx(want)

    def test_cap_is_value_before_cap_epoch(self):
        cfg = self.cfg(ss_p0=0.1, ss_delta=0.2, ss_period=3, ss_cap_epoch=7)
        # value just before epoch 7 is 0.1 + 0.2 * (6 // 3) = 0.5
        assert TR.ss_probability(100, cfg) == pytest.approx(0.5)
        assert TR.ss_probability(2, cfg) == pytest.approx(0.1)

    def test_negative_epoch_rejected(self):
        with pytest.raises(ValueError):
            TR.ss_probability(-1, self.cfg())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TR.TrainConfig(lr=0.0)
        with pytest.raises(ValueError):
            TR.TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TR.TrainConfig(ss_p0=-0.1)


class TestAnchorTargets:
    def test_rows_copied(self, toy_dataset):
        seqs, _, _ = toy_dataset
        table = np.arange(40, dtype=np.float64).reshape(20, 2)
        anchors = seqs[0].anchors
        targets = TR.anchor_targets(table, anchors)
        assert len(targets) == len(anchors)
        np.testing.assert_array_equal(targets[0], table[anchors[0].vocab_id])
        targets[0][:] = -1.0
        assert table[anchors[0].vocab_id][0] != -1.0  # copy, not a view

    def test_out_of_range_rejected(self):
        from storyanchor.corpus import AnchorAssignment
        bad = AnchorAssignment("x", 50, "NOUN", False)
        with pytest.raises(IndexError):
            TR.anchor_targets(np.zeros((10, 4)), [bad])


def small_setup(n_albums=4, seed=7):
    seqs, _ = synth_corpus(seed, n_albums, VocabSpec(5, 3, 2, 2), 1.0,
                           n_images=3, feature_dim=8, feature_noise=0.0)
    vocab = build_vocab(stories(seqs))
    assign_anchors(seqs, "NOUN", vocab, 0)
    mcfg = tiny_config(vocab_size=len(vocab), feature_dim=8, n_images=3)
    return seqs, vocab, mcfg


def quick_train(epochs=2, **kw):
    seqs, vocab, mcfg = small_setup()
    cfg = TR.TrainConfig(lr=3e-3, batch_size=2, epochs=epochs, seed=1,
                         max_sentence_len=8, **kw)
    return TR.train_stage1(seqs, vocab, mcfg, cfg), seqs, vocab, cfg


class TestStage1:
    def test_empty_dataset_rejected(self):
        _, vocab, mcfg = small_setup()
        with pytest.raises(DataError):
            TR.train_stage1([], vocab, mcfg, TR.TrainConfig())

    def test_gold_mode_requires_anchors(self):
        seqs, vocab, mcfg = small_setup()
        for s in seqs:
            s.anchors = None
        with pytest.raises(DataError):
            TR.train_stage1(seqs, vocab, mcfg, TR.TrainConfig(epochs=1))

    def test_same_seed_byte_identical(self):
        a, *_ = quick_train()
        b, *_ = quick_train()
        assert a.data == b.data
        assert a.checkpoint_id == b.checkpoint_id

    def test_different_seed_differs(self):
        seqs, vocab, mcfg = small_setup()
        a = TR.train_stage1(seqs, vocab, mcfg,
                            TR.TrainConfig(lr=3e-3, batch_size=2, epochs=1, seed=1))
        b = TR.train_stage1(seqs, vocab, mcfg,
                            TR.TrainConfig(lr=3e-3, batch_size=2, epochs=1, seed=2))
        assert a.data != b.data

    def test_best_checkpoint_by_validation_score(self):
        scripted = [0.1, 0.3, 0.2]
        seqs, vocab, mcfg = small_setup()
        cfg = TR.TrainConfig(lr=3e-3, batch_size=2, epochs=3, seed=1,
                             max_sentence_len=8)
        best = TR.train_stage1(seqs, vocab, mcfg, cfg,
                               val_metric_fn=lambda e, m: scripted[e])
        assert best.meta["epoch"] == 1
        assert best.meta["val_meteor"] == pytest.approx(0.3)

    def test_checkpoint_meta_and_restore(self):
        ckpt, seqs, vocab, _ = quick_train()
        assert ckpt.meta["stage"] == 1
        assert ckpt.meta["anchor_mode"] == "gold"
        model, vocab2, adam = ckpt.restore()
        assert vocab2.id_to_token == vocab.id_to_token
        assert adam is not None and adam.step > 0
        assert model.config.vocab_size == len(vocab)

    def test_log_file_records(self, tmp_path):
        seqs, vocab, mcfg = small_setup()
        log = tmp_path / "train.jsonl"
        cfg = TR.TrainConfig(lr=3e-3, batch_size=2, epochs=2, seed=1,
                             max_sentence_len=8)
        TR.train_stage1(seqs, vocab, mcfg, cfg, log_path=log)
        records = [json.loads(l) for l in log.read_text().splitlines()]
        assert len(records) == 2
        for k in ("epoch", "stage", "loss", "ss_prob", "val_meteor",
                  "checkpoint_path"):
            assert k in records[0]
        assert records[0]["stage"] == 1

    def test_loss_decreases_over_training(self, tmp_path):
        seqs, vocab, mcfg = small_setup()
        log = tmp_path / "t.jsonl"
        cfg = TR.TrainConfig(lr=1e-2, batch_size=4, epochs=40, seed=3,
                             max_sentence_len=8, ss_p0=0.0, ss_delta=0.0)
        TR.train_stage1(seqs, vocab, mcfg, cfg, log_path=log)
        losses = [json.loads(l)["loss"] for l in log.read_text().splitlines()]
        assert losses[-1] < 0.5 * losses[0]


def predictor_mse(ckpt, seqs):
    model, _, _ = ckpt.restore()
    embed = model.params["embed"].data
    total, n = 0.0, 0
    for seq in seqs:
        targets = TR.anchor_targets(embed, seq.anchors)
        for f, t in zip(seq.features, targets):
            total += float(mse(model.predict_anchor(f), constant(t)).data)
            n += 1
    return total / n


class TestStage2:
    def test_non_predictor_params_frozen(self):
        stage1, seqs, vocab, cfg = quick_train()
        stage2 = TR.train_stage2(stage1, seqs, cfg)
        m1, _, _ = stage1.restore()
        m2, _, _ = stage2.restore()
        predictor = set(m1.predictor_names())
        changed = []
        for name in m1.params.names():
            same = np.array_equal(m1.params[name].data, m2.params[name].data)
            if name in predictor:
                changed.append(not same)
            else:
                assert same, f"frozen parameter {name} moved"
        assert any(changed)

    def test_meta_links_parent(self):
        stage1, seqs, _, cfg = quick_train()
        stage2 = TR.train_stage2(stage1, seqs, cfg)
        assert stage2.meta["stage"] == 2
        assert stage2.meta["parent"] == stage1.checkpoint_id
        assert stage2.meta["anchor_mode"] == ANCHOR_PREDICTED

    def test_predictor_regression_improves(self):
        stage1, seqs, vocab, _ = quick_train(epochs=3)
        before = predictor_mse(stage1, seqs)
        cfg = TR.TrainConfig(lr=5e-3, batch_size=4, epochs=30, seed=2,
                             max_sentence_len=8, stage2_gen_weight=0.0)
        stage2 = TR.train_stage2(stage1, seqs, cfg)
        after = predictor_mse(stage2, seqs)
        assert after < 0.1 * before

    def test_requires_anchors(self):
        stage1, seqs, _, cfg = quick_train()
        for s in seqs:
            s.anchors = None
        with pytest.raises(DataError):
            TR.train_stage2(stage1, seqs, cfg)
