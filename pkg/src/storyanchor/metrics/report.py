"""Corpus evaluation protocol and multi-run reporting.

Stories are scored at album level: the generated story's sentences are
joined into one token sequence and scored against every reference story
of the same album. Multi-run reports carry mean and std per metric.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..corpus import StorySequence, group_by_album
from ..decoding import GeneratedStory
from ..errors import DataError
from .scores import EvalInstance, bleu, cider, meteor_lite, rouge_l

METRIC_NAMES = ("bleu1", "bleu2", "bleu3", "bleu4", "meteor_lite", "rouge_l", "cider")

_TABLE_HEADERS = {"bleu1": "B@1", "bleu2": "B@2", "bleu3": "B@3", "bleu4": "B@4",
                  "meteor_lite": "M", "rouge_l": "R", "cider": "C"}


@dataclass
class MetricReport:
    """Per-metric mean/std over runs."""

    means: dict[str, float]
    stds: dict[str, float]
    n_instances: int
    n_runs: int

    def to_json(self) -> dict:
        return {"means": self.means, "stds": self.stds,
                "n_instances": self.n_instances, "n_runs": self.n_runs}

    @staticmethod
    def from_json(obj: dict) -> "MetricReport":
        return MetricReport(obj["means"], obj["stds"],
                            obj["n_instances"], obj["n_runs"])


def compute_all(instances: list[EvalInstance]) -> dict[str, float]:
    """Single-run scores for every metric."""
    return {
        "bleu1": bleu(instances, 1),
        "bleu2": bleu(instances, 2),
        "bleu3": bleu(instances, 3),
        "bleu4": bleu(instances, 4),
        "meteor_lite": meteor_lite(instances),
        "rouge_l": rouge_l(instances),
        "cider": cider(instances),
    }


def aggregate(runs: list[dict[str, float]], n_instances: int) -> MetricReport:
    """Mean/std (population std; 0 for a single run) over per-run scores."""
    means = {}
    stds = {}
    for name in METRIC_NAMES:
        values = np.array([r[name] for r in runs])
        means[name] = float(values.mean())
        stds[name] = float(values.std())
    return MetricReport(means, stds, n_instances, len(runs))


def build_instances(generated: list[GeneratedStory],
                    refs_per_album: dict[str, list[list[list[str]]]],
                    k_refs: int | None = 5) -> list[EvalInstance]:
    """Pair each generated story with its album's reference stories.

    ``refs_per_album`` maps album id to reference stories, each a list of
    sentences (token lists). Sentences are joined before scoring. With
    ``k_refs`` set, the first k_refs references are used and albums with
    fewer raise a data error naming the album.
    """
    instances = []
    for g in generated:
        refs = refs_per_album.get(g.album_id)
        if refs is None:
            raise DataError(f"album {g.album_id}: no references in the dataset")
        if k_refs is not None:
            if len(refs) < k_refs:
                raise DataError(f"album {g.album_id}: {len(refs)} references, "
                                f"need {k_refs}")
            refs = refs[:k_refs]
        hyp = [tok for sent in g.sentences for tok in sent]
        flat_refs = [[tok for sent in ref for tok in sent] for ref in refs]
        instances.append(EvalInstance(hyp, flat_refs))
    return instances


def references_by_album(sequences: list[StorySequence]) -> dict[str, list[list[list[str]]]]:
    """Album id -> list of reference stories (manifest order)."""
    return {album: [s.story.sentences for s in seqs]
            for album, seqs in group_by_album(sequences).items()}


def evaluate_run(generated: list[GeneratedStory],
                 refs_per_album: dict[str, list[list[list[str]]]],
                 k_refs: int | None = 5) -> dict[str, float]:
    """Score one generation run against the album references."""
    return compute_all(build_instances(generated, refs_per_album, k_refs))


def evaluate_runs(runs: list[list[GeneratedStory]],
                  refs_per_album: dict[str, list[list[list[str]]]],
                  k_refs: int | None = 5) -> MetricReport:
    """Mean/std report over multiple generation runs (e.g. 3 seeds)."""
    scores = [evaluate_run(g, refs_per_album, k_refs) for g in runs]
    n_instances = len(runs[0]) if runs else 0
    return aggregate(scores, n_instances)


def human_baseline(refs_per_album: dict[str, list[list[list[str]]]],
                   model_runs: dict[str, list[GeneratedStory]] | None = None,
                   runs: int = 5, rng_seed: int = 0,
                   ) -> tuple[MetricReport, dict[str, MetricReport]]:
    """Leave-one-out human score plus model re-scoring on 4 references.

    Per run and album, one of the 5 reference stories is drawn as the
    "generated" story and scored against the remaining 4; model stories
    for that album are re-scored against the same 4. Albums without
    exactly 5 references are skipped with a warning.
    """
    usable = {}
    for album, refs in refs_per_album.items():
        if len(refs) != 5:
            warnings.warn(f"album {album}: {len(refs)} references, skipped "
                          "by the human baseline (needs exactly 5)", stacklevel=2)
            continue
        usable[album] = refs
    if not usable:
        raise DataError("human baseline: no albums with exactly 5 references")
    model_runs = model_runs or {}

    rng = np.random.default_rng(rng_seed)
    human_scores = []
    model_scores: dict[str, list[dict[str, float]]] = {m: [] for m in model_runs}
    for _ in range(runs):
        held_out = {album: int(rng.integers(5)) for album in sorted(usable)}
        human_instances = []
        for album, j in held_out.items():
            refs = usable[album]
            hyp = [tok for sent in refs[j] for tok in sent]
            others = [[tok for sent in refs[i] for tok in sent]
                      for i in range(5) if i != j]
            human_instances.append(EvalInstance(hyp, others))
        human_scores.append(compute_all(human_instances))
        for name, generated in model_runs.items():
            instances = []
            for g in generated:
                if g.album_id not in usable:
                    continue
                j = held_out[g.album_id]
                refs = usable[g.album_id]
                others = [[tok for sent in refs[i] for tok in sent]
                          for i in range(5) if i != j]
                instances.append(EvalInstance(
                    [tok for sent in g.sentences for tok in sent], others))
            model_scores[name].append(compute_all(instances))
    n = len(usable)
    human_report = aggregate(human_scores, n)
    model_reports = {name: aggregate(scores, n)
                     for name, scores in model_scores.items()}
    return human_report, model_reports


def format_table(rows: dict[str, MetricReport]) -> str:
    """Plain-text metric table (one row per labeled report)."""
    label_w = max(len(label) for label in rows) if rows else 6
    label_w = max(label_w, 6)
    header = "Method".ljust(label_w) + "".join(
        f"  {_TABLE_HEADERS[m]:>13}" for m in METRIC_NAMES)
    lines = [header, "-" * len(header)]
    for label, report in rows.items():
        cells = []
        for m in METRIC_NAMES:
            cells.append(f"  {report.means[m]:7.4f}±{report.stds[m]:5.3f}")
        lines.append(label.ljust(label_w) + "".join(cells))
    return "\n".join(lines)


def save_report(path, report: MetricReport):
    with open(path, "w") as f:
        json.dump(report.to_json(), f, sort_keys=True, indent=1)
