"""Dataset model: tokenization, vocabulary, POS lookup, anchor words,
corpus statistics, manifest I/O, and the synthetic-corpus generator.

A dataset manifest is JSON Lines, one object per *story*; stories
sharing an ``album_id`` are the album's reference set:

    {"album_id": ..., "image_ids": [...], "sentences": [[token,...] x N],
     "pos_tags": [[[tag,...] per token] x N]   (optional),
     "anchors": [{...} x N]                    (optional, added by prepare),
     "feature_file": "feats.safv", "feature_indices": [...]}
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import features as feat_io
from .errors import DataError, FormatError
from .rng import stream

POS_CLASSES = ("NOUN", "VERB", "ADJ", "ADV")

PAD, BOS, EOS, UNK = 0, 1, 2, 3
PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN = "<pad>", "<bos>", "<eos>", "UNK"

# Word characters, contraction suffixes kept whole ('s, 't, ...), all other
# non-space characters as standalone tokens.
_TOKEN_RE = re.compile(r"'\w+|\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into tokens; punctuation stands alone.

    Contraction suffixes stay attached to the apostrophe:
    "It's fun" -> ["it", "'s", "fun"].
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Story:
    """One narrative: N ordered sentences paired with N image ids."""

    album_id: str
    sentences: list[list[str]]
    image_ids: list[str]

    def __post_init__(self):
        n = len(self.sentences)
        if n < 1:
            raise DataError(f"story {self.album_id}: needs at least one sentence")
        if len(self.image_ids) != n:
            raise DataError(f"story {self.album_id}: {n} sentences vs "
                            f"{len(self.image_ids)} image ids")
        if any(len(s) == 0 for s in self.sentences):
            raise DataError(f"story {self.album_id}: empty sentence after tokenization")

    @property
    def n(self) -> int:
        return len(self.sentences)


@dataclass
class AnchorAssignment:
    """One anchor word per sentence; UNK when the POS class is absent."""

    word: str
    vocab_id: int
    pos_class: str
    is_unk: bool

    def to_json(self) -> dict:
        return {"word": self.word, "vocab_id": self.vocab_id,
                "pos_class": self.pos_class, "is_unk": self.is_unk}

    @staticmethod
    def from_json(obj: dict) -> "AnchorAssignment":
        return AnchorAssignment(obj["word"], obj["vocab_id"],
                                obj["pos_class"], obj["is_unk"])


@dataclass
class StorySequence:
    """A story plus its N feature vectors and optional anchors/tags."""

    story: Story
    features: np.ndarray  # (N, D) float64
    anchors: list[AnchorAssignment] | None = None
    pos_tags: list[list[frozenset]] | None = None
    # manifest bookkeeping, set by load_dataset / write_synth_corpus
    feature_file: str | None = None
    feature_indices: list[int] | None = None

    def __post_init__(self):
        if self.features.shape[0] != self.story.n:
            raise DataError(f"story {self.story.album_id}: {self.story.n} sentences "
                            f"vs {self.features.shape[0]} feature vectors")


class PosLexicon:
    """token -> set of POS classes; unknown tokens map to the empty set."""

    def __init__(self, table: dict[str, frozenset] | None = None):
        self._table = dict(table or {})

    def lookup(self, token: str) -> frozenset:
        return self._table.get(token, frozenset())

    def __len__(self):
        return len(self._table)

    @staticmethod
    def load(path) -> "PosLexicon":
        table = {}
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                try:
                    token, tags = line.split("\t")
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: expected 'token<TAB>tags'") from None
                classes = frozenset(tags.split(","))
                bad = classes - set(POS_CLASSES)
                if bad:
                    raise FormatError(f"{path}:{lineno}: unknown POS classes {sorted(bad)}")
                table[token] = classes
        return PosLexicon(table)

    def save(self, path):
        with open(path, "w") as f:
            for token in sorted(self._table):
                f.write(f"{token}\t{','.join(sorted(self._table[token]))}\n")


def tag_pos(tokens: list[str], lexicon: PosLexicon) -> list[frozenset]:
    """One (possibly empty) POS-class set per token."""
    return [lexicon.lookup(t) for t in tokens]


class Vocabulary:
    """token<->id map with fixed special ids PAD=0, BOS=1, EOS=2, UNK=3."""

    def __init__(self, tokens: list[str], min_frequency: int = 1):
        self.min_frequency = min_frequency
        self.id_to_token = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN] + list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise DataError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.id_to_token)

    def encode_token(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.encode_token(t) for t in tokens]

    def encode_sentence(self, tokens: list[str], max_len: int = 25) -> list[int]:
        """Token ids truncated to ``max_len`` including the trailing EOS."""
        ids = self.encode(tokens[:max_len - 1])
        ids.append(EOS)
        return ids

    def decode(self, ids: list[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def to_json(self) -> dict:
        return {"tokens": self.id_to_token[4:], "min_frequency": self.min_frequency}

    @staticmethod
    def from_json(obj: dict) -> "Vocabulary":
        return Vocabulary(obj["tokens"], obj["min_frequency"])


def build_vocab(corpus: list[Story], min_freq: int = 1) -> Vocabulary:
    """Frequency-thresholded vocabulary; ids by frequency desc, then token."""
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    if not corpus:
        raise DataError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for story in corpus:
        for sentence in story.sentences:
            counts.update(sentence)
    kept = [t for t, c in counts.items() if c >= min_freq]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(kept, min_frequency=min_freq)


def extract_anchor(sentence: list[str], tags: list[frozenset], pos_class: str,
                   rng: np.random.Generator, vocab: Vocabulary) -> AnchorAssignment:
    """Pick one token of ``pos_class`` uniformly; UNK if none exists."""
    if pos_class not in POS_CLASSES:
        raise ValueError(f"unknown POS class {pos_class!r}")
    candidates = [i for i, t in enumerate(tags) if pos_class in t]
    if not candidates:
        return AnchorAssignment(UNK_TOKEN, UNK, pos_class, True)
    idx = candidates[int(rng.integers(len(candidates)))]
    word = sentence[idx]
    return AnchorAssignment(word, vocab.encode_token(word), pos_class, False)


def assign_anchors(sequences: list[StorySequence], pos_class: str, vocab: Vocabulary,
                   seed: int) -> None:
    """Assign anchors in place for every sentence of every story.

    Part of dataset preparation: stage-1 and stage-2 training see the
    same assignments for a given seed.
    """
    rng = stream(seed, "anchor-selection")
    for seq in sequences:
        if seq.pos_tags is None:
            raise DataError(f"story {seq.story.album_id}: POS tags required "
                            "for anchor extraction")
        seq.anchors = [extract_anchor(s, t, pos_class, rng, vocab)
                       for s, t in zip(seq.story.sentences, seq.pos_tags)]


@dataclass
class CorpusStats:
    vocab_size: int = 0
    avg_sentence_length: float = 0.0
    n_nouns: int = 0
    n_verbs: int = 0
    n_adjectives: int = 0
    n_adverbs: int = 0


def corpus_stats(corpus: list[Story], lexicon: PosLexicon) -> CorpusStats:
    """Distinct-word-per-POS counts and average sentence length."""
    if not corpus:
        return CorpusStats()
    distinct: dict[str, set] = {c: set() for c in POS_CLASSES}
    vocab: set[str] = set()
    total_tokens = 0
    n_sentences = 0
    for story in corpus:
        for sentence in story.sentences:
            n_sentences += 1
            total_tokens += len(sentence)
            for token in sentence:
                vocab.add(token)
                for c in lexicon.lookup(token):
                    distinct[c].add(token)
    return CorpusStats(
        vocab_size=len(vocab),
        avg_sentence_length=total_tokens / n_sentences,
        n_nouns=len(distinct["NOUN"]),
        n_verbs=len(distinct["VERB"]),
        n_adjectives=len(distinct["ADJ"]),
        n_adverbs=len(distinct["ADV"]),
    )


def avg_pos_per_sentence(corpus: list[Story], lexicon: PosLexicon) -> dict[str, float]:
    """Mean POS-class occurrences per sentence (multi-tagged words count
    toward each of their classes)."""
    totals = {c: 0 for c in POS_CLASSES}
    n_sentences = 0
    for story in corpus:
        for sentence in story.sentences:
            n_sentences += 1
            for token in sentence:
                for c in lexicon.lookup(token):
                    totals[c] += 1
    if n_sentences == 0:
        return {c: 0.0 for c in POS_CLASSES}
    return {c: totals[c] / n_sentences for c in POS_CLASSES}


# ---------------------------------------------------------------------------
# Manifest I/O

def load_dataset(manifest_path) -> list[StorySequence]:
    """Load a JSONL manifest, pairing every story with its feature rows."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    feature_cache: dict[str, np.ndarray] = {}
    sequences: list[StorySequence] = []
    dim: int | None = None
    with open(manifest_path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            story = Story(obj["album_id"], obj["sentences"], obj["image_ids"])
            ffile = obj["feature_file"]
            if ffile not in feature_cache:
                fpath = base / ffile
                if not fpath.exists():
                    raise DataError(f"{manifest_path}:{lineno}: feature file "
                                    f"{ffile} not found")
                feature_cache[ffile] = feat_io.read_features(fpath)
            table = feature_cache[ffile]
            indices = obj["feature_indices"]
            if len(indices) != story.n:
                raise DataError(f"{manifest_path}:{lineno}: {len(indices)} feature "
                                f"indices for {story.n} images")
            for image_id, idx in zip(story.image_ids, indices):
                if not 0 <= idx < table.shape[0]:
                    raise DataError(f"{manifest_path}:{lineno}: feature row {idx} "
                                    f"for image {image_id} out of range "
                                    f"(file has {table.shape[0]} rows)")
            rows = table[np.asarray(indices, dtype=int)]
            if dim is None:
                dim = rows.shape[1]
            elif rows.shape[1] != dim:
                raise FormatError(f"{manifest_path}:{lineno}: feature dim "
                                  f"{rows.shape[1]} != corpus dim {dim}")
            tags = None
            if "pos_tags" in obj:
                tags = [[frozenset(t) for t in sent] for sent in obj["pos_tags"]]
            anchors = None
            if "anchors" in obj:
                anchors = [AnchorAssignment.from_json(a) for a in obj["anchors"]]
            sequences.append(StorySequence(story, rows, anchors, tags,
                                           feature_file=ffile,
                                           feature_indices=list(indices)))
    if not sequences:
        raise DataError(f"{manifest_path}: empty manifest")
    return sequences


def save_dataset(manifest_path, sequences: list[StorySequence]) -> None:
    """Write a JSONL manifest; every sequence must carry its feature-file
    bookkeeping (set by load_dataset or write_synth_corpus)."""
    with open(manifest_path, "w") as f:
        for seq in sequences:
            if seq.feature_file is None or seq.feature_indices is None:
                raise DataError(f"story {seq.story.album_id}: no feature-file "
                                "bookkeeping to persist")
            obj = {
                "album_id": seq.story.album_id,
                "image_ids": seq.story.image_ids,
                "sentences": seq.story.sentences,
                "feature_file": seq.feature_file,
                "feature_indices": seq.feature_indices,
            }
            if seq.pos_tags is not None:
                obj["pos_tags"] = [[sorted(t) for t in sent] for sent in seq.pos_tags]
            if seq.anchors is not None:
                obj["anchors"] = [a.to_json() for a in seq.anchors]
            f.write(json.dumps(obj, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Synthetic corpus

@dataclass
class VocabSpec:
    """Sizes of the synthetic word pools."""

    n_nouns: int = 12
    n_verbs: int = 6
    n_adjs: int = 5
    n_advs: int = 4

    def words(self) -> dict[str, list[str]]:
        return {
            "NOUN": [f"noun{i:02d}" for i in range(self.n_nouns)],
            "VERB": [f"verb{i:02d}" for i in range(self.n_verbs)],
            "ADJ": [f"adj{i:02d}" for i in range(self.n_adjs)],
            "ADV": [f"adv{i:02d}" for i in range(self.n_advs)],
        }


# Per-reference sentence templates; the noun-dependent slots make metric
# scores sensitive to getting the noun right.
_TEMPLATES = (
    ("the", "{noun}", "{verb}", "{adv}", "."),
    ("a", "{adj}", "{noun}", "{verb}", "."),
    ("the", "{noun}", "{verb}", "."),
    ("one", "{adj}", "{noun}", "{verb}", "{adv}", "."),
    ("this", "{noun}", "{verb}", "there", "."),
)

_FUNCTION_WORDS = ("the", "a", "one", "this", "there", ".")


def synth_lexicon(spec: VocabSpec) -> PosLexicon:
    table = {}
    for cls, words in spec.words().items():
        for w in words:
            table[w] = frozenset({cls})
    return PosLexicon(table)


def synth_corpus(rng_seed: int, n_albums: int, vocab_spec: VocabSpec,
                 correlation: float, n_images: int = 5, n_refs: int = 1,
                 feature_dim: int = 32, feature_noise: float = 0.1,
                 ) -> tuple[list[StorySequence], PosLexicon]:
    """Synthetic albums whose features cluster by each sentence's noun.

    Every image carries one latent noun id; its sentence is a fixed
    template filled with words derived deterministically from that noun.
    With ``correlation`` = 1 the feature vector is the noun's cluster
    center (plus isotropic noise well below cluster separation), so
    features perfectly predict the noun; with 0 the cluster is drawn
    independently of the text. Deterministic given the seed.
    """
    if not 0.0 <= correlation <= 1.0:
        raise ValueError(f"correlation must be in [0, 1], got {correlation}")
    words = vocab_spec.words()
    centers = stream(rng_seed, "centers").standard_normal(
        (vocab_spec.n_nouns, feature_dim))
    rng = stream(rng_seed, "synth")
    lexicon = synth_lexicon(vocab_spec)
    sequences: list[StorySequence] = []
    for a in range(n_albums):
        album_id = f"album{a:04d}"
        image_ids = [f"{album_id}_img{i}" for i in range(n_images)]
        noun_ids = rng.integers(vocab_spec.n_nouns, size=n_images)
        feats = np.empty((n_images, feature_dim))
        for i, k in enumerate(noun_ids):
            cluster = int(k) if rng.random() < correlation \
                else int(rng.integers(vocab_spec.n_nouns))
            feats[i] = centers[cluster] + feature_noise * rng.standard_normal(feature_dim)
        for r in range(n_refs):
            template = _TEMPLATES[r % len(_TEMPLATES)]
            sentences = []
            for k in noun_ids:
                k = int(k)
                slots = {
                    "noun": words["NOUN"][k],
                    "verb": words["VERB"][k % vocab_spec.n_verbs],
                    "adj": words["ADJ"][k % vocab_spec.n_adjs],
                    "adv": words["ADV"][k % vocab_spec.n_advs],
                }
                sentences.append([t.format(**slots) for t in template])
            story = Story(album_id, sentences, image_ids)
            tags = [tag_pos(s, lexicon) for s in sentences]
            sequences.append(StorySequence(story, feats.copy(), None, tags))
    return sequences, lexicon


def write_synth_corpus(out_dir, sequences: list[StorySequence],
                       lexicon: PosLexicon, name: str = "dataset") -> Path:
    """Persist a synthetic corpus (manifest + SAFV features + lexicon)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    row_index: dict[str, int] = {}
    rows = []
    for seq in sequences:
        for image_id, vec in zip(seq.story.image_ids, seq.features):
            if image_id not in row_index:
                row_index[image_id] = len(rows)
                rows.append(vec)
        seq.feature_file = f"{name}.safv"
        seq.feature_indices = [row_index[i] for i in seq.story.image_ids]
    ids = sorted(row_index, key=row_index.get)
    feat_io.write_features(out_dir / name, np.asarray(rows), ids)
    manifest_path = out_dir / f"{name}.jsonl"
    save_dataset(manifest_path, sequences)
    lexicon.save(out_dir / f"{name}.lexicon.txt")
    return manifest_path


def stories(sequences: list[StorySequence]) -> list[Story]:
    return [s.story for s in sequences]


def group_by_album(sequences: list[StorySequence]) -> dict[str, list[StorySequence]]:
    groups: dict[str, list[StorySequence]] = {}
    for seq in sequences:
        groups.setdefault(seq.story.album_id, []).append(seq)
    return groups
