"""Corpus ingestion: source adapters, canonical JSONL, vocabulary, batching.

Three heterogeneous source formats (sentence-pair CSV with highlight markers,
pre-tokenized social-media JSON with per-annotator rationale vectors, review
CSV with a per-token highlight vector) are normalized into one canonical
per-example JSONL schema; everything downstream reads only that schema.
A synthetic planted-rationale corpus provides a desk-scale test bed.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .tagging import Token, Tagger, locate_token_spans

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

YELPHAT_TRAIN_SIZE = 2436
YELPHAT_VAL_SIZE = 1046
YELPHAT_SPLIT_SEED = 13

ESNLI_LABELS = {"entailment": 0, "neutral": 1, "contradiction": 2}
HATEXPLAIN_LABELS = {"hatespeech": 0, "normal": 1, "offensive": 2}


class Task(str, Enum):
    CLASSIFICATION = "classification"
    NLI = "nli"


@dataclass
class Example:
    """One tokenized example with an optional per-token binary annotation.

    ``segments`` holds one token sequence for classification, two
    (premise, hypothesis) for NLI. ``annotation`` mirrors the segment
    structure; None means no human annotation is available.
    """

    id: str
    task: Task
    segments: list[list[Token]]
    label: int
    annotation: Optional[list[list[int]]] = None

    def __post_init__(self):
        self.task = Task(self.task)
        if self.task is Task.NLI and len(self.segments) != 2:
            raise ValueError(f"nli example {self.id} needs exactly 2 segments, got {len(self.segments)}")
        if self.task is Task.CLASSIFICATION and len(self.segments) != 1:
            raise ValueError(f"classification example {self.id} needs exactly 1 segment")
        if self.label < 0:
            raise ValueError(f"example {self.id}: negative label")
        if self.annotation is not None:
            if len(self.annotation) != len(self.segments):
                raise ValueError(f"example {self.id}: annotation/segment count mismatch")
            for seg, ann in zip(self.segments, self.annotation):
                if len(seg) != len(ann):
                    raise ValueError(f"example {self.id}: annotation length {len(ann)} != {len(seg)} tokens")
                if any(a not in (0, 1) for a in ann):
                    raise ValueError(f"example {self.id}: annotation entries must be 0/1")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "task": self.task.value,
            "segments": [[t.to_dict() for t in seg] for seg in self.segments],
            "label": self.label,
            "annotation": self.annotation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Example":
        return cls(
            id=d["id"],
            task=Task(d["task"]),
            segments=[[Token.from_dict(t) for t in seg] for seg in d["segments"]],
            label=d["label"],
            annotation=d.get("annotation"),
        )


@dataclass
class LoadResult:
    """Loaded examples plus counters for skipped/degraded records."""

    examples: list[Example]
    n_skipped: int = 0
    n_annotation_dropped: int = 0

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)


class Vocabulary:
    """lemma -> id map with reserved PAD=0 and UNK=1."""

    def __init__(self, lemmas: Sequence[str]):
        self._itos = [PAD_TOKEN, UNK_TOKEN] + list(lemmas)
        self._stoi = {w: i for i, w in enumerate(self._itos)}
        if len(self._stoi) != len(self._itos):
            raise ValueError("duplicate lemmas in vocabulary")

    @classmethod
    def from_examples(cls, examples: Iterable[Example], min_count: int = 1) -> "Vocabulary":
        counts: Counter = Counter()
        for ex in examples:
            for seg in ex.segments:
                counts.update(t.lemma for t in seg)
        counts.pop(PAD_TOKEN, None)
        counts.pop(UNK_TOKEN, None)
        kept = [w for w, c in counts.items() if c >= min_count]
        # deterministic id assignment: frequency desc, then lexicographic
        kept.sort(key=lambda w: (-counts[w], w))
        return cls(kept)

    def __len__(self):
        return len(self._itos)

    def __contains__(self, lemma: str):
        return lemma in self._stoi

    def encode(self, lemma: str) -> int:
        return self._stoi.get(lemma, UNK_ID)

    def lemma(self, idx: int) -> str:
        return self._itos[idx]

    @property
    def lemmas(self) -> list[str]:
        return list(self._itos)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for w in self._itos:
            h.update(w.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# canonical JSONL
# ---------------------------------------------------------------------------

def write_jsonl(examples: Iterable[Example], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(ex.to_dict(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> list[Example]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(Example.from_dict(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# annotation alignment
# ---------------------------------------------------------------------------

def align_spans_to_tokens(text: str, tokens: Sequence[Token],
                          highlight_spans: Sequence[tuple[int, int]]) -> list[int]:
    """Map highlighted character spans onto tokens.

    A token counts as annotated iff at least half of its characters are
    covered by the union of the highlight spans.
    """
    token_spans = locate_token_spans(text, tokens)
    ann = []
    for start, end in token_spans:
        width = end - start
        if width <= 0:
            ann.append(0)
            continue
        covered = 0
        for hs, he in highlight_spans:
            covered += max(0, min(end, he) - max(start, hs))
        ann.append(1 if covered * 2 >= width else 0)
    return ann


def parse_marked_text(marked: str, marker: str = "*") -> tuple[str, list[tuple[int, int]]]:
    """Strip highlight markers, returning clean text plus highlighted spans."""
    clean = []
    spans = []
    inside = False
    span_start = 0
    pos = 0
    for ch in marked:
        if ch == marker:
            if inside:
                spans.append((span_start, pos))
            else:
                span_start = pos
            inside = not inside
            continue
        clean.append(ch)
        pos += 1
    if inside:  # unbalanced marker: close at end
        spans.append((span_start, pos))
    return "".join(clean), spans


# ---------------------------------------------------------------------------
# source adapters
# ---------------------------------------------------------------------------

def load_esnli_csv(paths: Sequence[str | Path], tagger: Tagger) -> LoadResult:
    """Sentence-pair CSV with *word* highlight markers in the marked columns."""
    result = LoadResult(examples=[])
    for path in paths:
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            for i, row in enumerate(reader):
                ex = _esnli_row_to_example(row, f"{Path(path).stem}-{i}", tagger, result)
                if ex is not None:
                    result.examples.append(ex)
    return result


def _esnli_row_to_example(row: Mapping[str, str], fallback_id: str,
                          tagger: Tagger, result: LoadResult) -> Optional[Example]:
    label_name = (row.get("gold_label") or "").strip().lower()
    if label_name not in ESNLI_LABELS:
        result.n_skipped += 1
        return None
    marked1 = row.get("Sentence1_marked_1") or row.get("Sentence1") or ""
    marked2 = row.get("Sentence2_marked_1") or row.get("Sentence2") or ""
    if not marked1.strip() or not marked2.strip():
        result.n_skipped += 1
        return None
    segments = []
    annotation: Optional[list[list[int]]] = []
    for marked in (marked1, marked2):
        clean, spans = parse_marked_text(marked)
        tokens = tagger.tag_text(clean)
        if not tokens:
            result.n_skipped += 1
            return None
        segments.append(tokens)
        if annotation is not None:
            annotation.append(align_spans_to_tokens(clean, tokens, spans))
    has_marks = any(any(a) for a in annotation)
    if not has_marks and "Sentence1_marked_1" not in row:
        annotation = None  # plain sentence columns carry no highlight information
    return Example(
        id=row.get("pairID") or fallback_id,
        task=Task.NLI,
        segments=segments,
        label=ESNLI_LABELS[label_name],
        annotation=annotation,
    )


def load_hatexplain_json(dataset_path: str | Path, tagger: Tagger,
                         split_ids: Optional[set[str]] = None,
                         min_annotators: int = 2) -> LoadResult:
    """Pre-tokenized posts with one label and one rationale vector per annotator.

    The merged annotation marks a token iff at least ``min_annotators``
    annotators marked it.
    """
    with open(dataset_path, encoding="utf-8") as f:
        raw = json.load(f)
    records = raw.values() if isinstance(raw, dict) else raw
    result = LoadResult(examples=[])
    for rec in records:
        post_id = rec.get("post_id", "")
        if split_ids is not None and post_id not in split_ids:
            continue
        words = rec.get("post_tokens") or []
        labels = [a.get("label", "").lower() for a in rec.get("annotators", [])]
        labels = [l for l in labels if l in HATEXPLAIN_LABELS]
        if not words or not labels:
            result.n_skipped += 1
            continue
        tally = Counter(labels).most_common()
        if len(tally) > 1 and tally[0][1] == tally[1][1]:
            result.n_skipped += 1  # no majority label
            continue
        label = HATEXPLAIN_LABELS[tally[0][0]]
        tokens = tagger.tag_tokens(words)
        annotation = _merge_rationales(rec.get("rationales") or [], len(tokens),
                                       min_annotators, result)
        result.examples.append(Example(
            id=post_id or f"hx-{len(result.examples)}",
            task=Task.CLASSIFICATION,
            segments=[tokens],
            label=label,
            annotation=[annotation] if annotation is not None else None,
        ))
    return result


def _merge_rationales(rationales: Sequence[Sequence[int]], n_tokens: int,
                      min_annotators: int, result: LoadResult) -> Optional[list[int]]:
    valid = [r for r in rationales if len(r) == n_tokens]
    if len(valid) < len(rationales):
        result.n_annotation_dropped += len(rationales) - len(valid)
    if not valid:
        return None
    votes = np.sum(np.asarray(valid, dtype=np.int64), axis=0)
    return [1 if v >= min_annotators else 0 for v in votes]


def load_yelphat_csv(paths: Sequence[str | Path], tagger: Tagger) -> LoadResult:
    """Review CSV: columns text,label,annotation; annotation is a 0/1 vector
    (space- or comma-separated) aligned with the whitespace tokens of text.

    Samples whose annotation length disagrees with their token count are
    incoherent and excluded entirely (counted).
    """
    result = LoadResult(examples=[])
    for path in paths:
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            for i, row in enumerate(reader):
                text = (row.get("text") or "").strip()
                label_raw = (row.get("label") or "").strip()
                if not text or label_raw not in ("0", "1"):
                    result.n_skipped += 1
                    continue
                words = text.split()
                ann = _parse_binary_vector(row.get("annotation") or "")
                tokens = tagger.tag_tokens(words)
                if ann is None or len(ann) != len(tokens):
                    result.n_skipped += 1  # incoherent sample: map/token mismatch
                    continue
                result.examples.append(Example(
                    id=f"{Path(path).stem}-{i}",
                    task=Task.CLASSIFICATION,
                    segments=[tokens],
                    label=int(label_raw),
                    annotation=[ann],
                ))
    return result


def _parse_binary_vector(raw: str) -> Optional[list[int]]:
    raw = raw.strip().strip("[]")
    if not raw:
        return None
    parts = raw.replace(",", " ").split()
    try:
        vec = [int(p) for p in parts]
    except ValueError:
        return None
    if any(v not in (0, 1) for v in vec):
        return None
    return vec


def yelphat_split(examples: Sequence[Example], seed: int = YELPHAT_SPLIT_SEED) -> tuple[list[Example], list[Example]]:
    """Random train/val split at the documented 2436:1046 proportion."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(examples))
    n_train = round(len(examples) * YELPHAT_TRAIN_SIZE / (YELPHAT_TRAIN_SIZE + YELPHAT_VAL_SIZE))
    train_idx = set(order[:n_train].tolist())
    train = [ex for i, ex in enumerate(examples) if i in train_idx]
    val = [ex for i, ex in enumerate(examples) if i not in train_idx]
    return train, val


def filter_max_tokens(examples: Iterable[Example], max_tokens: int) -> list[Example]:
    """Keep examples whose total token count does not exceed ``max_tokens``."""
    return [ex for ex in examples if sum(len(s) for s in ex.segments) <= max_tokens]


# ---------------------------------------------------------------------------
# synthetic planted-rationale corpus
# ---------------------------------------------------------------------------

_DISTRACTOR_POS = ("NOUN", "VERB", "ADJ", "DET", "ADP", "ADV", "PRON", "NUM")


def generate_synthetic(n: int, vocab_size: int = 120, rationale_lexicon_size: int = 8,
                       num_classes: int = 2, seed: int = 0, task: Task = Task.CLASSIFICATION,
                       min_len: int = 8, max_len: int = 16,
                       min_rationale: int = 2, max_rationale: int = 3,
                       end_punct: bool = True, mixed_rationale: bool = False) -> list[Example]:
    """Planted-rationale corpus.

    Each example's label is fully determined by its planted rationale tokens:
    they come from per-class cue lexicons and the label is the majority
    lexicon (with ``mixed_rationale=False`` all planted tokens share the
    label's lexicon). The annotation marks exactly the planted tokens;
    distractor tokens are drawn independently of the label. With
    ``mixed_rationale=True`` a sentence plants an odd number of cues from
    competing lexicons, so no single token determines the label and the
    classifier has to aggregate, like in natural text. ``end_punct`` closes
    every sentence with an unannotated period.
    """
    if rationale_lexicon_size < 2:
        raise ValueError("rationale_lexicon_size must be >= 2 (one lexicon per class)")
    if rationale_lexicon_size < num_classes:
        raise ValueError("need at least one rationale lemma per class")
    if vocab_size <= rationale_lexicon_size:
        raise ValueError("vocab_size must exceed rationale_lexicon_size")

    per_class = rationale_lexicon_size // num_classes
    lexicons = [[f"cue{c}x{j}" for j in range(per_class)] for c in range(num_classes)]
    distractors = [f"filler{k}" for k in range(vocab_size - per_class * num_classes)]

    rng = np.random.default_rng(seed)
    task = Task(task)
    n_segments = 2 if task is Task.NLI else 1
    examples = []
    for i in range(n):
        label = int(rng.integers(num_classes))
        segments = []
        annotation = []
        for _ in range(n_segments):
            length = int(rng.integers(min_len, max_len + 1))
            k = int(rng.integers(min_rationale, min(max_rationale, length) + 1))
            if mixed_rationale:
                k |= 1  # odd count: a strict majority lexicon always exists
                k = min(k, length)
            cue_classes = _plant_classes(rng, k, label, num_classes, mixed_rationale)
            planted = sorted(rng.choice(length, size=k, replace=False).tolist())
            cue_of = dict(zip(planted, cue_classes))
            tokens = []
            ann = []
            for pos_idx in range(length):
                if pos_idx in cue_of:
                    c = cue_of[pos_idx]
                    lemma = lexicons[c][int(rng.integers(per_class))]
                    tokens.append(Token(surface=lemma, lemma=lemma, pos="NOUN"))
                    ann.append(1)
                else:
                    d = int(rng.integers(len(distractors)))
                    lemma = distractors[d]
                    tokens.append(Token(surface=lemma, lemma=lemma,
                                        pos=_DISTRACTOR_POS[d % len(_DISTRACTOR_POS)]))
                    ann.append(0)
            if end_punct:
                tokens.append(Token(surface=".", lemma=".", pos="PUNCT"))
                ann.append(0)
            segments.append(tokens)
            annotation.append(ann)
        examples.append(Example(
            id=f"syn-{seed}-{i}",
            task=task,
            segments=segments,
            label=label,
            annotation=annotation,
        ))
    return examples


def _plant_classes(rng, k: int, label: int, num_classes: int, mixed: bool) -> list[int]:
    """Lexicon assignment for the k planted positions; label holds the majority."""
    if not mixed or k == 1:
        return [label] * k
    majority = k // 2 + 1
    others = [c for c in range(num_classes) if c != label]
    rest = [others[int(rng.integers(len(others)))] for _ in range(k - majority)]
    classes = [label] * majority + rest
    rng.shuffle(classes)
    return classes


def synthetic_label_rule(example: Example) -> int:
    """Recover the label of a synthetic example from its annotated tokens only:
    majority vote over the planted cue lexicons."""
    votes: Counter = Counter()
    for seg, ann in zip(example.segments, example.annotation or []):
        for tok, a in zip(seg, ann):
            if a and tok.lemma.startswith("cue"):
                votes[int(tok.lemma[3:].split("x")[0])] += 1
    if not votes:
        raise ValueError(f"example {example.id} has no planted rationale token")
    return votes.most_common(1)[0][0]


# ---------------------------------------------------------------------------
# unified loader
# ---------------------------------------------------------------------------

CORPUS_NAMES = ("esnli", "hatexplain", "yelphat", "synthetic")


def load_corpus(name: str, path: str | Path | None, split: str = "train",
                tagger: Optional[Tagger] = None, *, min_annotators: int = 2,
                synthetic_options: Optional[dict] = None) -> LoadResult:
    """Load one split of a corpus from its documented source format.

    esnli       <path>/esnli_train*.csv, esnli_dev.csv, esnli_test.csv
    hatexplain  <path>/dataset.json [+ post_id_divisions.json for splits]
    yelphat     <path>/*.csv, randomly split train/val at the fixed seed
    synthetic   generated in memory; ``synthetic_options`` forwards to
                ``generate_synthetic`` (split shifts the seed so splits differ)
    """
    if name == "synthetic":
        opts = dict(synthetic_options or {})
        base_seed = opts.pop("seed", 0)
        n = opts.pop("n", 1000)
        offsets = {"train": 0, "val": 1, "test": 2}
        if split not in offsets:
            raise ValueError(f"unknown split {split!r}")
        return LoadResult(examples=generate_synthetic(
            n=n, seed=base_seed * 9973 + offsets[split], **opts))

    if tagger is None:
        raise ValueError(f"corpus {name!r} requires a tagger")
    root = Path(path)

    if name == "esnli":
        patterns = {"train": "esnli_train*.csv", "val": "esnli_dev.csv", "test": "esnli_test.csv"}
        if split not in patterns:
            raise ValueError(f"unknown split {split!r}")
        files = sorted(root.glob(patterns[split]))
        if not files:
            raise FileNotFoundError(f"no {patterns[split]} under {root}")
        return load_esnli_csv(files, tagger)

    if name == "hatexplain":
        dataset = root / "dataset.json" if root.is_dir() else root
        divisions = dataset.parent / "post_id_divisions.json"
        split_ids = None
        if divisions.exists():
            with open(divisions, encoding="utf-8") as f:
                div = json.load(f)
            if split not in div:
                raise ValueError(f"unknown split {split!r}; divisions file has {sorted(div)}")
            split_ids = set(div[split])
        return load_hatexplain_json(dataset, tagger, split_ids=split_ids,
                                    min_annotators=min_annotators)

    if name == "yelphat":
        files = sorted(root.glob("*.csv")) if root.is_dir() else [root]
        if not files:
            raise FileNotFoundError(f"no .csv files under {root}")
        result = load_yelphat_csv(files, tagger)
        if split in ("train", "val"):
            train, val = yelphat_split(result.examples)
            result.examples = train if split == "train" else val
        elif split != "all":
            raise ValueError(f"unknown split {split!r} for yelphat (train/val/all)")
        return result

    raise ValueError(f"unknown corpus {name!r}; expected one of {CORPUS_NAMES}")


# ---------------------------------------------------------------------------
# batching
# ---------------------------------------------------------------------------

@dataclass
class SegmentBatch:
    """Padded id matrix for one segment position across a batch."""

    ids: np.ndarray            # (B, Lmax) int64, PAD_ID on padding
    lengths: np.ndarray        # (B,) int64 true lengths
    mask: np.ndarray           # (B, Lmax) float32, 1 on real positions
    annotation: np.ndarray     # (B, Lmax) float32, 0 where absent
    has_annotation: np.ndarray  # (B,) bool
    heuristic: Optional[np.ndarray] = None       # (B, Lmax) float32
    has_heuristic: Optional[np.ndarray] = None   # (B,) bool


@dataclass
class Batch:
    example_ids: list[str]
    task: Task
    segments: list[SegmentBatch]
    labels: np.ndarray  # (B,) int64

    def __len__(self):
        return len(self.example_ids)


def batchify(examples: Sequence[Example], batch_size: int, vocab: Vocabulary,
             heuristic_maps: Optional[Mapping[str, Sequence[Sequence[float]]]] = None,
             pad_id: int = PAD_ID) -> list[Batch]:
    """Chunk examples in order into padded batches; masks reflect true lengths."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not examples:
        return []
    n_segments = len(examples[0].segments)
    task = examples[0].task
    batches = []
    for start in range(0, len(examples), batch_size):
        chunk = examples[start:start + batch_size]
        seg_batches = []
        for s in range(n_segments):
            lengths = np.array([len(ex.segments[s]) for ex in chunk], dtype=np.int64)
            lmax = int(lengths.max())
            ids = np.full((len(chunk), lmax), pad_id, dtype=np.int64)
            mask = np.zeros((len(chunk), lmax), dtype=np.float32)
            ann = np.zeros((len(chunk), lmax), dtype=np.float32)
            has_ann = np.zeros(len(chunk), dtype=bool)
            heur = np.zeros((len(chunk), lmax), dtype=np.float32)
            has_heur = np.zeros(len(chunk), dtype=bool)
            for b, ex in enumerate(chunk):
                L = lengths[b]
                ids[b, :L] = [vocab.encode(t.lemma) for t in ex.segments[s]]
                mask[b, :L] = 1.0
                if ex.annotation is not None:
                    ann[b, :L] = ex.annotation[s]
                    has_ann[b] = True
                if heuristic_maps is not None and ex.id in heuristic_maps:
                    hm = heuristic_maps[ex.id][s]
                    if len(hm) == L:
                        heur[b, :L] = hm
                        has_heur[b] = True
            seg_batches.append(SegmentBatch(
                ids=ids, lengths=lengths, mask=mask,
                annotation=ann, has_annotation=has_ann,
                heuristic=heur if heuristic_maps is not None else None,
                has_heuristic=has_heur if heuristic_maps is not None else None,
            ))
        batches.append(Batch(
            example_ids=[ex.id for ex in chunk],
            task=task,
            segments=seg_batches,
            labels=np.array([ex.label for ex in chunk], dtype=np.int64),
        ))
    return batches
