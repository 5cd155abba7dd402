"""Heuristic attention targets from POS rules and task-dependent weights.

Content tokens (nouns, proper nouns, verbs, adjectives outside a small
auxiliary/stop shortlist) get a weight: annotation frequency of the lemma for
classification tasks, summed cosine similarity to the other sentence for NLI.
Weights are renormalized per sentence into a probability vector.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .corpus import Example, Task
from .tagging import Token

KEEP_POS = frozenset({"NOUN", "PROPN", "VERB", "ADJ"})

# auxiliary/stop lemmas zeroed even when tagged as content words
DEFAULT_SHORTLIST = frozenset({
    "be", "have", "do", "will", "would", "can", "could",
    "shall", "should", "may", "might", "must", "get",
})


@dataclass
class HeuristicMap:
    """Per-token probability vector; zero outside the POS-kept set unless degenerate."""

    values: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


class FrequencyTable:
    """lemma -> fraction of its training-set occurrences that were annotated."""

    def __init__(self, table: Mapping[str, float]):
        self._table = dict(table)

    def get(self, lemma: str) -> float:
        return self._table.get(lemma, 0.0)

    def __len__(self):
        return len(self._table)

    def items(self):
        return self._table.items()

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["lemma", "frequency"])
            for lemma in sorted(self._table):
                writer.writerow([lemma, repr(self._table[lemma])])

    @classmethod
    def load_csv(cls, path: str | Path) -> "FrequencyTable":
        table = {}
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            for row in reader:
                table[row["lemma"]] = float(row["frequency"])
        return cls(table)


def pos_keep_mask(tokens: Sequence[Token], shortlist: frozenset[str] = DEFAULT_SHORTLIST) -> np.ndarray:
    """1 for content tokens (NOUN/PROPN/VERB/ADJ) not in the shortlist, else 0."""
    return np.array(
        [1 if t.pos in KEEP_POS and t.lemma not in shortlist else 0 for t in tokens],
        dtype=np.int64,
    )


def build_frequency_table(examples: Iterable[Example]) -> FrequencyTable:
    """Annotated-occurrence fraction per lemma over examples carrying annotations."""
    annotated: dict[str, int] = {}
    total: dict[str, int] = {}
    n_annotated_examples = 0
    for ex in examples:
        if ex.annotation is None:
            continue
        n_annotated_examples += 1
        for seg, ann in zip(ex.segments, ex.annotation):
            for tok, a in zip(seg, ann):
                total[tok.lemma] = total.get(tok.lemma, 0) + 1
                if a:
                    annotated[tok.lemma] = annotated.get(tok.lemma, 0) + 1
    if n_annotated_examples == 0:
        raise ValueError("cannot build a frequency table: no annotated examples")
    return FrequencyTable({w: annotated.get(w, 0) / c for w, c in total.items()})


def _cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # zero vectors get cosine 0 by convention (OOV embeddings)
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = (a @ b.T) / (na * nb.T)
    sim[~np.isfinite(sim)] = 0.0
    return sim


def nli_similarity_weights(tokens: Sequence[Token], other_tokens: Sequence[Token],
                           embeddings: Mapping[str, np.ndarray]) -> np.ndarray:
    """Sum of cosine similarities of each token to all tokens in the other
    sentence, clamped below at zero."""
    if not tokens:
        return np.zeros(0)
    dim = next(iter(embeddings.values())).shape[0] if embeddings else 1

    def lookup(seq):
        return np.stack([np.asarray(embeddings.get(t.lemma, np.zeros(dim)), dtype=np.float64)
                         for t in seq]) if seq else np.zeros((0, dim))

    e = lookup(tokens)
    e_other = lookup(other_tokens)
    if e_other.shape[0] == 0:
        return np.zeros(len(tokens))
    weights = _cosine_matrix(e, e_other).sum(axis=1)
    return np.maximum(weights, 0.0)


def _normalize(weights: np.ndarray, keep: np.ndarray) -> HeuristicMap:
    masked = weights * keep
    total = masked.sum()
    if total > 0:
        return HeuristicMap(masked / total, degenerate=False)
    # all-zero weights: fall back to uniform over kept tokens, then over all
    if keep.sum() > 0:
        return HeuristicMap(keep / keep.sum(), degenerate=True)
    n = len(weights)
    return HeuristicMap(np.full(n, 1.0 / n) if n else np.zeros(0), degenerate=True)


def build_heuristic_map(example: Example, *,
                        frequency: Optional[FrequencyTable] = None,
                        embeddings: Optional[Mapping[str, np.ndarray]] = None,
                        shortlist: frozenset[str] = DEFAULT_SHORTLIST) -> list[HeuristicMap]:
    """One map per segment; the task selects the weighting scheme."""
    if example.task is Task.NLI:
        if embeddings is None:
            raise ValueError("nli heuristic maps need an embedding lookup")
        maps = []
        for s, seg in enumerate(example.segments):
            other = example.segments[1 - s]
            weights = nli_similarity_weights(seg, other, embeddings)
            maps.append(_normalize(weights, pos_keep_mask(seg, shortlist).astype(np.float64)))
        return maps
    if frequency is None:
        raise ValueError("classification heuristic maps need a frequency table")
    seg = example.segments[0]
    weights = np.array([frequency.get(t.lemma) for t in seg], dtype=np.float64)
    return [_normalize(weights, pos_keep_mask(seg, shortlist).astype(np.float64))]


def heuristic_quality(examples: Sequence[Example],
                      maps: Mapping[str, Sequence[HeuristicMap]]) -> float:
    """Mean per-example AUPRC of the heuristic maps against human annotations."""
    from .metrics import auprc

    values = []
    for ex in examples:
        if ex.annotation is None or ex.id not in maps:
            continue
        seg_values = []
        for hm, ann in zip(maps[ex.id], ex.annotation):
            if sum(ann) >= 1:
                seg_values.append(auprc(hm.values, ann))
        if seg_values:
            values.append(float(np.mean(seg_values)))
    if not values:
        raise ValueError("no annotated examples with heuristic maps")
    return float(np.mean(values))


def pos_coverage(examples: Iterable[Example],
                 shortlist: frozenset[str] = DEFAULT_SHORTLIST) -> float:
    """Fraction of human-annotated tokens that fall in the POS-kept set."""
    kept = 0
    total = 0
    for ex in examples:
        if ex.annotation is None:
            continue
        for seg, ann in zip(ex.segments, ex.annotation):
            mask = pos_keep_mask(seg, shortlist)
            for m, a in zip(mask, ann):
                if a:
                    total += 1
                    kept += int(m)
    if total == 0:
        raise ValueError("no annotated tokens")
    return kept / total


def write_heuristic_jsonl(maps: Mapping[str, Sequence[HeuristicMap]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex_id, seg_maps in maps.items():
            f.write(json.dumps({
                "id": ex_id,
                "heuristic": [m.values.tolist() for m in seg_maps],
                "degenerate": [m.degenerate for m in seg_maps],
            }) + "\n")


def read_heuristic_jsonl(path: str | Path) -> dict[str, list[HeuristicMap]]:
    out: dict[str, list[HeuristicMap]] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            flags = d.get("degenerate") or [False] * len(d["heuristic"])
            out[d["id"]] = [HeuristicMap(np.asarray(v), degenerate=bool(g))
                            for v, g in zip(d["heuristic"], flags)]
    return out


def build_maps_for_corpus(examples: Sequence[Example], task: Task, *,
                          frequency: Optional[FrequencyTable] = None,
                          embeddings: Optional[Mapping[str, np.ndarray]] = None,
                          shortlist: frozenset[str] = DEFAULT_SHORTLIST) -> dict[str, list[HeuristicMap]]:
    task = Task(task)
    if task is Task.CLASSIFICATION and frequency is None:
        frequency = build_frequency_table(examples)
    return {
        ex.id: build_heuristic_map(ex, frequency=frequency, embeddings=embeddings, shortlist=shortlist)
        for ex in examples
    }
