#!/usr/bin/env python3
"""Regenerate the desk-scale sample corpora and tagger fixtures under tests/data/.

The sample files mimic each corpus's documented source format at a size that
keeps the test suite fast. Tagging comes from a fixed word -> (lemma, POS)
lexicon of unambiguous common words, recorded into the fixture file that
FixtureTagger replays, so no external tagger is needed at test time.

Deterministic: running this twice produces byte-identical files.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "tests" / "data"

# word -> (lemma, universal POS)
LEXICON = {
    "a": ("a", "DET"), "an": ("an", "DET"), "the": ("the", "DET"),
    "some": ("some", "DET"), "those": ("those", "DET"), "this": ("this", "DET"),
    "two": ("two", "NUM"), "three": ("three", "NUM"),
    "man": ("man", "NOUN"), "woman": ("woman", "NOUN"), "boy": ("boy", "NOUN"),
    "girl": ("girl", "NOUN"), "child": ("child", "NOUN"), "children": ("child", "NOUN"),
    "people": ("people", "NOUN"), "dog": ("dog", "NOUN"), "dogs": ("dog", "NOUN"),
    "cat": ("cat", "NOUN"), "cats": ("cat", "NOUN"), "animal": ("animal", "NOUN"),
    "animals": ("animal", "NOUN"), "guitar": ("guitar", "NOUN"), "music": ("music", "NOUN"),
    "instrument": ("instrument", "NOUN"), "park": ("park", "NOUN"), "beach": ("beach", "NOUN"),
    "book": ("book", "NOUN"), "books": ("book", "NOUN"), "window": ("window", "NOUN"),
    "pizza": ("pizza", "NOUN"), "table": ("table", "NOUN"), "stage": ("stage", "NOUN"),
    "dress": ("dress", "NOUN"), "shirt": ("shirt", "NOUN"), "ball": ("ball", "NOUN"),
    "street": ("street", "NOUN"), "parents": ("parent", "NOUN"), "song": ("song", "NOUN"),
    "field": ("field", "NOUN"), "grass": ("grass", "NOUN"), "water": ("water", "NOUN"),
    "bike": ("bike", "NOUN"), "pasta": ("pasta", "NOUN"), "soup": ("soup", "NOUN"),
    "service": ("service", "NOUN"), "waiter": ("waiter", "NOUN"), "staff": ("staff", "NOUN"),
    "food": ("food", "NOUN"), "place": ("place", "NOUN"), "coffee": ("coffee", "NOUN"),
    "cake": ("cake", "NOUN"), "room": ("room", "NOUN"), "price": ("price", "NOUN"),
    "weather": ("weather", "NOUN"), "robots": ("robot", "NOUN"), "fans": ("fan", "NOUN"),
    "broccoli": ("broccoli", "NOUN"), "turnip": ("turnip", "NOUN"),
    "toasters": ("toaster", "NOUN"), "pigeons": ("pigeon", "NOUN"),
    "morning": ("morning", "NOUN"), "day": ("day", "NOUN"), "bread": ("bread", "NOUN"),
    "today": ("today", "NOUN"),
    "plays": ("play", "VERB"), "playing": ("play", "VERB"), "played": ("play", "VERB"),
    "runs": ("run", "VERB"), "run": ("run", "VERB"), "running": ("run", "VERB"),
    "reads": ("read", "VERB"), "reading": ("read", "VERB"), "eats": ("eat", "VERB"),
    "eating": ("eat", "VERB"), "sings": ("sing", "VERB"), "singing": ("sing", "VERB"),
    "sleeps": ("sleep", "VERB"), "sleeping": ("sleep", "VERB"), "sleep": ("sleep", "VERB"),
    "walks": ("walk", "VERB"), "walking": ("walk", "VERB"), "sits": ("sit", "VERB"),
    "sitting": ("sit", "VERB"), "throws": ("throw", "VERB"), "rides": ("ride", "VERB"),
    "riding": ("ride", "VERB"), "jumps": ("jump", "VERB"), "smiles": ("smile", "VERB"),
    "loved": ("love", "VERB"), "waited": ("wait", "VERB"),
    "recommend": ("recommend", "VERB"), "deserve": ("deserve", "VERB"),
    "swimming": ("swim", "VERB"),
    "is": ("be", "AUX"), "are": ("be", "AUX"), "was": ("be", "AUX"), "were": ("be", "AUX"),
    "red": ("red", "ADJ"), "blue": ("blue", "ADJ"), "young": ("young", "ADJ"),
    "old": ("old", "ADJ"), "large": ("large", "ADJ"), "small": ("small", "ADJ"),
    "sandy": ("sandy", "ADJ"), "thick": ("thick", "ADJ"), "happy": ("happy", "ADJ"),
    "terrible": ("terrible", "ADJ"), "awful": ("awful", "ADJ"), "useless": ("useless", "ADJ"),
    "delicious": ("delicious", "ADJ"), "cold": ("cold", "ADJ"), "friendly": ("friendly", "ADJ"),
    "rude": ("rude", "ADJ"), "great": ("great", "ADJ"), "slow": ("slow", "ADJ"),
    "fresh": ("fresh", "ADJ"), "stale": ("stale", "ADJ"), "cozy": ("cozy", "ADJ"),
    "dirty": ("dirty", "ADJ"), "fair": ("fair", "ADJ"), "nice": ("nice", "ADJ"),
    "sunny": ("sunny", "ADJ"), "lovely": ("lovely", "ADJ"), "worst": ("bad", "ADJ"),
    "in": ("in", "ADP"), "on": ("on", "ADP"), "at": ("at", "ADP"), "near": ("near", "ADP"),
    "across": ("across", "ADP"), "for": ("for", "ADP"), "with": ("with", "ADP"),
    "outside": ("outside", "ADV"), "absolutely": ("absolutely", "ADV"),
    "very": ("very", "ADV"), "really": ("really", "ADV"), "again": ("again", "ADV"),
    "her": ("her", "PRON"), "his": ("his", "PRON"), "they": ("they", "PRON"),
    "we": ("we", "PRON"), "i": ("i", "PRON"), "it": ("it", "PRON"), "she": ("she", "PRON"),
    "not": ("not", "PART"), "and": ("and", "CCONJ"), "but": ("but", "CCONJ"),
    ".": (".", "PUNCT"), ",": (",", "PUNCT"), "!": ("!", "PUNCT"),
}

ESNLI_PAIRS = [
    # (label, premise, hypothesis, premise highlights, hypothesis highlights)
    ("entailment",
     "a man in a red shirt plays a guitar in the park .",
     "a man plays an instrument outside .",
     ["plays", "guitar"], ["plays", "instrument"]),
    ("entailment",
     "two dogs run across the sandy beach .",
     "some animals run on the beach .",
     ["dogs", "run"], ["animals", "run"]),
    ("entailment",
     "a young woman reads a thick book near the window .",
     "a woman is reading .",
     ["reads", "book"], ["reading"]),
    ("entailment",
     "three children are playing with a ball on the grass .",
     "children are playing outside .",
     ["children", "playing", "ball"], ["children", "playing", "outside"]),
    ("entailment",
     "a boy rides a blue bike on the street .",
     "a boy is riding a bike .",
     ["rides", "bike"], ["riding", "bike"]),
    ("contradiction",
     "a boy eats a large pizza at the table .",
     "the boy is sleeping near the window .",
     ["eats", "pizza"], ["sleeping"]),
    ("contradiction",
     "an old man walks with his dog in the park .",
     "the man is swimming in the water .",
     ["walks"], ["swimming", "water"]),
    ("contradiction",
     "a girl in a blue dress sings on the stage .",
     "the girl is not singing .",
     ["sings"], ["not", "singing"]),
    ("contradiction",
     "two cats sleep near the window .",
     "the cats run across the street .",
     ["sleep"], ["run", "street"]),
    ("neutral",
     "a girl in a blue dress sings on the stage .",
     "the girl sings a song for her parents .",
     ["sings"], ["parents"]),
    ("neutral",
     "a woman sits at the table with a coffee .",
     "the woman is happy with her coffee .",
     ["sits", "coffee"], ["happy"]),
    ("neutral",
     "a man throws a ball for the dog .",
     "the dog is young and happy .",
     ["throws", "ball"], ["young", "happy"]),
]

# word-level substitutions preserving the entailment relation
VARIANT_MAPS = [
    {},
    {"man": "woman", "his": "her"},
    {"boy": "girl", "girl": "boy"},
    {"dogs": "cats", "dog": "cat", "cats": "dogs", "cat": "dog"},
    {"red": "blue", "blue": "red", "young": "small", "large": "thick"},
]


def _apply(mapping: dict, text: str) -> str:
    return " ".join(mapping.get(w, w) for w in text.split())


def _apply_words(mapping: dict, words: list[str]) -> list[str]:
    return [mapping.get(w, w) for w in words]


def esnli_rows() -> list[dict]:
    rows = []
    n = 0
    for mapping in VARIANT_MAPS:
        for label, prem, hyp, ph, hh in ESNLI_PAIRS:
            prem_v = _apply(mapping, prem)
            hyp_v = _apply(mapping, hyp)
            rows.append({
                "pairID": f"sample-{n}",
                "gold_label": label,
                "Sentence1": prem_v,
                "Sentence2": hyp_v,
                "Sentence1_marked_1": mark(prem_v, _apply_words(mapping, ph)),
                "Sentence2_marked_1": mark(hyp_v, _apply_words(mapping, hh)),
            })
            n += 1
    return rows


def mark(sentence: str, highlighted: list[str]) -> str:
    words = sentence.split(" ")
    remaining = list(highlighted)
    out = []
    for w in words:
        if w in remaining:
            out.append(f"*{w}*")
            remaining.remove(w)
        else:
            out.append(w)
    if remaining:
        raise ValueError(f"highlight words {remaining} not in: {sentence}")
    return " ".join(out)


HATE_TARGETS = ["broccoli fans", "turnip people", "toasters", "pigeons", "robots"]
HATE_INSULTS = ["terrible", "awful", "useless", "rude"]
NORMAL_POSTS = [
    "the weather is lovely today",
    "we played music in the park",
    "i loved the fresh coffee this morning",
    "the dog runs across the field again",
    "they are reading books near the window",
    "the children were singing a happy song",
    "she walks with her cat outside",
    "nice sunny day at the beach",
]


def hatexplain_records():
    dataset = {}
    divisions = {"train": [], "val": [], "test": []}
    post_num = 0

    def add(tokens, labels, rationale_words):
        nonlocal post_num
        pid = f"post_{post_num:03d}"
        post_num += 1
        rationales = []
        if rationale_words:
            # annotator 2 skips every fifth token it would otherwise mark
            for annotator in range(3):
                rationales.append([
                    1 if (t in rationale_words and not (annotator == 2 and i % 5 == 4)) else 0
                    for i, t in enumerate(tokens)])
        dataset[pid] = {
            "post_id": pid,
            "post_tokens": tokens,
            "annotators": [{"label": l, "annotator_id": k} for k, l in enumerate(labels)],
            "rationales": rationales,
        }
        split = "train" if post_num % 6 < 4 else ("val" if post_num % 6 == 4 else "test")
        divisions[split].append(pid)

    for i in range(16):
        target = HATE_TARGETS[i % len(HATE_TARGETS)].split()
        insults = [HATE_INSULTS[i % 4], HATE_INSULTS[(i + 1) % 4]]
        tokens = ["those"] + target + ["are", "absolutely", insults[0], "and", insults[1]]
        if i % 3 == 0:
            tokens += ["they", "deserve", "it"]
        kind = "hatespeech" if i % 2 == 0 else "offensive"
        other = "offensive" if kind == "hatespeech" else "normal"
        labels = [kind, kind, other] if i % 4 else [kind, kind, kind]
        add(tokens, labels, set(target + insults))
    for text in NORMAL_POSTS:
        add(text.split(), ["normal", "normal", "normal"], None)
    # one post with no majority label: the loader must skip it
    add("the soup was cold".split(), ["normal", "offensive", "hatespeech"], None)
    return dataset, divisions


YELP_POSITIVE = [
    ("the pasta was delicious and the service was friendly", ["delicious", "friendly"]),
    ("great coffee and a very cozy room", ["great", "cozy"]),
    ("the staff was nice and the food was fresh", ["nice", "fresh"]),
    ("we loved the cake and the fair price", ["loved", "cake", "fair"]),
    ("really friendly waiter and delicious soup", ["friendly", "delicious"]),
    ("the place was cozy and we recommend the pizza", ["cozy", "recommend"]),
]
YELP_NEGATIVE = [
    ("the soup was cold and the waiter was rude", ["cold", "rude"]),
    ("terrible service and stale bread", ["terrible", "stale"]),
    ("the room was dirty and the food was awful", ["dirty", "awful"]),
    ("we waited for a slow and rude staff", ["slow", "rude"]),
    ("the worst pasta and a terrible price", ["worst", "terrible"]),
    ("cold coffee and really awful cake", ["cold", "awful"]),
]


def yelp_rows() -> list[dict]:
    rows = []
    for suffix in ("", "again", "today"):
        for label, bank in ((1, YELP_POSITIVE), (0, YELP_NEGATIVE)):
            for text, marked in bank:
                if suffix:
                    text = f"{text} {suffix}"
                words = text.split()
                ann = [1 if w in marked else 0 for w in words]
                rows.append({"text": text, "label": str(label),
                             "annotation": " ".join(str(a) for a in ann)})
    # two incoherent samples: annotation length disagrees with the token count
    rows.append({"text": "the food was great", "label": "1", "annotation": "1 0 0"})
    rows.append({"text": "awful place", "label": "0", "annotation": "0 1 0 0 1"})
    return rows


SYNONYM_GROUPS = [
    ["man", "woman", "boy", "girl", "child", "people", "parent"],
    ["dog", "cat", "animal", "pigeon"],
    ["play", "guitar", "music", "instrument", "song", "sing"],
    ["run", "walk", "jump", "ride", "swim"],
    ["read", "book"],
    ["eat", "pizza", "pasta", "soup", "food", "cake", "bread", "coffee"],
    ["park", "beach", "field", "grass", "street", "outside"],
    ["terrible", "awful", "rude", "bad", "useless", "dirty", "stale"],
    ["delicious", "friendly", "great", "nice", "lovely", "happy", "fresh", "cozy"],
]


def _hash_stable(s: str) -> int:
    h = 2166136261
    for ch in s.encode("utf-8"):
        h = (h ^ ch) * 16777619 % 2**32
    return h


def glove_lines(dim: int = 50) -> list[str]:
    rng = np.random.default_rng(7)
    bases = rng.normal(size=(len(SYNONYM_GROUPS), dim))
    group_of = {}
    for g, members in enumerate(SYNONYM_GROUPS):
        for m in members:
            group_of[m] = g
    lines = []
    for lemma in sorted({lemma for lemma, _ in LEXICON.values()}):
        noise = np.random.default_rng(_hash_stable(lemma)).normal(size=dim)
        if lemma in group_of:
            vec = 0.85 * bases[group_of[lemma]] + 0.15 * noise
        else:
            vec = noise
        vec = vec / np.linalg.norm(vec)
        lines.append(lemma + " " + " ".join(f"{x:.5f}" for x in vec))
    return lines


def tag_word(word: str) -> dict:
    key = word.lower()
    if key not in LEXICON:
        raise KeyError(f"word {word!r} missing from the sample lexicon")
    lemma, pos = LEXICON[key]
    return {"surface": word, "lemma": lemma, "pos": pos}


def main() -> int:
    DATA.mkdir(parents=True, exist_ok=True)
    fixture = {"texts": {}, "token_seqs": {}}

    def record_text(text: str):
        fixture["texts"][text] = [tag_word(w) for w in text.split()]

    def record_seq(words):
        fixture["token_seqs"]["␟".join(words)] = [tag_word(w) for w in words]

    rows = esnli_rows()
    half = len(rows) // 2
    for name, chunk in (("esnli_train_1.csv", rows[:half]),
                        ("esnli_train_2.csv", rows[half:]),
                        ("esnli_dev.csv", rows[: len(rows) // 3])):
        with open(DATA / name, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(chunk)
    for row in rows:
        record_text(row["Sentence1"])
        record_text(row["Sentence2"])

    dataset, divisions = hatexplain_records()
    (DATA / "hatexplain").mkdir(exist_ok=True)
    (DATA / "hatexplain" / "dataset.json").write_text(
        json.dumps(dataset, indent=1, sort_keys=True), encoding="utf-8")
    (DATA / "hatexplain" / "post_id_divisions.json").write_text(
        json.dumps(divisions, indent=1, sort_keys=True), encoding="utf-8")
    for rec in dataset.values():
        record_seq(rec["post_tokens"])

    yrows = yelp_rows()
    (DATA / "yelphat").mkdir(exist_ok=True)
    with open(DATA / "yelphat" / "reviews.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["text", "label", "annotation"])
        writer.writeheader()
        writer.writerows(yrows)
    for row in yrows:
        record_seq(row["text"].split())

    # extra fixture entries exercised directly by unit tests
    for text in ["Two dogs run", "dogs", "a man plays a guitar ."]:
        record_text(text)

    (DATA / "tagger_fixtures.json").write_text(
        json.dumps(fixture, indent=1, sort_keys=True, ensure_ascii=False), encoding="utf-8")
    (DATA / "mini_glove.txt").write_text("\n".join(glove_lines()) + "\n", encoding="utf-8")
    print(f"sample data written under {DATA}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
