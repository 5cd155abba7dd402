"""Pluggable tokenizer/lemmatizer/POS-tagger interface.

The tagger is an external component. Production runs use spaCy; tests and
offline runs use fixture files recorded from a previous tagger pass, so the
full pipeline works on machines without any NLP model installed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence

UNIVERSAL_POS = frozenset({
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
})

UNKNOWN_POS = "UNKNOWN"

# key separator for pre-tokenized fixture entries; never occurs in tokens
_SEQ_SEP = "␟"


class TaggerUnavailableError(RuntimeError):
    """Raised when the configured external tagger cannot be loaded."""


@dataclass(frozen=True)
class Token:
    """One token: surface form, lowercased lemma, coarse POS tag.

    ``vocab_id`` is attached later, once a vocabulary exists; it is not part
    of the canonical interchange format.
    """

    surface: str
    lemma: str
    pos: str
    vocab_id: Optional[int] = None

    def __post_init__(self):
        if not self.lemma:
            raise ValueError("token lemma must be non-empty")
        if self.pos not in UNIVERSAL_POS and self.pos != UNKNOWN_POS:
            object.__setattr__(self, "pos", UNKNOWN_POS)

    def with_vocab_id(self, vocab_id: int) -> "Token":
        return Token(self.surface, self.lemma, self.pos, vocab_id)

    def to_dict(self) -> dict:
        return {"surface": self.surface, "lemma": self.lemma, "pos": self.pos}

    @classmethod
    def from_dict(cls, d: dict) -> "Token":
        return cls(surface=d["surface"], lemma=d["lemma"], pos=d["pos"])


def make_token(surface: str, lemma: str, pos: str) -> Token:
    """Normalize raw tagger output into a Token (lemma lowercased)."""
    lemma = lemma.lower().strip()
    if not lemma:
        lemma = surface.lower() or "_"
    return Token(surface=surface, lemma=lemma, pos=pos)


class Tagger(Protocol):
    def tag_text(self, text: str) -> list[Token]:
        """Tokenize and tag free text."""
        ...

    def tag_tokens(self, words: Sequence[str]) -> list[Token]:
        """Tag an already-tokenized sequence, preserving 1:1 alignment."""
        ...


class SpacyTagger:
    """spaCy-backed tagger (the reference production component)."""

    def __init__(self, model: str = "en_core_web_sm"):
        try:
            import spacy
        except ImportError as exc:
            raise TaggerUnavailableError(
                "POS tagger unavailable: the 'spacy' package is not installed "
                "(pip install spacy && python -m spacy download en_core_web_sm)"
            ) from exc
        try:
            self._nlp = spacy.load(model, disable=["parser", "ner"])
        except OSError as exc:
            raise TaggerUnavailableError(
                f"POS tagger unavailable: spaCy model '{model}' is not installed"
            ) from exc

    def tag_text(self, text: str) -> list[Token]:
        if not text.strip():
            return []
        doc = self._nlp(text)
        return [make_token(t.text, t.lemma_, t.pos_) for t in doc]

    def tag_tokens(self, words: Sequence[str]) -> list[Token]:
        if not words:
            return []
        import spacy.tokens

        doc = spacy.tokens.Doc(self._nlp.vocab, words=list(words))
        for _, proc in self._nlp.pipeline:
            doc = proc(doc)
        return [make_token(t.text, t.lemma_, t.pos_) for t in doc]


class FixtureTagger:
    """Tagger replaying recorded outputs from a JSON fixture file.

    Fixture schema: {"texts": {text: [token dicts]},
                     "token_seqs": {sep-joined words: [token dicts]}}
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        with open(self.path, encoding="utf-8") as f:
            raw = json.load(f)
        self._texts = {k: [Token.from_dict(t) for t in v] for k, v in raw.get("texts", {}).items()}
        self._seqs = {k: [Token.from_dict(t) for t in v] for k, v in raw.get("token_seqs", {}).items()}

    def tag_text(self, text: str) -> list[Token]:
        if not text.strip():
            return []
        try:
            return list(self._texts[text])
        except KeyError:
            raise KeyError(f"no fixture entry for text: {text!r} in {self.path}") from None

    def tag_tokens(self, words: Sequence[str]) -> list[Token]:
        if not words:
            return []
        key = _SEQ_SEP.join(words)
        try:
            return list(self._seqs[key])
        except KeyError:
            raise KeyError(f"no fixture entry for token sequence: {list(words)!r} in {self.path}") from None


class RecordingTagger:
    """Wraps a live tagger and records its outputs into fixture form."""

    def __init__(self, inner: Tagger):
        self.inner = inner
        self.texts: dict[str, list[Token]] = {}
        self.token_seqs: dict[str, list[Token]] = {}

    def tag_text(self, text: str) -> list[Token]:
        out = self.inner.tag_text(text)
        if text.strip():
            self.texts[text] = out
        return out

    def tag_tokens(self, words: Sequence[str]) -> list[Token]:
        out = self.inner.tag_tokens(words)
        if words:
            self.token_seqs[_SEQ_SEP.join(words)] = out
        return out

    def dump(self, path: str | Path) -> None:
        payload = {
            "texts": {k: [t.to_dict() for t in v] for k, v in self.texts.items()},
            "token_seqs": {k: [t.to_dict() for t in v] for k, v in self.token_seqs.items()},
        }
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")


def get_tagger(spec: str) -> Tagger:
    """Resolve a tagger from a CLI-style spec: 'spacy' or 'fixture:<path>'."""
    if spec == "spacy":
        return SpacyTagger()
    if spec.startswith("fixture:"):
        return FixtureTagger(spec.split(":", 1)[1])
    raise ValueError(f"unknown tagger spec {spec!r}; expected 'spacy' or 'fixture:<path>'")


def locate_token_spans(text: str, tokens: Sequence[Token]) -> list[tuple[int, int]]:
    """Character span of each token surface in ``text``, scanning left to right.

    Assumes a non-destructive tokenizer (surfaces appear in order). A surface
    that cannot be found is given a zero-width span at the cursor.
    """
    spans = []
    cursor = 0
    for tok in tokens:
        idx = text.find(tok.surface, cursor)
        if idx < 0:
            spans.append((cursor, cursor))
            continue
        spans.append((idx, idx + len(tok.surface)))
        cursor = idx + len(tok.surface)
    return spans
