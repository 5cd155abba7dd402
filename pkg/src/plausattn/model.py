"""RNN attention classifier: embedding, stacked bi-LSTM contextualization,
bilinear attention, MLP head with softmax output.

Single-text wiring queries the sentence summary against its own token states;
NLI wiring cross-attends (each sentence's summary queries the other
sentence's token states) and classifies on the two concatenated context
vectors. All paths are padding-invariant: packed recurrence plus masked
softmax keep every output over real positions independent of padding.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import torch
from torch import Tensor, nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .corpus import Batch, PAD_ID, Vocabulary

OOV_INIT_RANGE = 0.05


@dataclass
class ModelConfig:
    vocab_size: int
    num_classes: int
    task: str = "classification"
    embedding_dim: int = 300
    hidden_dim: int = 128          # per direction
    num_bilstm_layers: int = 1
    classifier_hidden: tuple[int, ...] = ()  # () means one hidden layer of 2*hidden_dim
    attention_score: str = "general"         # bilinear "general" or "dot"

    def __post_init__(self):
        if self.num_bilstm_layers < 1:
            raise ValueError("num_bilstm_layers must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.attention_score not in ("general", "dot"):
            raise ValueError(f"unknown attention score kind {self.attention_score!r}")
        self.classifier_hidden = tuple(self.classifier_hidden)

    @property
    def effective_classifier_hidden(self) -> tuple[int, ...]:
        return self.classifier_hidden or (2 * self.hidden_dim,)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["classifier_hidden"] = tuple(d.get("classifier_hidden", ()))
        return cls(**d)


@dataclass
class AttentionOutput:
    """Batched attention layer outputs for one segment.

    scores: pre-softmax, -inf on padding; map: softmax over real positions
    (exactly 0 on padding); sigmoid_map: sigmoid of scores (0 on padding);
    context: attention-weighted sum of values.
    """

    scores: Tensor       # (B, L)
    map: Tensor          # (B, L)
    sigmoid_map: Tensor  # (B, L)
    context: Tensor      # (B, 2H)
    mask: Tensor         # (B, L) float {0,1}


def load_glove_text(path: str | Path, dim: Optional[int] = None) -> dict[str, np.ndarray]:
    """GloVe text format: one token followed by its float components per line."""
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            vec = np.asarray(parts[1:], dtype=np.float32)
            if dim is not None and vec.shape[0] != dim:
                raise ValueError(
                    f"embedding width {vec.shape[0]} for {parts[0]!r} does not match expected {dim}")
            dim = vec.shape[0]
            table[parts[0]] = vec
    return table


def build_embedding_matrix(vocab: Vocabulary, dim: int,
                           pretrained: Optional[Mapping[str, np.ndarray]] = None,
                           seed: int = 0) -> np.ndarray:
    """Pretrained rows where available, seeded uniform init elsewhere, zero PAD row."""
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-OOV_INIT_RANGE, OOV_INIT_RANGE, size=(len(vocab), dim)).astype(np.float32)
    if pretrained:
        for idx, lemma in enumerate(vocab.lemmas):
            vec = pretrained.get(lemma)
            if vec is not None:
                if vec.shape[0] != dim:
                    raise ValueError(f"pretrained dim {vec.shape[0]} != model dim {dim}")
                matrix[idx] = vec
    matrix[PAD_ID] = 0.0
    return matrix


class AttentionClassifier(nn.Module):
    def __init__(self, config: ModelConfig, embedding_matrix: Optional[np.ndarray] = None):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.embedding_dim, padding_idx=PAD_ID)
        if embedding_matrix is not None:
            if embedding_matrix.shape != (config.vocab_size, config.embedding_dim):
                raise ValueError(
                    f"embedding matrix shape {embedding_matrix.shape} does not match "
                    f"({config.vocab_size}, {config.embedding_dim})")
            with torch.no_grad():
                self.embedding.weight.copy_(torch.from_numpy(np.ascontiguousarray(embedding_matrix)))
        else:
            with torch.no_grad():
                self.embedding.weight[PAD_ID].zero_()
        self.lstm = nn.LSTM(config.embedding_dim, config.hidden_dim,
                            num_layers=config.num_bilstm_layers,
                            batch_first=True, bidirectional=True)
        enc = 2 * config.hidden_dim
        self.score_transform = (nn.Linear(enc, enc, bias=False)
                                if config.attention_score == "general" else None)
        head_in = 2 * enc if config.task == "nli" else enc
        layers: list[nn.Module] = []
        for width in config.effective_classifier_hidden:
            layers += [nn.Linear(head_in, width), nn.ReLU()]
            head_in = width
        layers.append(nn.Linear(head_in, config.num_classes))
        self.classifier = nn.Sequential(*layers)

    def embed(self, ids: Tensor) -> Tensor:
        return self.embedding(ids)

    def contextualize(self, ids: Tensor, lengths: Tensor) -> tuple[Tensor, Tensor]:
        """Token states h (B, L, 2H) and summary h_star (B, 2H): forward and
        backward last states of the top layer over real positions only."""
        emb = self.embed(ids)
        packed = pack_padded_sequence(emb, lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, (h_n, _) = self.lstm(packed)
        h, _ = pad_packed_sequence(out, batch_first=True, total_length=ids.shape[1])
        h_star = torch.cat([h_n[-2], h_n[-1]], dim=1)
        return h, h_star

    def attention(self, query: Tensor, keys: Tensor, values: Tensor, mask: Tensor) -> AttentionOutput:
        """Bilinear scoring of query against keys, masked softmax, weighted sum."""
        q = self.score_transform(query) if self.score_transform is not None else query
        scores = torch.bmm(keys, q.unsqueeze(2)).squeeze(2)
        scores, attn_map, sigmoid_map = masked_attention_maps(scores, mask)
        context = torch.bmm(attn_map.unsqueeze(1), values).squeeze(1)
        return AttentionOutput(scores=scores, map=attn_map, sigmoid_map=sigmoid_map,
                               context=context, mask=mask)

    def forward_classification(self, ids: Tensor, lengths: Tensor) -> tuple[Tensor, AttentionOutput]:
        mask = _length_mask(lengths, ids.shape[1], ids.device, self.embedding.weight.dtype)
        h, h_star = self.contextualize(ids, lengths)
        att = self.attention(h_star, h, h, mask)
        probs = torch.softmax(self.classifier(att.context), dim=1)
        return probs, att

    def forward_nli(self, premise_ids: Tensor, premise_lengths: Tensor,
                    hypothesis_ids: Tensor, hypothesis_lengths: Tensor
                    ) -> tuple[Tensor, AttentionOutput, AttentionOutput]:
        """Cross attention: each sentence's summary queries the other's tokens."""
        dtype = self.embedding.weight.dtype
        p_mask = _length_mask(premise_lengths, premise_ids.shape[1], premise_ids.device, dtype)
        h_mask = _length_mask(hypothesis_lengths, hypothesis_ids.shape[1], hypothesis_ids.device, dtype)
        h_p, star_p = self.contextualize(premise_ids, premise_lengths)
        h_h, star_h = self.contextualize(hypothesis_ids, hypothesis_lengths)
        att_premise = self.attention(star_h, h_p, h_p, p_mask)
        att_hypothesis = self.attention(star_p, h_h, h_h, h_mask)
        joint = torch.cat([att_premise.context, att_hypothesis.context], dim=1)
        probs = torch.softmax(self.classifier(joint), dim=1)
        return probs, att_premise, att_hypothesis

    def forward_batch(self, batch: Batch) -> tuple[Tensor, list[AttentionOutput]]:
        """Run the wiring matching the batch's task; returns attention per segment."""
        device = self.embedding.weight.device
        if self.config.task == "nli":
            p, h = batch.segments
            probs, att_p, att_h = self.forward_nli(
                torch.from_numpy(p.ids).to(device), torch.from_numpy(p.lengths),
                torch.from_numpy(h.ids).to(device), torch.from_numpy(h.lengths))
            return probs, [att_p, att_h]
        seg = batch.segments[0]
        probs, att = self.forward_classification(
            torch.from_numpy(seg.ids).to(device), torch.from_numpy(seg.lengths))
        return probs, [att]


def masked_attention_maps(scores: Tensor, mask: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """Masked scores (-inf on padding), softmax map (exactly 0 on padding),
    sigmoid map (0 on padding). Raises on fully masked rows."""
    if bool((mask.sum(dim=1) == 0).any()):
        raise ValueError("attention over a fully masked sequence")
    scores = scores.masked_fill(mask == 0, float("-inf"))
    return scores, torch.softmax(scores, dim=1), torch.sigmoid(scores)


def _length_mask(lengths: Tensor, max_len: int, device, dtype) -> Tensor:
    lengths = lengths.to(device)
    positions = torch.arange(max_len, device=device).unsqueeze(0)
    return (positions < lengths.unsqueeze(1)).to(dtype)


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, model: AttentionClassifier, vocab_hash: str,
                    extra: Optional[dict] = None) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "vocab_hash": vocab_hash,
        "state_dict": model.state_dict(),
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[AttentionClassifier, str, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    config = ModelConfig.from_dict(payload["config"])
    model = AttentionClassifier(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload["vocab_hash"], payload.get("extra", {})
