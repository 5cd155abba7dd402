"""Composite training objective: classification loss plus a weighted
attention constraint.

Three interchangeable constraints on the attention layer:
  * entropy    - length-normalized Shannon entropy of the softmax map
  * supervised - one minus soft Jaccard between the sigmoid map and the
                 binary human annotation
  * semi_supervised - KL divergence from the heuristic target map to the
                 softmax map

All functions are differentiable torch ops and respect padding masks: a
padded position never contributes to any value.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import torch
from torch import Tensor

EPS = 1e-12


class ConstraintKind(str, Enum):
    NONE = "none"
    ENTROPY = "entropy"
    SUPERVISED = "supervised"
    SEMI_SUPERVISED = "semi_supervised"


@dataclass(frozen=True)
class ConstraintConfig:
    kind: ConstraintKind = ConstraintKind.NONE
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")

    @property
    def active(self) -> bool:
        return self.kind is not ConstraintKind.NONE and self.lam > 0.0


@dataclass
class LossBreakdown:
    """total = classification + lam * attention; attention is the raw
    (unweighted) constraint value, zero when the constraint is inactive."""

    classification: Tensor
    attention: Tensor
    total: Tensor
    lam: float
    n_constrained: int = 0
    n_skipped: int = 0


def _as_2d(x, mask=None) -> tuple[Tensor, Tensor, bool]:
    t = x if isinstance(x, Tensor) else torch.as_tensor(x, dtype=torch.float64)
    squeeze = t.dim() == 1
    if squeeze:
        t = t.unsqueeze(0)
    if mask is None:
        m = torch.ones_like(t)
    else:
        m = mask if isinstance(mask, Tensor) else torch.as_tensor(mask)
        m = m.to(t.dtype)
        if m.dim() == 1:
            m = m.unsqueeze(0)
    return t, m, squeeze


def _maybe_squeeze(v: Tensor, squeeze: bool) -> Tensor:
    return v.squeeze(0) if squeeze else v


def cross_entropy(probs, labels) -> Tensor:
    """Mean negative log probability of the gold class; probs are post-softmax."""
    p = probs if isinstance(probs, Tensor) else torch.as_tensor(probs, dtype=torch.float64)
    squeeze = p.dim() == 1
    if squeeze:
        p = p.unsqueeze(0)
    y = torch.as_tensor(labels, dtype=torch.long, device=p.device).reshape(-1)
    picked = p.gather(1, y.unsqueeze(1)).squeeze(1)
    return -torch.log(picked.clamp_min(EPS)).mean()


def entropy_constraint(attention_map, mask=None) -> Tensor:
    """Shannon entropy of the map with the sentence length as log base.

    Uniform maps score 1, one-hot maps score 0; a length-1 sentence scores 0.
    Returns one value per example (scalar for a single map).
    """
    p, m, squeeze = _as_2d(attention_map, mask)
    lengths = m.sum(dim=1)
    terms = torch.where(p * m > 0, p * torch.log(p.clamp_min(EPS)), p.new_zeros(()))
    nats = -(terms * m).sum(dim=1)
    log_len = torch.log(lengths.clamp_min(1.0))
    value = torch.where(lengths > 1, nats / log_len.clamp_min(EPS), nats.new_zeros(()))
    return _maybe_squeeze(value, squeeze)


def jaccard_constraint(sigmoid_map, annotation, mask=None, verbatim: bool = False) -> Tensor:
    """One minus the soft Jaccard similarity between the sigmoid map and the
    binary annotation, over real positions.

    ``verbatim=True`` returns the raw similarity instead (debugging aid: that
    is the quantity as printed in the source formulation, but minimizing it
    pushes attention away from the annotation).
    """
    b, m, squeeze = _as_2d(sigmoid_map, mask)
    a = annotation if isinstance(annotation, Tensor) else torch.as_tensor(annotation, dtype=b.dtype)
    a = a.to(b.dtype)
    if a.dim() == 1:
        a = a.unsqueeze(0)
    inter = (b * a * m).sum(dim=1)
    union = (b * m).sum(dim=1) + (a * m).sum(dim=1) - inter
    similarity = inter / union.clamp_min(EPS)
    value = similarity if verbatim else 1.0 - similarity
    return _maybe_squeeze(value, squeeze)


def kl_constraint(attention_map, heuristic, mask=None) -> Tensor:
    """KL divergence from the heuristic target to the attention map,
    sum_i t_i (log t_i - log p_i), with 0 log 0 = 0 and p clamped at 1e-12."""
    p, m, squeeze = _as_2d(attention_map, mask)
    t = heuristic if isinstance(heuristic, Tensor) else torch.as_tensor(heuristic, dtype=p.dtype)
    t = t.to(p.dtype)
    if t.dim() == 1:
        t = t.unsqueeze(0)
    log_ratio = torch.log(t.clamp_min(EPS)) - torch.log(p.clamp_min(EPS))
    terms = torch.where(t * m > 0, t * log_ratio, p.new_zeros(()))
    value = (terms * m).sum(dim=1)
    return _maybe_squeeze(value, squeeze)


def combined_loss(probs, labels, attention_outputs, config: ConstraintConfig,
                  annotations: Optional[Sequence] = None,
                  heuristics: Optional[Sequence] = None,
                  verbatim_jaccard: bool = False) -> LossBreakdown:
    """Batch objective.

    ``attention_outputs`` is one attention output per segment (attribute
    access: .map, .sigmoid_map, .mask), so NLI passes two and the attention
    term is the mean over segments. ``annotations`` / ``heuristics`` mirror
    the segment structure as (values, valid) pairs of (B, L) / (B,) tensors.

    Supervised modes skip examples lacking their auxiliary input (counted)
    and renormalize the batch mean over the remaining ones; an entirely
    uncovered batch is an error. With kind=none or lam=0 the total IS the
    classification loss, bit for bit.
    """
    if not isinstance(attention_outputs, (list, tuple)):
        attention_outputs = [attention_outputs]
    ce = cross_entropy(probs, labels)
    if not config.active:
        return LossBreakdown(classification=ce, attention=torch.zeros_like(ce),
                             total=ce, lam=config.lam)

    per_segment = []
    valid_per_segment = []
    for s, att in enumerate(attention_outputs):
        mask = att.mask
        if config.kind is ConstraintKind.ENTROPY:
            per_segment.append(entropy_constraint(att.map, mask))
            valid_per_segment.append(torch.ones(att.map.shape[0], dtype=torch.bool))
        elif config.kind is ConstraintKind.SUPERVISED:
            if annotations is None:
                raise ValueError("supervised constraint needs annotations")
            values, valid = _segment_aux(annotations[s], att.map)
            # an all-zero annotation cannot anchor the Jaccard term
            valid = valid & ((values * mask).sum(dim=1) >= 1)
            per_segment.append(jaccard_constraint(att.sigmoid_map, values, mask,
                                                  verbatim=verbatim_jaccard))
            valid_per_segment.append(valid)
        elif config.kind is ConstraintKind.SEMI_SUPERVISED:
            if heuristics is None:
                raise ValueError("semi-supervised constraint needs heuristic maps")
            values, valid = _segment_aux(heuristics[s], att.map)
            per_segment.append(kl_constraint(att.map, values, mask))
            valid_per_segment.append(valid)
        else:  # pragma: no cover
            raise ValueError(f"unhandled constraint kind {config.kind}")

    stacked = torch.stack(per_segment, dim=0)          # (S, B)
    valid = torch.stack(valid_per_segment, dim=0)      # (S, B)
    counts = valid.sum(dim=0)
    per_example = (stacked * valid.to(stacked.dtype)).sum(dim=0) / counts.clamp_min(1)
    covered = counts > 0
    n_constrained = int(covered.sum())
    if n_constrained == 0:
        raise ValueError(f"no example in the batch carries the input required by "
                         f"the {config.kind.value} constraint")
    attention = per_example[covered].mean()
    return LossBreakdown(
        classification=ce,
        attention=attention,
        total=ce + config.lam * attention,
        lam=config.lam,
        n_constrained=n_constrained,
        n_skipped=int((~covered).sum()),
    )


def _segment_aux(aux, like: Tensor) -> tuple[Tensor, Tensor]:
    """Normalize one segment's auxiliary input to (values, valid) tensors."""
    if isinstance(aux, tuple):
        values, valid = aux
    else:
        values, valid = aux, None
    values = values if isinstance(values, Tensor) else torch.as_tensor(values, dtype=like.dtype)
    values = values.to(like.dtype)
    if values.dim() == 1:
        values = values.unsqueeze(0)
    if valid is None:
        valid_t = torch.ones(values.shape[0], dtype=torch.bool)
    else:
        valid_t = valid if isinstance(valid, Tensor) else torch.as_tensor(valid)
        valid_t = valid_t.to(torch.bool)
    return values, valid_t
