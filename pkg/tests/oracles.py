"""Independent reference implementations used to cross-check the package.

Everything here is deliberately naive: exhaustive enumeration and
high-precision arithmetic, no shared code with the implementations under
test.
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 50


def auprc_threshold_enumeration(scores, annotation) -> float:
    """Walk every unique score as a threshold (descending), predict
    score >= threshold, accumulate rectangular area (R_k - R_{k-1}) * P_k."""
    n_pos = sum(annotation)
    assert n_pos >= 1
    area = 0.0
    prev_recall = 0.0
    for t in sorted(set(scores), reverse=True):
        predicted = [s >= t for s in scores]
        tp = sum(1 for p, a in zip(predicted, annotation) if p and a == 1)
        precision = tp / sum(predicted)
        recall = tp / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def entropy_reference(p) -> float:
    length = len(p)
    if length <= 1:
        return 0.0
    nats = -mp.fsum(mp.mpf(x) * mp.log(mp.mpf(x)) for x in p if x > 0)
    return float(nats / mp.log(length))


def kl_reference(attention, target) -> float:
    total = mp.fsum(
        mp.mpf(t) * (mp.log(mp.mpf(t)) - mp.log(mp.mpf(max(p, 1e-12))))
        for t, p in zip(target, attention) if t > 0)
    return float(total)


def jaccard_loss_reference(sigmoid_map, annotation) -> float:
    inter = mp.fsum(mp.mpf(b) * a for b, a in zip(sigmoid_map, annotation))
    union = mp.fsum(mp.mpf(b) for b in sigmoid_map) + sum(annotation) - inter
    return float(1 - inter / union)


def cross_entropy_reference(probs, label) -> float:
    return float(-mp.log(mp.mpf(max(probs[label], 1e-12))))


def finite_difference_gradients(fn, params, h: float = 1e-5):
    """Central finite differences of a scalar fn() with respect to each
    element of each tensor in params (mutated in place and restored)."""
    import torch

    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat = p.view(-1)
            gflat = g.view(-1)
            for i in range(flat.numel()):
                keep = flat[i].item()
                flat[i] = keep + h
                up = fn()
                flat[i] = keep - h
                down = fn()
                flat[i] = keep
                gflat[i] = (up - down) / (2 * h)
            grads.append(g)
    return grads
