import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from plausattn.objective import (ConstraintConfig, ConstraintKind,
                                 combined_loss, cross_entropy,
                                 entropy_constraint, jaccard_constraint,
                                 kl_constraint)
from oracles import (cross_entropy_reference, entropy_reference,
                     jaccard_loss_reference, kl_reference)

simplex = st.integers(2, 6).flatmap(
    lambda L: st.lists(st.floats(1e-6, 1.0), min_size=L, max_size=L)
).map(lambda w: (np.asarray(w) / np.sum(w)).tolist())


class TestCrossEntropy:
    def test_confident_correct(self):
        assert float(cross_entropy([1.0, 0.0], 0)) == 0.0

    def test_uniform_three_classes(self):
        value = float(cross_entropy([1 / 3, 1 / 3, 1 / 3], 1))
        assert value == pytest.approx(math.log(3), abs=1e-6)
        assert value == pytest.approx(cross_entropy_reference([1 / 3] * 3, 1), abs=1e-6)

    def test_half_probability(self):
        assert float(cross_entropy([0.5, 0.5], 0)) == pytest.approx(math.log(2), abs=1e-6)

    def test_batch_mean(self):
        value = float(cross_entropy([[1.0, 0.0], [0.5, 0.5]], [0, 1]))
        assert value == pytest.approx(0.5 * math.log(2), abs=1e-6)

    def test_zero_probability_clamped(self):
        assert math.isfinite(float(cross_entropy([0.0, 1.0], 0)))


class TestEntropyConstraint:
    @pytest.mark.parametrize("L", [2, 3, 5, 9])
    def test_uniform_is_one(self, L):
        assert float(entropy_constraint([1 / L] * L)) == pytest.approx(1.0, abs=1e-6)

    def test_one_hot_is_zero(self):
        assert float(entropy_constraint([0.0, 1.0, 0.0])) == pytest.approx(0.0, abs=1e-9)

    def test_skewed_three_tokens(self):
        value = float(entropy_constraint([0.5, 0.25, 0.25]))
        assert value == pytest.approx(0.9464, abs=1e-4)
        assert value == pytest.approx(entropy_reference([0.5, 0.25, 0.25]), abs=1e-6)

    def test_single_token_is_zero(self):
        assert float(entropy_constraint([1.0])) == 0.0

    def test_mask_excludes_padding(self):
        padded = float(entropy_constraint([0.5, 0.25, 0.25, 0.0, 0.0],
                                          mask=[1, 1, 1, 0, 0]))
        assert padded == pytest.approx(entropy_reference([0.5, 0.25, 0.25]), abs=1e-9)

    @given(simplex)
    @settings(max_examples=100, deadline=None)
    def test_range_and_reference(self, p):
        value = float(entropy_constraint(p))
        assert -1e-9 <= value <= 1.0 + 1e-9
        assert value == pytest.approx(entropy_reference(p), abs=1e-6)


class TestJaccardConstraint:
    def test_exact_binary_match_is_zero(self):
        assert float(jaccard_constraint([1.0, 0.0, 1.0], [1, 0, 1])) == pytest.approx(0.0, abs=1e-9)

    def test_half_scores(self):
        value = float(jaccard_constraint([0.5, 0.5], [1, 0]))
        assert value == pytest.approx(2 / 3, abs=1e-6)
        assert value == pytest.approx(jaccard_loss_reference([0.5, 0.5], [1, 0]), abs=1e-6)

    def test_disjoint_is_one(self):
        assert float(jaccard_constraint([0.0, 0.0], [1, 0])) == pytest.approx(1.0, abs=1e-9)

    def test_verbatim_flag_returns_similarity(self):
        loss = float(jaccard_constraint([0.5, 0.5], [1, 0]))
        similarity = float(jaccard_constraint([0.5, 0.5], [1, 0], verbatim=True))
        assert similarity == pytest.approx(1 - loss, abs=1e-9)

    def test_mask_excludes_padding(self):
        bare = float(jaccard_constraint([0.7, 0.2], [1, 0]))
        padded = float(jaccard_constraint([0.7, 0.2, 0.9, 0.9], [1, 0, 0, 0],
                                          mask=[1, 1, 0, 0]))
        assert padded == pytest.approx(bare, abs=1e-9)

    @given(st.integers(2, 6).flatmap(lambda L: st.tuples(
        st.lists(st.floats(0.0, 1.0), min_size=L, max_size=L),
        st.lists(st.integers(0, 1), min_size=L, max_size=L).filter(lambda a: sum(a) >= 1))))
    @settings(max_examples=100, deadline=None)
    def test_range_and_reference(self, args):
        b, a = args
        value = float(jaccard_constraint(b, a))
        assert -1e-9 <= value <= 1.0 + 1e-9
        assert value == pytest.approx(jaccard_loss_reference(b, a), abs=1e-6)


class TestKlConstraint:
    def test_identical_is_zero(self):
        assert float(kl_constraint([0.3, 0.7], [0.3, 0.7])) == pytest.approx(0.0, abs=1e-9)

    def test_one_hot_target(self):
        value = float(kl_constraint([0.5, 0.5], [1.0, 0.0]))
        assert value == pytest.approx(math.log(2), abs=1e-6)

    def test_skewed_map(self):
        value = float(kl_constraint([0.9, 0.1], [0.5, 0.5]))
        assert value == pytest.approx(0.5108, abs=1e-4)
        assert value == pytest.approx(kl_reference([0.9, 0.1], [0.5, 0.5]), abs=1e-6)

    def test_mask_excludes_padding(self):
        bare = float(kl_constraint([0.9, 0.1], [0.5, 0.5]))
        padded = float(kl_constraint([0.9, 0.1, 0.0], [0.5, 0.5, 0.0], mask=[1, 1, 0]))
        assert padded == pytest.approx(bare, abs=1e-9)

    @given(st.tuples(simplex, simplex).filter(lambda ab: len(ab[0]) == len(ab[1])))
    @settings(max_examples=100, deadline=None)
    def test_nonnegative_and_reference(self, ab):
        p, t = ab
        value = float(kl_constraint(p, t))
        assert value >= -1e-9
        assert value == pytest.approx(kl_reference(p, t), abs=1e-6)


class _FakeAttention:
    """Minimal stand-in carrying the fields combined_loss reads."""

    def __init__(self, attn_map, scores=None, mask=None):
        self.map = torch.as_tensor(attn_map, dtype=torch.float64)
        if self.map.dim() == 1:
            self.map = self.map.unsqueeze(0)
        self.mask = (torch.as_tensor(mask, dtype=torch.float64).reshape(self.map.shape)
                     if mask is not None else torch.ones_like(self.map))
        s = torch.log(self.map.clamp_min(1e-9)) if scores is None else \
            torch.as_tensor(scores, dtype=torch.float64).reshape(self.map.shape)
        self.sigmoid_map = torch.sigmoid(s) * self.mask
        self.scores = s


class TestCombinedLoss:
    def test_none_kind_is_classification_only(self):
        probs = torch.tensor([[0.7, 0.3]], dtype=torch.float64)
        att = _FakeAttention([[0.5, 0.5]])
        out = combined_loss(probs, [0], att, ConstraintConfig("none", 0.0))
        assert out.total is out.classification
        assert float(out.attention) == 0.0

    def test_lambda_zero_is_classification_bit_for_bit(self):
        probs = torch.tensor([[0.7, 0.3]], dtype=torch.float64)
        att = _FakeAttention([[0.5, 0.5]])
        out = combined_loss(probs, [0], att, ConstraintConfig("entropy", 0.0),
                            annotations=[(torch.tensor([[1.0, 0.0]]), None)])
        assert out.total is out.classification

    def test_weighted_sum_arithmetic(self):
        # classification ln2, entropy of uniform pair = 1.0, lambda 0.05
        probs = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
        att = _FakeAttention([[0.5, 0.5]])
        out = combined_loss(probs, [0], att, ConstraintConfig("entropy", 0.05))
        assert float(out.total) == pytest.approx(math.log(2) + 0.05 * 1.0, abs=1e-9)

    def test_nli_segment_mean(self):
        probs = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
        seg_a = _FakeAttention([[0.5, 0.5]])            # entropy 1.0
        seg_b = _FakeAttention([[1.0, 0.0]])            # entropy 0.0
        out = combined_loss(probs, [0], [seg_a, seg_b], ConstraintConfig("entropy", 0.1))
        assert float(out.attention) == pytest.approx(0.5, abs=1e-9)

    def test_supervised_skips_uncovered_examples(self):
        probs = torch.tensor([[0.5, 0.5], [0.5, 0.5]], dtype=torch.float64)
        att = _FakeAttention([[0.5, 0.5], [0.5, 0.5]])
        ann = torch.tensor([[1.0, 0.0], [0.0, 0.0]])
        valid = torch.tensor([True, False])
        out = combined_loss(probs, [0, 1], att, ConstraintConfig("supervised", 0.1),
                            annotations=[(ann, valid)])
        assert out.n_constrained == 1
        assert out.n_skipped == 1
        expected = float(jaccard_constraint(att.sigmoid_map[0], [1.0, 0.0]))
        assert float(out.attention) == pytest.approx(expected, abs=1e-9)

    def test_all_zero_annotation_counts_as_missing(self):
        probs = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
        att = _FakeAttention([[0.5, 0.5]])
        ann = torch.tensor([[0.0, 0.0]])
        with pytest.raises(ValueError, match="supervised"):
            combined_loss(probs, [0], att, ConstraintConfig("supervised", 0.1),
                          annotations=[(ann, torch.tensor([True]))])

    def test_semi_supervised_requires_heuristic(self):
        probs = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
        att = _FakeAttention([[0.5, 0.5]])
        with pytest.raises(ValueError):
            combined_loss(probs, [0], att, ConstraintConfig("semi_supervised", 0.1))

    def test_lambda_validated(self):
        with pytest.raises(ValueError):
            ConstraintConfig("entropy", 1.5)


class TestConstraintGradients:
    """Central finite differences on the raw score vector for each constraint."""

    def _check(self, fn, scores, h=1e-6, tol=1e-3):
        x = torch.tensor(scores, dtype=torch.float64, requires_grad=True)
        fn(x).backward()
        analytic = x.grad.clone()
        with torch.no_grad():
            for i in range(x.numel()):
                keep = float(x[i])
                x[i] = keep + h
                up = float(fn(x))
                x[i] = keep - h
                down = float(fn(x))
                x[i] = keep
                numeric = (up - down) / (2 * h)
                a = float(analytic[i])
                assert abs(a - numeric) <= 1e-8 + tol * max(abs(a), abs(numeric)), \
                    f"grad mismatch at {i}: {a} vs {numeric}"

    def test_entropy_gradient(self):
        self._check(lambda x: entropy_constraint(torch.softmax(x, dim=0)),
                    [0.3, -0.2, 0.9, 0.1, -0.5])

    def test_jaccard_gradient(self):
        target = torch.tensor([1.0, 0.0, 1.0, 0.0, 0.0])
        self._check(lambda x: jaccard_constraint(torch.sigmoid(x), target),
                    [0.3, -0.2, 0.9, 0.1, -0.5])

    def test_kl_gradient(self):
        heur = torch.tensor([0.5, 0.1, 0.2, 0.1, 0.1])
        self._check(lambda x: kl_constraint(torch.softmax(x, dim=0), heur),
                    [0.3, -0.2, 0.9, 0.1, -0.5])
