"""Cross-modal contrastive loss semantics, gradients, and the joint objective."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xmodal.cmsupcon import (
    BatchFeatures,
    LossConfig,
    LossVariant,
    binary_cross_entropy,
    cm_supcon_grad,
    cm_supcon_loss,
    joint_loss,
    l2_normalize,
    positive_sets,
    vanilla_supcon_loss,
)
from xmodal.core import Label, Modality
from xmodal.errors import LengthMismatchError, ZeroNormRowError

CM = LossConfig(tau=1.0)
VAN = LossConfig(tau=1.0, variant=LossVariant.VANILLA)


def random_batch(rng, n=None, d=None):
    n = n or int(rng.integers(2, 17))
    d = d or int(rng.integers(2, 9))
    z = rng.normal(size=(n, d))
    y = rng.integers(0, 2, n)
    m = rng.integers(0, 2, n)
    return BatchFeatures(z, y, m)


def fd_gradient(z, y, m, cfg, step=1e-5):
    grad = np.zeros_like(z)
    for i in range(z.shape[0]):
        for j in range(z.shape[1]):
            zp = z.copy()
            zp[i, j] += step
            zm = z.copy()
            zm[i, j] -= step
            lp = cm_supcon_loss(BatchFeatures(zp, y, m), cfg).loss
            lm = cm_supcon_loss(BatchFeatures(zm, y, m), cfg).loss
            grad[i, j] = (lp - lm) / (2 * step)
    return grad


class TestL2Normalize:
    def test_three_four_five(self):
        out = l2_normalize(np.array([[3.0, 4.0]]))
        assert np.allclose(out, [[0.6, 0.8]], atol=1e-12)

    def test_unit_row_unchanged(self):
        row = np.array([[1.0, 0.0, 0.0]])
        assert np.allclose(l2_normalize(row), row, atol=1e-12)

    def test_zero_row_rejected(self):
        with pytest.raises(ZeroNormRowError) as err:
            l2_normalize(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert err.value.index == 1

    def test_output_unit_norm(self):
        rng = np.random.default_rng(0)
        out = l2_normalize(rng.normal(size=(20, 6)))
        assert np.allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-9)


class TestPositiveSets:
    def test_cross_modal_definition(self):
        sets = positive_sets(
            [Label.FAKE, Label.FAKE, Label.REAL],
            [Modality.IMAGE, Modality.VIDEO, Modality.VIDEO],
        )
        assert sets.positives[0].tolist() == [1]
        assert sets.positives[1].tolist() == [0]
        assert sets.positives[2].tolist() == []
        assert sets.valid.tolist() == [0, 1]

    def test_single_modality_all_empty(self):
        sets = positive_sets([0, 0, 1, 1], [0, 0, 0, 0])
        assert all(len(p) == 0 for p in sets.positives)
        assert sets.valid.size == 0

    def test_singleton(self):
        sets = positive_sets([1], [0])
        assert sets.positives[0].size == 0 and sets.valid.size == 0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            positive_sets([0, 1], [0])


class TestCmSupconLoss:
    def test_two_sample_cross_modal_pair_is_zero(self):
        # denominator holds exactly the positive term, so each log-ratio is 0
        rng = np.random.default_rng(0)
        for _ in range(5):
            z = rng.normal(size=(2, 4))
            batch = BatchFeatures(z, [0, 0], [0, 1])
            assert cm_supcon_loss(batch, LossConfig(tau=0.3)).loss == pytest.approx(
                0.0, abs=1e-12
            )

    def test_hand_derived_three_sample_value(self):
        z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        batch = BatchFeatures(z, [0, 0, 1], [0, 1, 1])
        result = cm_supcon_loss(batch, CM)
        expected = math.log(1.0 + math.exp(-1.0))
        assert result.loss == pytest.approx(expected, abs=1e-6)
        assert result.loss == pytest.approx(0.313262, abs=1e-6)
        assert result.valid.tolist() == [0, 1]
        assert result.per_anchor[0] == pytest.approx(expected, abs=1e-9)
        assert result.per_anchor[2] == 0.0

    def test_all_image_batch_is_exactly_zero(self):
        rng = np.random.default_rng(1)
        batch = BatchFeatures(rng.normal(size=(6, 4)), rng.integers(0, 2, 6), np.zeros(6))
        assert cm_supcon_loss(batch, CM).loss == 0.0

    def test_non_negativity_random(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            batch = random_batch(rng)
            for tau in (0.07, 0.5, 1.0):
                assert cm_supcon_loss(batch, LossConfig(tau=tau)).loss >= 0.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            batch = random_batch(rng)
            perm = rng.permutation(batch.n)
            shuffled = BatchFeatures(batch.z[perm], batch.y[perm], batch.m[perm])
            a = cm_supcon_loss(batch, LossConfig(tau=0.07)).loss
            b = cm_supcon_loss(shuffled, LossConfig(tau=0.07)).loss
            assert a == pytest.approx(b, abs=1e-12)

    def test_row_scaling_invariance(self):
        rng = np.random.default_rng(4)
        batch = random_batch(rng, n=8, d=5)
        scales = rng.uniform(0.01, 100.0, size=(8, 1))
        scaled = BatchFeatures(batch.z * scales, batch.y, batch.m)
        a = cm_supcon_loss(batch, LossConfig(tau=0.07)).loss
        b = cm_supcon_loss(scaled, LossConfig(tau=0.07)).loss
        assert a == pytest.approx(b, abs=1e-9)

    def test_tau_stability_and_continuity(self):
        rng = np.random.default_rng(5)
        batch = random_batch(rng, n=10, d=4)
        taus = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]
        losses = [cm_supcon_loss(batch, LossConfig(tau=t)).loss for t in taus]
        assert all(np.isfinite(losses))
        # continuity probe: nearby taus give nearby losses
        for t in (0.07, 0.5):
            a = cm_supcon_loss(batch, LossConfig(tau=t)).loss
            b = cm_supcon_loss(batch, LossConfig(tau=t * (1 + 1e-9))).loss
            assert a == pytest.approx(b, rel=1e-6)

    def test_variant_guard(self):
        batch = random_batch(np.random.default_rng(0), n=4, d=3)
        with pytest.raises(ValueError):
            cm_supcon_loss(batch, VAN)
        with pytest.raises(ValueError):
            vanilla_supcon_loss(batch, CM)


class TestVanillaSupcon:
    def test_identical_pair_zero(self):
        z = np.array([[0.3, 0.4], [0.3, 0.4]])
        batch = BatchFeatures(z, [1, 1], [0, 0])
        for tau in (0.07, 1.0):
            assert vanilla_supcon_loss(batch, LossConfig(tau=tau, variant=LossVariant.VANILLA)) == pytest.approx(0.0, abs=1e-12)

    def test_single_modality_can_be_positive(self):
        rng = np.random.default_rng(6)
        z = rng.normal(size=(6, 4))
        y = np.array([0, 0, 0, 1, 1, 1])
        m = np.zeros(6)
        batch = BatchFeatures(z, y, m)
        assert vanilla_supcon_loss(batch, VAN) > 0.0
        assert cm_supcon_loss(batch, CM).loss == 0.0

    def test_equal_when_all_same_label_pairs_cross_modal(self):
        # one sample per (label, modality): every same-label pair crosses modality
        rng = np.random.default_rng(7)
        z = rng.normal(size=(4, 5))
        y = np.array([0, 0, 1, 1])
        m = np.array([0, 1, 0, 1])
        batch = BatchFeatures(z, y, m)
        a = cm_supcon_loss(batch, LossConfig(tau=0.2)).loss
        b = vanilla_supcon_loss(batch, LossConfig(tau=0.2, variant=LossVariant.VANILLA))
        assert a == pytest.approx(b, abs=1e-12)


class TestGradient:
    def test_empty_valid_set_zero_gradient(self):
        rng = np.random.default_rng(8)
        batch = BatchFeatures(rng.normal(size=(5, 4)), rng.integers(0, 2, 5), np.zeros(5))
        assert np.all(cm_supcon_grad(batch, CM) == 0.0)

    def test_two_sample_zero_loss_has_zero_gradient(self):
        rng = np.random.default_rng(9)
        z = rng.normal(size=(2, 4))
        batch = BatchFeatures(z, [0, 0], [0, 1])
        grad = cm_supcon_grad(batch, LossConfig(tau=0.5))
        fd = fd_gradient(z, np.array([0, 0]), np.array([0, 1]), LossConfig(tau=0.5))
        assert np.abs(grad).max() < 1e-12
        assert np.abs(fd).max() < 1e-6

    @pytest.mark.parametrize("tau", [0.07, 0.5, 1.0])
    def test_matches_finite_differences(self, tau):
        rng = np.random.default_rng(int(tau * 1000))
        cfg = LossConfig(tau=tau)
        for _ in range(10):
            batch = random_batch(rng)
            grad = cm_supcon_grad(batch, cfg)
            fd = fd_gradient(batch.z.copy(), batch.y, batch.m, cfg)
            rel = np.abs(grad - fd) / np.maximum(1.0, np.abs(fd))
            assert rel.max() <= 1e-5


class TestJointLoss:
    def test_lambda_zero_is_pure_bce(self):
        rng = np.random.default_rng(10)
        batch = random_batch(rng, n=6, d=4)
        logits = rng.normal(size=6)
        result = joint_loss(logits, batch.y, batch, 0.0, LossConfig(tau=0.07))
        assert result.total == result.bce

    def test_logit_zero_fake_target_is_ln2(self):
        assert binary_cross_entropy(np.array([0.0]), np.array([1.0])) == pytest.approx(
            math.log(2.0), abs=1e-12
        )

    def test_component_arithmetic(self):
        z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        batch = BatchFeatures(z, [0, 0, 1], [0, 1, 1])
        logits = np.zeros(3)
        targets = np.array([1, 1, 1])
        result = joint_loss(logits, targets, batch, 0.05, CM)
        assert result.bce == pytest.approx(math.log(2.0), abs=1e-12)
        assert result.contrastive == pytest.approx(0.313262, abs=1e-6)
        assert result.total == pytest.approx(
            math.log(2.0) + 0.05 * 0.313262, abs=1e-6
        )

    def test_length_mismatch(self):
        batch = random_batch(np.random.default_rng(0), n=4, d=3)
        with pytest.raises(LengthMismatchError):
            joint_loss(np.zeros(3), batch.y, batch, 0.0, CM)

    def test_extreme_logits_stay_finite(self):
        logits = np.array([1000.0, -1000.0])
        targets = np.array([0.0, 1.0])
        assert np.isfinite(binary_cross_entropy(logits, targets))
        assert binary_cross_entropy(logits, targets) == pytest.approx(1000.0, rel=1e-9)


@st.composite
def feature_batches(draw):
    n = draw(st.integers(min_value=2, max_value=10))
    d = draw(st.integers(min_value=2, max_value=5))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, d))
    y = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    m = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    return BatchFeatures(z, np.array(y), np.array(m))


@given(feature_batches(), st.sampled_from([0.07, 0.5, 1.0]))
@settings(max_examples=60, deadline=None)
def test_property_nonneg_and_scale_invariance(batch, tau):
    cfg = LossConfig(tau=tau)
    loss = cm_supcon_loss(batch, cfg).loss
    assert loss >= 0.0
    assert np.isfinite(loss)
    scaled = BatchFeatures(batch.z * 7.5, batch.y, batch.m)
    assert cm_supcon_loss(scaled, cfg).loss == pytest.approx(loss, abs=1e-9)


@given(feature_batches())
@settings(max_examples=40, deadline=None)
def test_property_single_modality_zero_vs_vanilla(batch):
    uni = BatchFeatures(batch.z, batch.y, np.zeros(batch.n, dtype=np.int8))
    assert cm_supcon_loss(uni, LossConfig(tau=0.07)).loss == 0.0
    # vanilla ignores modality entirely
    a = vanilla_supcon_loss(
        BatchFeatures(batch.z, batch.y, batch.m),
        LossConfig(tau=0.5, variant=LossVariant.VANILLA),
    )
    b = vanilla_supcon_loss(uni, LossConfig(tau=0.5, variant=LossVariant.VANILLA))
    assert a == pytest.approx(b, abs=1e-12)


class TestFromSamples:
    def test_embedded_samples_round_trip(self):
        from xmodal.core import EmbeddedSample

        samples = [
            EmbeddedSample(np.array([1.0, 0.0]), Label.REAL, Modality.IMAGE),
            EmbeddedSample(np.array([1.0, 0.0]), Label.REAL, Modality.VIDEO),
            EmbeddedSample(np.array([0.0, 1.0]), Label.FAKE, Modality.VIDEO),
        ]
        batch = BatchFeatures.from_samples(samples)
        assert batch.y.tolist() == [0, 0, 1]
        assert batch.m.tolist() == [0, 1, 1]
        assert cm_supcon_loss(batch, CM).loss == pytest.approx(0.313262, abs=1e-6)
