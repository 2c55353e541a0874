import math

import pytest
import torch
import torch.nn.functional as F

from covergen import LossBundle, LossWeights, ObjectDiscriminator
from covergen.losses import (
    PROB_EPS,
    TERM_ORDER,
    book_adv_generator,
    book_adv_loss,
    box_loss,
    clamp_prob,
    layout_adv_generator,
    layout_adv_loss,
    layout_feature_matching,
    log_gan_terms,
    lsgan_terms,
    mask_adv_generator,
    mask_adv_loss,
    mask_feature_matching,
    object_adv_generator,
    object_adv_loss,
    perceptual_content_loss,
    pixel_loss,
)

LOG2 = math.log(2.0)


class ConstDisc:
    """Discriminator stub emitting one constant score per item."""

    def __init__(self, value):
        self.value = float(value)

    def __call__(self, first, *rest, return_features=False):
        scores = torch.full((first.shape[0],), self.value, dtype=first.dtype)
        if return_features:
            return scores, [torch.zeros(first.shape[0], 2)]
        return scores

    def score(self, crops, category_ids):
        return torch.full((crops.shape[0],), self.value)


class MeanDisc:
    """Score = mean of the first input; separates all-ones from all-zeros."""

    def __call__(self, first, *rest, return_features=False):
        scores = first.reshape(first.shape[0], -1).mean(dim=1)
        if return_features:
            return scores, [first]
        return scores

    def score(self, crops, category_ids):
        return crops.reshape(crops.shape[0], -1).mean(dim=1)


class FeatureDisc:
    """Two feature layers with a known, hand-computable relationship."""

    def __call__(self, x, cond=None, return_features=False):
        feats = [x * 2.0, x.reshape(x.shape[0], -1).sum(dim=1, keepdim=True)]
        scores = x.reshape(x.shape[0], -1).mean(dim=1)
        if return_features:
            return scores, feats
        return scores


class StubPerception:
    def __call__(self, x):
        return [x, F.avg_pool2d(x, 2)]


class TestReconstructionTerms:
    def test_pixel_extremes(self):
        a = torch.ones(3, 8, 8)
        assert float(pixel_loss(a, -a)) == 2.0
        assert float(pixel_loss(a, a)) == 0.0

    def test_pixel_is_mean_absolute(self):
        g = torch.zeros(1, 2, 2)
        t = torch.tensor([[[0.0, 1.0], [0.0, -1.0]]])
        assert float(pixel_loss(g, t)) == 0.5

    def test_box_single_coordinate_offset(self):
        gt = torch.tensor([[0.2, 0.2, 0.8, 0.8]])
        pred = gt.clone()
        pred[0, 0] += 0.1
        assert float(box_loss(pred, gt)) == pytest.approx(0.025)

    def test_box_mean_over_objects(self):
        gt = torch.zeros(4, 4)
        pred = torch.full((4, 4), 0.25)
        assert float(box_loss(pred, gt)) == pytest.approx(0.25)

    def test_box_shape_mismatch(self):
        with pytest.raises(ValueError, match="not aligned"):
            box_loss(torch.zeros(3, 4), torch.zeros(2, 4))

    def test_content_zero_on_identical_and_symmetric(self):
        torch.manual_seed(0)
        p = StubPerception()
        x = torch.rand(1, 3, 16, 16)
        y = torch.rand(1, 3, 16, 16)
        assert float(perceptual_content_loss(p, x, x)) == 0.0
        assert float(perceptual_content_loss(p, x, y)) == pytest.approx(
            float(perceptual_content_loss(p, y, x))
        )

    def test_content_sums_layer_means(self):
        p = StubPerception()
        x = torch.zeros(1, 1, 4, 4)
        y = torch.ones(1, 1, 4, 4)
        # raw layer differs by 1 everywhere, pooled layer also by 1
        assert float(perceptual_content_loss(p, x, y)) == pytest.approx(2.0)


class TestGanPrimitives:
    def test_lsgan_uninformative_fixed_point(self):
        half = torch.full((4,), 0.5)
        d, g = lsgan_terms(half, half)
        assert float(d) == pytest.approx(0.5)
        assert float(g) == pytest.approx(0.25)

    def test_lsgan_perfect_discriminator(self):
        d, g = lsgan_terms(torch.ones(3), torch.zeros(3))
        assert float(d) == 0.0
        assert float(g) == 1.0

    def test_log_uninformative_fixed_point(self):
        zero = torch.zeros(4)  # sigmoid -> 0.5
        d, g = log_gan_terms(zero, zero)
        assert float(d) == pytest.approx(2 * LOG2, rel=1e-6)
        assert float(g) == pytest.approx(-LOG2, rel=1e-6)

    def test_log_generator_term_saturates(self):
        # The harder the discriminator rejects the fakes, the flatter the
        # generator term: it levels off at zero instead of growing without
        # bound, so a runaway discriminator cannot dominate the generator.
        weak, strong = torch.full((2,), -1.0), torch.full((2,), -8.0)
        _, g_weak = log_gan_terms(torch.zeros(2), weak)
        _, g_strong = log_gan_terms(torch.zeros(2), strong)
        assert float(g_strong) > float(g_weak)
        assert abs(float(g_strong)) < 1e-3

    def test_log_terms_finite_at_saturation(self):
        d, g = log_gan_terms(torch.full((2,), 1000.0), torch.full((2,), -1000.0))
        assert math.isfinite(float(d)) and math.isfinite(float(g))
        d, g = log_gan_terms(torch.tensor([0.0, 1.0]), torch.tensor([1.0, 0.0]), already_probability=True)
        assert math.isfinite(float(d)) and math.isfinite(float(g))

    def test_clamp_prob_bounds(self):
        p = clamp_prob(torch.tensor([-1.0, 0.0, 0.5, 1.0, 2.0]))
        assert float(p.min()) == pytest.approx(PROB_EPS, rel=1e-6)
        assert float(p.max()) == pytest.approx(1.0 - PROB_EPS, rel=1e-6)


class TestMaskAdversarial:
    def test_uninformative_fixed_point_lsgan(self):
        masks = torch.rand(4, 32, 32)
        d, g = mask_adv_loss(ConstDisc(0.5), masks, masks, torch.zeros(4, dtype=torch.long))
        assert float(d) == pytest.approx(0.5)
        assert float(g) == pytest.approx(0.25)

    def test_uninformative_fixed_point_log_form(self):
        masks = torch.rand(4, 32, 32)
        d, g = mask_adv_loss(ConstDisc(0.0), masks, masks, torch.zeros(4, dtype=torch.long), form="log")
        assert float(d) == pytest.approx(2 * LOG2, rel=1e-6)
        assert float(g) == pytest.approx(-LOG2, rel=1e-6)

    def test_perfect_discriminator_vanishes(self):
        d, _ = mask_adv_loss(MeanDisc(), torch.ones(3, 32, 32), torch.zeros(3, 32, 32), torch.zeros(3, dtype=torch.long))
        assert float(d) == 0.0

    def test_generator_only_matches_two_sided(self):
        torch.manual_seed(1)
        masks = torch.rand(4, 32, 32)
        disc = MeanDisc()
        _, g = mask_adv_loss(disc, torch.rand(4, 32, 32), masks, torch.zeros(4, dtype=torch.long))
        g_only = mask_adv_generator(disc, masks, torch.zeros(4, dtype=torch.long))
        assert torch.equal(g, g_only)

    def test_unknown_form_rejected(self):
        with pytest.raises(ValueError, match="unknown mask GAN form"):
            mask_adv_loss(ConstDisc(0.5), torch.rand(1, 32, 32), torch.rand(1, 32, 32), torch.zeros(1, dtype=torch.long), form="wgan")


class TestLayoutAdversarial:
    @staticmethod
    def _maps(fill_q=0.0, fill_qp=0.0, fill_f=0.0):
        q = torch.full((1, 5, 8, 8), fill_q)
        qp = torch.full((1, 5, 8, 8), fill_qp)
        f = torch.full((1, 5, 8, 8), fill_f)
        r = torch.zeros(1, 3, 8, 8)
        i = torch.zeros(1, 3, 8, 8)
        return q, qp, f, r, i

    def test_uninformative_fixed_point(self):
        q, qp, f, r, i = self._maps()
        d, g = layout_adv_loss(MeanDisc(), q, qp, f, r, i)
        assert float(d) == pytest.approx(4 * LOG2, rel=1e-6)
        assert float(g) == pytest.approx(-2 * LOG2, rel=1e-6)

    def test_mismatch_flag_flips_one_term(self):
        logit_08 = math.log(0.8 / 0.2)
        q, qp, f, r, i = self._maps(fill_qp=logit_08)
        d_real, _ = layout_adv_loss(MeanDisc(), q, qp, f, r, i, mismatch_as_real=True)
        d_fake, _ = layout_adv_loss(MeanDisc(), q, qp, f, r, i, mismatch_as_real=False)
        # -log(0.8) vs -log(0.2): the flag changes d by exactly log 4
        assert float(d_fake - d_real) == pytest.approx(math.log(4.0), rel=1e-5)

    def test_generator_only_matches_two_sided(self):
        torch.manual_seed(2)
        q, qp = torch.rand(2, 5, 8, 8), torch.rand(2, 5, 8, 8)
        f = torch.rand(2, 5, 8, 8)
        r, i = torch.rand(2, 3, 8, 8), torch.rand(2, 3, 8, 8)
        disc = MeanDisc()
        _, g = layout_adv_loss(disc, q, qp, f, r, i)
        assert torch.equal(g, layout_adv_generator(disc, q, f, r, i))

    def test_generator_term_covers_both_crossed_pairs(self):
        # Changing either generated input alone must move the generator term:
        # F paired with the real image R, and the real layout Q paired with
        # the generated image I both carry generator gradient.
        class PairDisc:
            def __call__(self, first, second, return_features=False):
                a = first.reshape(first.shape[0], -1).mean(dim=1)
                b = second.reshape(second.shape[0], -1).mean(dim=1)
                return a + b

        q, qp, f, r, i = self._maps()
        base = float(layout_adv_generator(PairDisc(), q, f, r, i))
        f_bad = torch.full_like(f, 4.0)
        i_bad = torch.full_like(i, 4.0)
        assert float(layout_adv_generator(PairDisc(), q, f_bad, r, i)) != base
        assert float(layout_adv_generator(PairDisc(), q, f, r, i_bad)) != base


class TestBookAdversarial:
    def test_uninformative_fixed_point(self):
        covers = torch.rand(3, 3, 16, 16)
        d, g = book_adv_loss(ConstDisc(0.5), covers, covers)
        assert float(d) == pytest.approx(2 * LOG2, rel=1e-6)
        assert float(g) == pytest.approx(-LOG2, rel=1e-6)

    def test_generator_term_rewards_fooling(self):
        covers = torch.rand(2, 3, 16, 16)
        _, g_fooled = book_adv_loss(ConstDisc(0.9), covers, covers)
        _, g_caught = book_adv_loss(ConstDisc(0.1), covers, covers)
        assert float(g_fooled) < float(g_caught)
        # a discriminator that fully rejects the fakes contributes almost
        # nothing, instead of an unbounded penalty
        _, g_rejected = book_adv_loss(ConstDisc(0.0), covers, covers)
        assert abs(float(g_rejected)) < 1e-5

    def test_saturated_probabilities_stay_finite(self):
        covers = torch.rand(2, 3, 16, 16)
        d, g = book_adv_loss(ConstDisc(0.0), covers, covers)
        assert math.isfinite(float(d)) and math.isfinite(float(g))
        d, g = book_adv_loss(ConstDisc(1.0), covers, covers)
        assert math.isfinite(float(d)) and math.isfinite(float(g))

    def test_generator_only_matches_two_sided(self):
        disc = ConstDisc(0.3)
        gen = torch.rand(2, 3, 16, 16)
        _, g = book_adv_loss(disc, torch.rand(2, 3, 16, 16), gen)
        assert torch.equal(g, book_adv_generator(disc, gen))


class TestObjectAdversarial:
    def test_identical_crops_make_zero(self):
        torch.manual_seed(0)
        disc = ObjectDiscriminator(num_categories=4).eval()
        crops = torch.rand(3, 3, 64, 64)
        cats = torch.tensor([0, 1, 3])
        with torch.no_grad():
            d, _ = object_adv_loss(disc, crops, crops, cats)
        assert float(d) == 0.0

    def test_sum_is_additive_over_objects(self):
        torch.manual_seed(1)
        disc = ObjectDiscriminator(num_categories=4).eval()
        real = torch.rand(4, 3, 64, 64)
        fake = torch.rand(4, 3, 64, 64)
        cats = torch.tensor([0, 1, 2, 3])
        with torch.no_grad():
            d_all, g_all = object_adv_loss(disc, real, fake, cats)
        d_sum = g_sum = 0.0
        for k in range(4):
            with torch.no_grad():
                d_k, g_k = object_adv_loss(disc, real[k : k + 1], fake[k : k + 1], cats[k : k + 1])
            d_sum += float(d_k)
            g_sum += float(g_k)
        assert float(d_all) == pytest.approx(d_sum, rel=1e-5)
        assert float(g_all) == pytest.approx(g_sum, rel=1e-5)

    def test_generator_only_matches_two_sided(self):
        torch.manual_seed(2)
        disc = ObjectDiscriminator(num_categories=4).eval()
        fake = torch.rand(2, 3, 64, 64)
        cats = torch.tensor([1, 2])
        with torch.no_grad():
            _, g = object_adv_loss(disc, torch.rand(2, 3, 64, 64), fake, cats)
            assert torch.equal(g, object_adv_generator(disc, fake, cats))


class TestFeatureMatching:
    def test_identical_inputs_give_zero(self):
        masks = torch.rand(2, 4, 4)
        assert float(mask_feature_matching(FeatureDisc(), masks, masks, None)) == 0.0
        q = torch.rand(2, 5, 8, 8)
        r = torch.rand(2, 3, 8, 8)
        assert float(layout_feature_matching(FeatureDisc(), q, r, q, r)) == 0.0

    def test_two_layer_stub_oracle(self):
        real = torch.zeros(1, 2, 2)
        fake = torch.ones(1, 2, 2)
        # layer 1: |0 - 2| mean = 2; layer 2: |0 - 4| = 4
        got = mask_feature_matching(FeatureDisc(), real, fake, None)
        assert float(got) == pytest.approx(6.0)

    def test_nonnegative(self):
        torch.manual_seed(3)
        for _ in range(20):
            a, b = torch.randn(2, 3, 3), torch.randn(2, 3, 3)
            assert float(mask_feature_matching(FeatureDisc(), a, b, None)) >= 0.0

    def test_real_side_is_detached(self):
        real = torch.rand(1, 2, 2, requires_grad=True)
        fake = torch.rand(1, 2, 2, requires_grad=True)
        mask_feature_matching(FeatureDisc(), real, fake, None).backward()
        assert real.grad is None
        assert fake.grad is not None and fake.grad.abs().sum() > 0


class TestWeightsAndBundle:
    def test_default_weights(self):
        w = LossWeights()
        assert [w[t] for t in TERM_ORDER] == [1.0, 10.0, 10.0, 1.0, 0.1, 1.0, 1.0, 10.0, 10.0]

    def test_unit_terms_total(self):
        bundle = LossBundle({t: 1.0 for t in TERM_ORDER}, LossWeights())
        assert bundle.total == pytest.approx(44.1, rel=1e-12)

    def test_total_is_ordered_weighted_sum(self):
        import random

        rng = random.Random(5)
        terms = {t: rng.uniform(0, 3) for t in TERM_ORDER}
        w = LossWeights()
        bundle = LossBundle(terms, w)
        expected = 0.0
        for t in TERM_ORDER:
            expected += w[t] * terms[t]
        assert bundle.total == expected  # bit-exact: same accumulation order
        assert bundle.weighted_sum() == bundle.total

    def test_single_weight_scaling_is_linear(self):
        terms = {t: 1.0 for t in TERM_ORDER}
        base = LossBundle(terms, LossWeights()).total
        doubled = LossBundle(terms, LossWeights(content=20.0)).total
        assert doubled - base == pytest.approx(10.0, rel=1e-12)

    def test_missing_term_rejected(self):
        terms = {t: 1.0 for t in TERM_ORDER if t != "book_adv"}
        with pytest.raises(ValueError, match="missing loss terms"):
            LossBundle(terms, LossWeights())

    def test_as_row(self):
        bundle = LossBundle({t: 0.5 for t in TERM_ORDER}, LossWeights(), aux={"g_mask": 1.0})
        row = bundle.as_row()
        assert list(row) == list(TERM_ORDER) + ["total"]
        assert bundle.aux["g_mask"] == 1.0


class TestGradients:
    """Finite-difference checks in float64 via torch.autograd.gradcheck."""

    def _check(self, fn, *inputs):
        doubles = tuple(x.double().requires_grad_(True) for x in inputs)
        assert torch.autograd.gradcheck(fn, doubles, eps=1e-6, atol=1e-4)

    def test_pixel(self):
        torch.manual_seed(0)
        target = torch.rand(1, 3, 4, 4).double()
        self._check(lambda g: pixel_loss(g, target), torch.rand(1, 3, 4, 4) + 0.05)

    def test_box(self):
        gt = torch.rand(3, 4).double()
        self._check(lambda p: box_loss(p, gt), torch.rand(3, 4) + 1.0)

    def test_content(self):
        p = StubPerception()
        target = torch.rand(1, 2, 4, 4).double()
        self._check(lambda g: perceptual_content_loss(p, g, target), torch.rand(1, 2, 4, 4) + 1.0)

    def test_lsgan(self):
        self._check(lambda r, f: lsgan_terms(r, f)[0], torch.rand(4), torch.rand(4))
        self._check(lambda r, f: lsgan_terms(r, f)[1], torch.rand(4), torch.rand(4))

    def test_log_gan(self):
        scores = torch.rand(4) - 0.5
        self._check(lambda r, f: log_gan_terms(r, f)[0], scores, scores + 0.2)
        self._check(lambda r, f: log_gan_terms(r, f)[1], scores, scores + 0.2)

    def test_layout_generator(self):
        disc = MeanDisc()
        self._check(
            lambda q, f, i: layout_adv_generator(disc, q, f, torch.rand(1, 3, 4, 4).double(), i),
            torch.rand(1, 2, 4, 4),
            torch.rand(1, 2, 4, 4),
            torch.rand(1, 3, 4, 4),
        )

    def test_book_generator(self):
        disc = lambda im: torch.sigmoid(im.reshape(im.shape[0], -1).mean(dim=1))
        self._check(lambda g: book_adv_generator(disc, g), torch.rand(2, 3, 4, 4))

    def test_object_generator(self):
        disc = MeanDisc()
        self._check(
            lambda c: object_adv_generator(disc, c, torch.tensor([0, 1])),
            torch.rand(2, 3, 4, 4),
        )

    def test_feature_matching(self):
        real = torch.rand(1, 3, 3).double()
        self._check(lambda f: mask_feature_matching(FeatureDisc(), real, f, None), torch.rand(1, 3, 3))
