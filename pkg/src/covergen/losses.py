"""All nine training loss terms and their weighted combination.

Adversarial conventions: the mask term uses the conditional least-squares
form by default (a log form is available behind ``mask_gan_form``); layout,
book and object terms are log-based with discriminator probabilities clamped
to [1e-6, 1 - 1e-6] before any log.  Generator-side adversarial terms use the
nonsaturating -log D(fake) form.  d_term is what the discriminator minimizes,
g_term what the generator minimizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

PROB_EPS = 1e-6

# Canonical term order; the bundle total is accumulated in exactly this order.
TERM_ORDER = (
    "pixel",
    "box",
    "content",
    "mask_adv",
    "obj_adv",
    "layout_adv",
    "book_adv",
    "mask_fm",
    "layout_fm",
)


@dataclass(frozen=True)
class LossWeights:
    pixel: float = 1.0
    box: float = 10.0
    content: float = 10.0
    mask_adv: float = 1.0
    obj_adv: float = 0.1
    layout_adv: float = 1.0
    book_adv: float = 1.0
    mask_fm: float = 10.0
    layout_fm: float = 10.0

    def __getitem__(self, term: str) -> float:
        return getattr(self, term)


@dataclass
class LossBundle:
    """Raw per-term values plus the weighted total.

    ``total`` is always the weighted sum of ``terms`` accumulated in
    TERM_ORDER; ``weighted_sum`` re-derives it for identity checks.  ``aux``
    carries scalars logged alongside but excluded from the weighted total
    (the generator-side adversarial values).
    """

    terms: dict[str, float]
    weights: LossWeights
    total: float = field(init=False)
    aux: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        missing = [t for t in TERM_ORDER if t not in self.terms]
        if missing:
            raise ValueError(f"missing loss terms: {missing}")
        self.total = self.weighted_sum()

    def weighted_sum(self) -> float:
        total = 0.0
        for term in TERM_ORDER:
            total += self.weights[term] * self.terms[term]
        return total

    def as_row(self) -> dict[str, float]:
        row = {term: self.terms[term] for term in TERM_ORDER}
        row["total"] = self.total
        return row


def clamp_prob(p: torch.Tensor) -> torch.Tensor:
    return p.clamp(PROB_EPS, 1.0 - PROB_EPS)


def _log_prob(scores: torch.Tensor, already_probability: bool) -> torch.Tensor:
    p = scores if already_probability else torch.sigmoid(scores)
    return torch.log(clamp_prob(p))


def lsgan_terms(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Least-squares GAN: real pushed to 1, fake to 0; generator pushes fake
    to 1.  Each squared error is averaged over its own score entries."""
    d_term = ((real_scores - 1.0) ** 2).mean() + (fake_scores**2).mean()
    g_term = ((fake_scores - 1.0) ** 2).mean()
    return d_term, g_term


def log_gan_terms(real_scores: torch.Tensor, fake_scores: torch.Tensor, already_probability: bool = False):
    """Log-likelihood GAN terms.  The discriminator minimizes d_term, which
    rewards real scores near 1 and fake scores near 0.  The generator term is
    the fake half of the same objective, log(1 - D(fake)): its gradient fades
    as the discriminator pulls ahead, so a dominant discriminator cannot drown
    the reconstruction losses."""
    p_fake = fake_scores if already_probability else torch.sigmoid(fake_scores)
    log_one_minus_fake = torch.log(clamp_prob(1.0 - p_fake)).mean()
    d_term = -(_log_prob(real_scores, already_probability).mean()) - log_one_minus_fake
    g_term = log_one_minus_fake
    return d_term, g_term


def mask_adv_loss(disc, real_masks, fake_masks, category_ids, form: str = "lsgan"):
    """Conditional adversarial terms over 32x32 masks."""
    real_scores = disc(real_masks, category_ids)
    fake_scores = disc(fake_masks, category_ids)
    if form == "lsgan":
        return lsgan_terms(real_scores, fake_scores)
    if form == "log":
        return log_gan_terms(real_scores, fake_scores)
    raise ValueError(f"unknown mask GAN form {form!r}")


def mask_adv_generator(disc, fake_masks, category_ids, form: str = "lsgan") -> torch.Tensor:
    """Only the generator-side mask term; skips the real-branch forward."""
    fake_scores = disc(fake_masks, category_ids)
    if form == "lsgan":
        return ((fake_scores - 1.0) ** 2).mean()
    if form == "log":
        return torch.log(clamp_prob(1.0 - torch.sigmoid(fake_scores))).mean()
    raise ValueError(f"unknown mask GAN form {form!r}")


def layout_adv_loss(disc, q, q_mismatch, f, r, i, mismatch_as_real: bool = True):
    """Four-term layout objective.

    The discriminator rewards the matched real pair (Q, R), penalizes the
    crossed pairs (Q, I) and (F, R), and scores the mismatched pair (Q', R)
    as real when ``mismatch_as_real`` (the printed form) or as fake
    otherwise.  The generator term is the crossed-pair half of the same
    objective, so its gradient fades once the discriminator separates real
    from generated.
    """
    log_qr = _log_prob(disc(q, r), False)
    p_qi = torch.sigmoid(disc(q, i))
    p_fr = torch.sigmoid(disc(f, r))
    objective = log_qr + torch.log(clamp_prob(1 - p_qi)) + torch.log(clamp_prob(1 - p_fr))
    p_qpr = torch.sigmoid(disc(q_mismatch, r))
    if mismatch_as_real:
        objective = objective + torch.log(clamp_prob(p_qpr))
    else:
        objective = objective + torch.log(clamp_prob(1 - p_qpr))
    d_term = -objective.mean()
    g_term = layout_adv_generator(disc, q, f, r, i)
    return d_term, g_term


def layout_adv_generator(disc, q, f, r, i) -> torch.Tensor:
    """Generator view of the layout objective: the crossed pairs (Q, I) and
    (F, R) should read as real.  Both log(1 - D) terms saturate toward zero
    as the discriminator wins, keeping the pressure bounded."""
    p_qi = torch.sigmoid(disc(q, i))
    p_fr = torch.sigmoid(disc(f, r))
    return torch.log(clamp_prob(1 - p_qi)).mean() + torch.log(clamp_prob(1 - p_fr)).mean()


def book_adv_loss(disc, real_covers, generated):
    """Whole-cover realism terms; disc outputs probabilities.  The generator
    term is the fake half of the discriminator objective, log(1 - D(I)),
    which flattens out when the discriminator dominates."""
    p_real = disc(real_covers)
    p_fake = disc(generated)
    log_one_minus_fake = torch.log(clamp_prob(1 - p_fake)).mean()
    d_term = -torch.log(clamp_prob(p_real)).mean() - log_one_minus_fake
    g_term = log_one_minus_fake
    return d_term, g_term


def book_adv_generator(disc, generated) -> torch.Tensor:
    return torch.log(clamp_prob(1 - disc(generated))).mean()


def object_adv_loss(disc, real_crops, fake_crops, category_ids):
    """Summed over objects: D pushes real-crop scores up and generated-crop
    scores down; G pushes generated-crop scores up."""
    log_real = _log_prob(disc.score(real_crops, category_ids), False)
    log_fake = _log_prob(disc.score(fake_crops, category_ids), False)
    d_term = (log_fake - log_real).sum()
    g_term = -log_fake.sum()
    return d_term, g_term


def object_adv_generator(disc, fake_crops, category_ids) -> torch.Tensor:
    return -_log_prob(disc.score(fake_crops, category_ids), False).sum()


def perceptual_content_loss(perception, generated: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Sum over the extractor's layer set of per-element mean absolute
    feature differences."""
    feats_gen = perception(generated)
    feats_tgt = perception(target)
    loss = generated.new_zeros(())
    for fg, ft in zip(feats_gen, feats_tgt):
        loss = loss + (fg - ft).abs().mean()
    return loss


def _feature_distance(real_feats: list[torch.Tensor], fake_feats: list[torch.Tensor]) -> torch.Tensor:
    loss = fake_feats[0].new_zeros(())
    for fr, ff in zip(real_feats, fake_feats):
        loss = loss + (fr.detach() - ff).abs().mean()
    return loss


def mask_feature_matching(disc, real_masks, fake_masks, category_ids) -> torch.Tensor:
    _, real_feats = disc(real_masks, category_ids, return_features=True)
    _, fake_feats = disc(fake_masks, category_ids, return_features=True)
    return _feature_distance(real_feats, fake_feats)


def layout_feature_matching(disc, q, r, f, i) -> torch.Tensor:
    _, real_feats = disc(q, r, return_features=True)
    _, fake_feats = disc(f, i, return_features=True)
    return _feature_distance(real_feats, fake_feats)


def box_loss(pred_boxes: torch.Tensor, gt_boxes: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over normalized coordinates and objects."""
    if pred_boxes.shape != gt_boxes.shape:
        raise ValueError(f"box lists not aligned: {tuple(pred_boxes.shape)} vs {tuple(gt_boxes.shape)}")
    return (pred_boxes - gt_boxes).abs().mean()


def pixel_loss(generated: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return (generated - target).abs().mean()
