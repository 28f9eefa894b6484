"""The five training loss terms, each a pure function of tensors.

Reduction conventions (pinned by tests): adversarial terms mean over batch
and patches; the attribute loss sums squared errors over the 20 components
and means over batch; identity and reconstruction losses mean over every
dimension. The generator uses the non-saturating -log D(fake) form instead
of the saturating log(1 - D(fake)): same equilibrium, usable gradients
early in training.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch

from .attributes import NUM_ATTRIBUTES
from .errors import ValidationError

# Callers clamp sigmoid outputs into [EPS, 1 - EPS] before the log terms.
EPS = 1e-7


@dataclass(frozen=True)
class LossBreakdown:
    """Per-step scalars, serialized to the metrics log."""

    d_adv: float
    d_attr: float
    adv_GN: float
    adv_GA: float
    attr: float
    identity: float
    recon: float
    anchor: float
    total: float

    def as_dict(self) -> dict:
        return asdict(self)


def _check_scores(scores: torch.Tensor, name: str) -> None:
    if scores.numel() == 0:
        raise ValidationError(f"{name} is empty")
    if not bool(torch.all((scores > 0) & (scores < 1))):
        raise ValidationError(f"{name} must lie strictly inside (0, 1); clamp with EPS first")


def adversarial_loss(
    real_scores: torch.Tensor, fake_scores: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Patch-score cross entropy: (discriminator loss, generator loss)."""
    _check_scores(real_scores, "real_scores")
    _check_scores(fake_scores, "fake_scores")
    d_loss = -torch.log(real_scores).mean() - torch.log(1.0 - fake_scores).mean()
    g_loss = -torch.log(fake_scores).mean()
    return d_loss, g_loss


def _squared_l2(estimate: torch.Tensor, target: torch.Tensor, name: str) -> torch.Tensor:
    if estimate.shape != target.shape or estimate.shape[-1] != NUM_ATTRIBUTES:
        raise ValidationError(
            f"{name}: expected matching (B, {NUM_ATTRIBUTES}) shapes, "
            f"got {tuple(estimate.shape)} and {tuple(target.shape)}"
        )
    # Sum over the 20 components (the squared norm as written), mean over batch.
    return ((estimate - target) ** 2).sum(dim=-1).mean()


def attribute_loss(
    estimate_real: torch.Tensor,
    fa_real: torch.Tensor,
    estimate_fake_GA: torch.Tensor,
    fa_D: torch.Tensor,
    estimate_fake_GN: torch.Tensor,
    fa_N: torch.Tensor,
) -> torch.Tensor:
    """Three-way attribute regression: real image vs its annotation, G_A
    output vs the driving attributes, G_N output vs the neutral vector."""
    return (
        _squared_l2(estimate_real, fa_real, "real term")
        + _squared_l2(estimate_fake_GA, fa_D, "G_A term")
        + _squared_l2(estimate_fake_GN, fa_N, "G_N term")
    )


def identity_loss(
    pool_source: torch.Tensor,
    fc_source: torch.Tensor,
    pool_generated: torch.Tensor,
    fc_generated: torch.Tensor,
) -> torch.Tensor:
    """L1 between identity features of source and generated images."""
    if pool_source.shape != pool_generated.shape or fc_source.shape != fc_generated.shape:
        raise ValidationError(
            "identity feature shape mismatch: "
            f"{tuple(pool_source.shape)}/{tuple(pool_generated.shape)} and "
            f"{tuple(fc_source.shape)}/{tuple(fc_generated.shape)}"
        )
    return (
        torch.abs(pool_source - pool_generated).mean()
        + torch.abs(fc_source - fc_generated).mean()
    )


def reconstruction_loss(
    driving_img: torch.Tensor,
    GA_output: torch.Tensor,
    GN_output: torch.Tensor,
    GA_neutral_output: torch.Tensor,
) -> torch.Tensor:
    """L1 to the driving frame plus the pseudo-ground-truth coupling term.

    The second term ties G_N's output to G_A run with neutral attributes:
    neither image is ground truth, but agreement between the two paths is
    what makes the neutral face a reusable template.
    """
    shapes = {t.shape for t in (driving_img, GA_output, GN_output, GA_neutral_output)}
    if len(shapes) != 1:
        raise ValidationError(f"reconstruction images must share a shape, got {shapes}")
    return (
        torch.abs(driving_img - GA_output).mean()
        + torch.abs(GN_output - GA_neutral_output).mean()
    )


def total_loss(
    adv_GN: torch.Tensor,
    adv_GA: torch.Tensor,
    attr: torch.Tensor,
    identity: torch.Tensor,
    recon: torch.Tensor,
    lambdas: tuple[float, float, float],
) -> torch.Tensor:
    """Generator objective: adversarial terms plus weighted attr/identity/recon."""
    l1, l2, l3 = lambdas
    if l1 <= 0 or l2 <= 0 or l3 <= 0:
        raise ValidationError(f"loss weights must be positive, got {lambdas}")
    return adv_GN + adv_GA + l1 * attr + l2 * identity + l3 * recon
