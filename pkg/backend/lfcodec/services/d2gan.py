"""
Dual-discriminator adversarial objectives

D1 rewards real data and D2 rewards generated data; both score in (0, inf).
Every objective returns its value together with the gradients of that value
with respect to the scores it consumed.
"""

from typing import NamedTuple, Optional

import numpy as np

from lfcodec.core.exceptions import DomainError


class ScoreLoss(NamedTuple):
    value: float
    grad_real: np.ndarray
    grad_fake: np.ndarray


class GeneratorLoss(NamedTuple):
    value: float
    adversarial: float
    reconstruction: float
    grad_d1_fake: np.ndarray
    grad_d2_fake: np.ndarray
    grad_synthesized: Optional[np.ndarray]


def _positive(name: str, scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise DomainError(f"{name} is empty")
    if not np.all(np.isfinite(scores)) or np.any(scores <= 0):
        raise DomainError(f"{name} must be strictly positive")
    return scores


def d2gan_value(d1_real, d1_fake, d2_real, d2_fake, alpha: float, beta: float) -> float:
    """Three-player minimax value: a*E[log D1(x)] - E[D1(G)] - E[D2(x)] + b*E[log D2(G)]"""
    d1_real = _positive("d1_real", d1_real)
    d1_fake = _positive("d1_fake", d1_fake)
    d2_real = _positive("d2_real", d2_real)
    d2_fake = _positive("d2_fake", d2_fake)
    return float(
        alpha * np.mean(np.log(d1_real)) - np.mean(d1_fake) - np.mean(d2_real) + beta * np.mean(np.log(d2_fake))
    )


def loss_d1(x_scores, gz_scores, alpha: float) -> ScoreLoss:
    """mean(alpha * log D1(x) - D1(G(z))), maximised by D1"""
    x_scores = _positive("x_scores", x_scores)
    gz_scores = _positive("gz_scores", gz_scores)
    value = alpha * np.mean(np.log(x_scores)) - np.mean(gz_scores)
    return ScoreLoss(
        float(value),
        alpha / (x_scores.size * x_scores),
        np.full(gz_scores.shape, -1.0 / gz_scores.size),
    )


def loss_d2(x_scores, gz_scores, beta: float) -> ScoreLoss:
    """mean(beta * log D2(G(z)) - D2(x)), maximised by D2"""
    x_scores = _positive("x_scores", x_scores)
    gz_scores = _positive("gz_scores", gz_scores)
    value = beta * np.mean(np.log(gz_scores)) - np.mean(x_scores)
    return ScoreLoss(
        float(value),
        np.full(x_scores.shape, -1.0 / x_scores.size),
        beta / (gz_scores.size * gz_scores),
    )


def loss_g(
    d1_fake,
    d2_fake,
    beta: float,
    synthesized: Optional[np.ndarray] = None,
    target: Optional[np.ndarray] = None,
    recon_weight: float = 0.0,
) -> GeneratorLoss:
    """mean(beta * log D2(G) - D1(G)) + recon_weight * mean|G - target|, minimised by G"""
    d1_fake = _positive("d1_fake", d1_fake)
    d2_fake = _positive("d2_fake", d2_fake)
    if recon_weight < 0:
        raise DomainError("recon_weight must be non-negative")

    adversarial = float(beta * np.mean(np.log(d2_fake)) - np.mean(d1_fake))
    reconstruction = 0.0
    grad_synthesized = None
    if synthesized is not None and target is not None:
        diff = np.asarray(synthesized, dtype=np.float64) - np.asarray(target, dtype=np.float64)
        if recon_weight > 0:
            reconstruction = float(recon_weight * np.mean(np.abs(diff)))
        grad_synthesized = recon_weight * np.sign(diff) / diff.size

    return GeneratorLoss(
        value=adversarial + reconstruction,
        adversarial=adversarial,
        reconstruction=reconstruction,
        grad_d1_fake=np.full(d1_fake.shape, -1.0 / d1_fake.size),
        grad_d2_fake=beta / (d2_fake.size * d2_fake),
        grad_synthesized=grad_synthesized,
    )
