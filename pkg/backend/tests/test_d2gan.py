import math

import numpy as np
import pytest

from lfcodec.core.exceptions import DomainError
from lfcodec.services.d2gan import d2gan_value, loss_d1, loss_d2, loss_g

E = math.e


@pytest.mark.parametrize(
    "scores,alpha,beta,expected",
    [
        ((1.0, 1.0, 1.0, 1.0), 1.0, 1.0, -2.0),
        ((1.0, 1.0, 1.0, 1.0), 0.2, 0.2, -2.0),
        ((E, 1.0, 1.0, 1.0), 0.2, 0.2, -1.8),
    ],
)
def test_value_closed_forms(scores, alpha, beta, expected):
    d1_real, d1_fake, d2_real, d2_fake = ([s] for s in scores)
    assert d2gan_value(d1_real, d1_fake, d2_real, d2_fake, alpha, beta) == pytest.approx(expected, abs=1e-15)


def test_loss_d1_closed_forms():
    assert loss_d1([E], [1.0], 0.2).value == pytest.approx(-0.8, abs=1e-15)
    assert loss_d1([E, E], [1.0, 1.0], 0.2).value == pytest.approx(-0.8, abs=1e-15)


def test_loss_d2_closed_forms():
    assert loss_d2([1.0], [E], 0.2).value == pytest.approx(-0.8, abs=1e-15)
    assert loss_d2([1.0, 1.0], [1.0, 1.0], 0.2).value == -1.0


def test_loss_g_closed_forms():
    assert loss_g([1.0], [E], 0.2).value == pytest.approx(-0.8, abs=1e-15)

    synthesized = np.full((1, 3, 4, 4), 0.25)
    loss = loss_g([1.0], [E], 0.2, synthesized, synthesized.copy(), recon_weight=10.0)
    assert loss.reconstruction == 0.0
    assert loss.value == loss.adversarial

    off = loss_g([1.0], [1.0], 0.2, synthesized + 0.1, synthesized, recon_weight=10.0)
    assert off.reconstruction == pytest.approx(1.0)
    assert np.allclose(off.grad_synthesized, 10.0 / synthesized.size)


def test_non_positive_scores_are_rejected():
    with pytest.raises(DomainError):
        d2gan_value([0.0], [1.0], [1.0], [1.0], 0.2, 0.2)
    with pytest.raises(DomainError):
        loss_d1([1.0], [-1.0], 0.2)
    with pytest.raises(DomainError):
        loss_d2([1.0], [float("nan")], 0.2)
    with pytest.raises(DomainError):
        loss_g([], [1.0], 0.2)
    with pytest.raises(DomainError):
        loss_g([1.0], [1.0], 0.2, recon_weight=-1.0)


def _score_gradient(f, scores, eps=1e-7):
    grad = np.zeros_like(scores)
    for i in range(scores.size):
        plus, minus = scores.copy(), scores.copy()
        plus[i] += eps
        minus[i] -= eps
        grad[i] = (f(plus) - f(minus)) / (2 * eps)
    return grad


def test_score_gradients(rng):
    x = rng.uniform(0.5, 2.0, size=5)
    gz = rng.uniform(0.5, 2.0, size=5)

    d1 = loss_d1(x, gz, 0.3)
    assert np.allclose(d1.grad_real, _score_gradient(lambda s: loss_d1(s, gz, 0.3).value, x), rtol=1e-6)
    assert np.allclose(d1.grad_fake, _score_gradient(lambda s: loss_d1(x, s, 0.3).value, gz), rtol=1e-6)

    d2 = loss_d2(x, gz, 0.3)
    assert np.allclose(d2.grad_real, _score_gradient(lambda s: loss_d2(s, gz, 0.3).value, x), rtol=1e-6)
    assert np.allclose(d2.grad_fake, _score_gradient(lambda s: loss_d2(x, s, 0.3).value, gz), rtol=1e-6)

    g = loss_g(x, gz, 0.3)
    assert np.allclose(g.grad_d1_fake, _score_gradient(lambda s: loss_g(s, gz, 0.3).value, x), rtol=1e-6)
    assert np.allclose(g.grad_d2_fake, _score_gradient(lambda s: loss_g(x, s, 0.3).value, gz), rtol=1e-6)


def test_value_splits_into_discriminator_losses(rng):
    d1_real, d1_fake, d2_real, d2_fake = (rng.uniform(0.1, 3.0, size=4) for _ in range(4))
    total = d2gan_value(d1_real, d1_fake, d2_real, d2_fake, 0.2, 0.4)
    parts = loss_d1(d1_real, d1_fake, 0.2).value + loss_d2(d2_real, d2_fake, 0.4).value
    assert total == pytest.approx(parts, rel=1e-12)
