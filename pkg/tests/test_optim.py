import numpy as np
import pytest

from pointcast.diffcore import AdamW, Tensor
from pointcast.errors import GradientError, ValidationError


def _param(value, name="p"):
    t = Tensor(value, requires_grad=True, name=name)
    return t


def test_first_step_oracle():
    # From zero moments, one step moves by ~lr regardless of gradient scale:
    # m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
    p = _param([0.0])
    p.grad = np.array([1.0])
    opt = AdamW([p], lr=0.1)
    opt.step()
    assert np.allclose(p.data, [-0.1], atol=1e-9)

    q = _param([0.0])
    q.grad = np.array([1000.0])
    AdamW([q], lr=0.1).step()
    assert np.allclose(q.data, [-0.1], atol=1e-9)


def test_decay_applies_before_adaptive_update():
    # With zero gradient moments from a zero gradient, only decay moves p:
    # p <- p - lr*wd*p, then the adaptive term is 0/(0+eps) = 0.
    p = _param([2.0])
    p.grad = np.array([0.0])
    opt = AdamW([p], lr=0.1, weight_decay=0.5)
    opt.step()
    assert np.allclose(p.data, [2.0 * (1.0 - 0.1 * 0.5)], atol=1e-15)


def test_decay_decoupled_from_gradient():
    # Same gradient, with and without decay: the difference must be exactly
    # the decay shrinkage of the starting value (decoupling).
    g = np.array([0.7])
    p1, p2 = _param([2.0]), _param([2.0])
    p1.grad = g.copy()
    p2.grad = g.copy()
    AdamW([p1], lr=0.1, weight_decay=0.0).step()
    AdamW([p2], lr=0.1, weight_decay=0.5).step()
    adaptive_move = 2.0 - p1.data[0]
    assert np.allclose(p2.data, [2.0 * (1.0 - 0.05) - adaptive_move], atol=1e-12)


def test_two_step_hand_sequence():
    # Hand-rolled two steps with b1=0.9, b2=0.999, eps=0; grads 1 then 2.
    lr, b1, b2 = 0.1, 0.9, 0.999
    p = _param([0.5])
    opt = AdamW([p], lr=lr, betas=(b1, b2), eps=0.0)
    m = v = 0.0
    x = 0.5
    for t, g in ((1, 1.0), (2, 2.0)):
        p.grad = np.array([g])
        opt.step()
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x = x - lr * (m / (1 - b1 ** t)) / np.sqrt(v / (1 - b2 ** t))
        assert np.allclose(p.data, [x], atol=1e-15), t


def test_missing_gradient_raises_with_name():
    p = _param([1.0], name="encoder.w")
    opt = AdamW([p], lr=0.1)
    with pytest.raises(GradientError, match="encoder.w"):
        opt.step()


def test_zero_grad_clears():
    p = _param([1.0])
    p.grad = np.array([3.0])
    opt = AdamW([p], lr=0.1)
    opt.zero_grad()
    assert p.grad is None


def test_constructor_validation():
    p = _param([1.0])
    with pytest.raises(ValidationError):
        AdamW([], lr=0.1)
    with pytest.raises(ValidationError):
        AdamW([p], lr=0.0)
    with pytest.raises(ValidationError):
        AdamW([p], lr=0.1, betas=(1.0, 0.999))


def test_step_count_advances():
    p = _param([0.0])
    opt = AdamW([p], lr=0.01)
    for expected in (1, 2, 3):
        p.grad = np.array([1.0])
        opt.step()
        assert opt.step_count == expected


def test_converges_on_quadratic():
    # Minimize (p - 3)^2 by hand-fed gradients; AdamW should get close fast.
    p = _param([0.0])
    opt = AdamW([p], lr=0.1)
    for _ in range(200):
        p.grad = 2.0 * (p.data - 3.0)
        opt.step()
    assert abs(p.data[0] - 3.0) < 1e-3
