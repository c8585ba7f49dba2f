"""AdamW optimizer.

Weight decay is decoupled: parameters shrink toward zero before the adaptive
update, so decay strength does not depend on the gradient moments.
"""

from __future__ import annotations

import numpy as np

from pointcast.errors import GradientError, ValidationError


class AdamW:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        if not self.params:
            raise ValidationError("optimizer needs at least one parameter")
        if not (lr > 0):
            raise ValidationError(f"learning rate must be positive, got {lr}")
        b1, b2 = betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValidationError(f"betas must lie in [0, 1), got {betas}")
        self.lr = float(lr)
        self.beta1 = float(b1)
        self.beta2 = float(b2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for i, p in enumerate(self.params):
            if p.grad is None:
                label = p.name or f"parameter #{i}"
                raise GradientError(f"{label} has no gradient; call backward() first")
            g = p.grad
            if self.weight_decay != 0.0:
                p.data = p.data - self.lr * self.weight_decay * p.data
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self._m[i] / bc1
            v_hat = self._v[i] / bc2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
