"""Adaptive-moment gradient descent for Tensor parameters."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class NonFiniteGradientError(FloatingPointError):
    """A gradient fed to the optimizer was NaN or Inf (training divergence)."""


class Adam:
    """Standard adaptive-moment estimation with bias correction.

    Deterministic: identical parameter/gradient streams produce identical
    updates. First and second moment state start at zero.
    """

    def __init__(self, params: list[Tensor], lr: float = 0.01,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.values) for p in self.params]
        self._v = [np.zeros_like(p.values) for p in self.params]

    def step(self):
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                raise ValueError("parameter has no gradient; call backward() first")
            if not np.isfinite(g).all():
                raise NonFiniteGradientError("non-finite gradient fed to optimizer")
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * g * g
            m_hat = self._m[i] / (1.0 - self.beta1 ** t)
            v_hat = self._v[i] / (1.0 - self.beta2 ** t)
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
