"""Adam optimizer with fixed betas and linear-warmup schedule."""

from __future__ import annotations

import numpy as np


class Adam:
    """Adaptive-moment updates, applied in place to the parameter arrays."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for name, grad in grads.items():
            param = params[name]
            m = self._m.get(name)
            if m is None:
                m = self._m[name] = np.zeros_like(param)
                self._v[name] = np.zeros_like(param)
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(grad)
            mhat = m / correction1
            vhat = v / correction2
            param -= lr * mhat / (np.sqrt(vhat) + self.eps)


def warmup_lr(step: int, base_lr: float, warmup_steps: int) -> float:
    """Linear warmup to ``base_lr`` over ``warmup_steps``, then constant."""
    if warmup_steps > 0 and step <= warmup_steps:
        return base_lr * step / warmup_steps
    return base_lr
