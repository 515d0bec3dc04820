"""SGD and Adam with step-decayed learning rate.

Each Optimizer owns an explicit parameter list: the two training modes hold
separate optimizers over their own head plus the shared trunk, so a step in
one mode can never touch the other head's parameters or moments.
"""

from __future__ import annotations

import numpy as np

from ..config import OptimizerConfig
from .layers import Param


class TrainingError(RuntimeError):
    """Non-finite loss or gradient encountered during training."""


def effective_learning_rate(config: OptimizerConfig, step: int) -> float:
    return config.learning_rate * config.decay_factor ** (step // config.decay_every)


class Optimizer:
    def __init__(self, params: list[Param], config: OptimizerConfig):
        self.params = list(params)
        self.config = config
        self.step_count = 0
        if config.kind == "adam":
            self._m = [np.zeros_like(p.value) for p in self.params]
            self._v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        """Apply one update from the accumulated gradients, then clear them."""
        for p in self.params:
            if not np.isfinite(p.grad).all():
                raise TrainingError(f"non-finite gradient in {p.name}")
        lr = effective_learning_rate(self.config, self.step_count)
        self.step_count += 1
        if self.config.kind == "sgd":
            for p in self.params:
                p.value -= lr * p.grad
        else:
            b1, b2, eps = self.config.beta1, self.config.beta2, self.config.epsilon
            t = self.step_count
            for p, m, v in zip(self.params, self._m, self._v):
                m *= b1
                m += (1.0 - b1) * p.grad
                v *= b2
                v += (1.0 - b2) * p.grad * p.grad
                m_hat = m / (1.0 - b1**t)
                v_hat = v / (1.0 - b2**t)
                p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        for p in self.params:
            p.zero_grad()

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
