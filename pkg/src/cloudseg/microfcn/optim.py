"""Adam and a reduce-on-plateau learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        """Update ``params`` in place with bias-corrected moment estimates."""
        if len(params) != len(grads):
            raise ValueError("params and grads differ in length")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        c1 = 1.0 - self.beta1**self.step_count
        c2 = 1.0 - self.beta2**self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class PlateauSchedule:
    """Multiply the rate by ``factor`` once the best loss is stale for more than ``patience`` epochs."""

    lr: float = 1e-4
    patience: int = 15
    factor: float = 0.3
    floor: float = 1e-8
    best: float = float("inf")
    stale: int = 0

    def update(self, val_loss: float) -> float:
        if val_loss < self.best:
            self.best = val_loss
            self.stale = 0
            return self.lr
        self.stale += 1
        if self.stale > self.patience:
            self.lr = max(self.lr * self.factor, self.floor)
            self.stale = 0
        return self.lr

    @property
    def exhausted(self) -> bool:
        return self.lr <= self.floor
