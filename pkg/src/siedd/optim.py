"""Schedule-free AdamW over a flat list of numpy parameters."""

from __future__ import annotations

import numpy as np


class NonFiniteError(FloatingPointError):
    pass


class ScheduleFreeAdamW:
    """Schedule-free AdamW (Defazio et al., 2024), no warmup.

    The arrays in ``params`` are updated in place and always hold the
    interpolated point ``y = (1 - beta1) z + beta1 x`` where gradients must be
    evaluated. Call :meth:`finalize` to write the averaged iterate ``x`` back.
    """

    def __init__(
        self,
        params: list[np.ndarray],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.z = [p.copy() for p in params]
        self.x = [p.copy() for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError(f"{len(grads)} gradients for {len(self.params)} parameters")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"non-finite gradient at step {self.t + 1}")
        self.t += 1
        bc2 = 1.0 - self.beta2**self.t
        c = 1.0 / self.t
        b1, b2, lr = self.beta1, self.beta2, self.lr
        for p, g, z, x, v in zip(self.params, grads, self.z, self.x, self.v):
            v *= b2
            v += (1.0 - b2) * g * g
            update = g / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update += self.weight_decay * p  # p holds y
            z -= lr * update
            # difference forms keep z == x a bitwise fixed point
            x += c * (z - x)
            p[...] = x + (1.0 - b1) * (z - x)

    def finalize(self) -> None:
        for p, x in zip(self.params, self.x):
            p[...] = x
