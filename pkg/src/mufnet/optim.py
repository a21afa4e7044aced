"""AdamW with per-group learning rates and decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .tensor import Tensor2


@dataclass
class ParamGroup:
    """A named set of parameters sharing a learning rate.

    A frozen group is never touched, regardless of gradients or decay.
    """

    name: str
    params: dict[str, Tensor2]
    lr: float
    frozen: bool = False


@dataclass
class AdamW:
    groups: list[ParamGroup]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step_count: int = field(default=0, init=False)
    _m: dict = field(default_factory=dict, init=False)
    _v: dict = field(default_factory=dict, init=False)

    def step(self) -> None:
        """One update from the gradients currently stored on the parameters.

        Missing gradients count as zero. Weight decay is decoupled and
        applied before the adaptive update.
        """
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for group in self.groups:
            if group.frozen:
                continue
            for name, p in group.params.items():
                g = p.grad if p.grad is not None else np.zeros_like(p.data)
                if not np.isfinite(g).all():
                    raise DivergenceError(f"non-finite gradient for parameter {name!r}")
                key = (group.name, name)
                if key not in self._m:
                    self._m[key] = np.zeros_like(p.data)
                    self._v[key] = np.zeros_like(p.data)
                if self.weight_decay != 0.0:
                    p.data *= 1.0 - group.lr * self.weight_decay
                m = self._m[key]
                v = self._v[key]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * (g * g)
                p.data -= group.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
