"""Named parameter store and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StoryAnchorError
from .tensor import Tensor


class ParamStore:
    """Named map of Tensor parameters with a per-parameter trainable flag."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._trainable: dict[str, bool] = {}

    def add(self, name: str, data: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._params:
            raise StoryAnchorError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(data, dtype=np.float64))
        self._params[name] = t
        self._trainable[name] = trainable
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def set_trainable(self, name: str, flag: bool):
        self._trainable[name] = flag

    def trainable_names(self) -> list[str]:
        return [n for n in self.names() if self._trainable[n]]

    def zero_grad(self):
        for p in self._params.values():
            p.zero_grad()


@dataclass
class AdamState:
    """First/second moments plus step counter and hyperparameters."""

    lr: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: ParamStore, grads: dict[str, np.ndarray], state: AdamState,
              clip_norm: float | None = None) -> None:
    """One bias-corrected Adam update over the trainable parameters.

    ``grads`` must cover exactly the trainable parameters; frozen
    parameters are never touched. Moments are created lazily on first use.
    """
    trainable = set(params.trainable_names())
    if set(grads) != trainable:
        missing = sorted(trainable - set(grads))
        extra = sorted(set(grads) - trainable)
        raise StoryAnchorError(
            f"adam_step gradient mismatch: missing={missing} unexpected={extra}")

    if clip_norm is not None:
        total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        if total > clip_norm:
            grads = {n: g * (clip_norm / total) for n, g in grads.items()}

    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name in sorted(grads):
        g = grads[name]
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
