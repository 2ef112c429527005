"""Adam with bias correction, written functionally so state can be replayed."""

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **kw) -> "AdamState":
        p = np.asarray(params, dtype=float)
        return cls(m=np.zeros_like(p), v=np.zeros_like(p), **kw)


def adam_step(state: AdamState, params, grad) -> tuple[np.ndarray, AdamState]:
    """Return ``(new_params, new_state)``; inputs are left untouched."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if params.shape != state.m.shape or grad.shape != params.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    t = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, replace(state, m=m, v=v, step=t)
