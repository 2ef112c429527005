"""Residual-ISI cancellation and the OAMP detector in the real-valued model.

This is the reference implementation: the de-correlated LMMSE matrix is
formed explicitly and inverted at every iteration. The unfolded network in
:mod:`dloamp.oamp_net` computes the same recursion through one SVD per
model and is checked against this module.
"""

from dataclasses import dataclass

import numpy as np

from .link import Constellation, build_cyclic_H
from .numerics import complex_to_real_mat, dft_matrix, ifft_unitary, solve, stack_vec


@dataclass(frozen=True)
class OampConfig:
    """Iteration count, smoothing weight and variance floor.

    ``v_sq_init`` seeds the smoothed error variance before the first
    iteration.
    """

    iterations: int = 10
    beta: float = 0.5
    epsilon: float = 1e-9
    constellation: Constellation = Constellation(16)
    v_sq_init: float = 1.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("OAMP needs at least one iteration")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @property
    def alphabet(self) -> np.ndarray:
        return self.constellation.alphabet


@dataclass(frozen=True)
class OampState:
    u_hat: np.ndarray
    r: np.ndarray
    v_sq: np.ndarray
    v_sq_smoothed: np.ndarray
    tau_sq: np.ndarray


@dataclass(frozen=True)
class DetectionModel:
    """Real-valued model ``y_r = H_r u_r + w_r``; arrays may carry a batch axis.

    ``noise_var`` is the complex per-sample variance; each real component
    carries half of it.
    """

    H_r: np.ndarray
    y_r: np.ndarray
    noise_var: np.ndarray

    @property
    def dim(self) -> int:
        return self.H_r.shape[-1]


def isi_cancel(y, taps_est, q_prev) -> np.ndarray:
    """Subtract the estimated leakage of the previous block: ``y - A_hat q_prev``."""
    y = np.asarray(y, dtype=complex)
    N = y.shape[-1]
    q_prev = np.asarray(q_prev, dtype=complex)
    if q_prev.shape[-1] != N:
        raise ValueError("previous block length does not match received vector")
    A = np.triu(build_cyclic_H(taps_est, N), k=1)
    return y - (A @ q_prev[..., None])[..., 0]


def estimated_taps(h_freq_est, L: int) -> np.ndarray:
    """First ``L`` taps of the inverse (non-unitary) DFT of a frequency estimate."""
    h_freq_est = np.asarray(h_freq_est, dtype=complex)
    N = h_freq_est.shape[-1]
    if L > N:
        raise ValueError(f"cannot keep {L} taps from {N} subcarriers")
    return ifft_unitary(h_freq_est)[..., :L] / np.sqrt(N)


def build_detection_model(y_hat, taps_est, noise_var) -> DetectionModel:
    """Real embedding of ``y_hat = (H_hat - A_hat) F^H u + w``."""
    y_hat = np.asarray(y_hat, dtype=complex)
    N = y_hat.shape[-1]
    H = build_cyclic_H(taps_est, N)
    Hbar = (H - np.triu(H, k=1)) @ dft_matrix(N).conj().T
    return DetectionModel(H_r=complex_to_real_mat(Hbar), y_r=stack_vec(y_hat),
                          noise_var=np.asarray(noise_var, dtype=float))


def _eye_like(H):
    return np.broadcast_to(np.eye(H.shape[-1]), H.shape)


def _tr(M):
    return np.trace(M, axis1=-2, axis2=-1)


def oamp_w(H_r, v_sq, noise_var) -> tuple[np.ndarray, np.ndarray]:
    """De-correlated LMMSE matrix ``W`` (with ``tr(W H) = 2N``) and ``B = I - W H``."""
    H = np.asarray(H_r, dtype=float)
    v = np.asarray(v_sq, dtype=float)[..., None, None]
    s2 = np.asarray(noise_var, dtype=float)[..., None, None]
    n = H.shape[-1]
    Ht = np.swapaxes(H, -1, -2)
    inner = v * (H @ Ht) + (s2 / 2) * np.eye(H.shape[-2])
    # inner is symmetric, so W_hat = v H^T inner^-1 = v (inner^-1 H)^T
    W_hat = v * np.swapaxes(solve(inner, H), -1, -2)
    W = (n / _tr(W_hat @ H))[..., None, None] * W_hat
    return W, _eye_like(H) - W @ H


def oamp_v_sq(y_r, H_r, u_hat, noise_var, epsilon: float = 1e-9) -> np.ndarray:
    """Error-variance estimate ``(||y - H u||^2 - N sigma^2) / tr(H^T H)``, floored at epsilon.

    ``N`` is the number of complex samples, so ``N sigma^2`` is the expected
    noise energy of the residual.
    """
    H = np.asarray(H_r, dtype=float)
    res = np.asarray(y_r) - (H @ np.asarray(u_hat)[..., None])[..., 0]
    n_cplx = H.shape[-2] / 2
    num = np.sum(res * res, axis=-1) - n_cplx * np.asarray(noise_var)
    return np.maximum(num / np.sum(H * H, axis=(-2, -1)), epsilon)


def oamp_tau_sq(B, W, v_sq_smoothed, noise_var, epsilon: float = 1e-9) -> np.ndarray:
    n = B.shape[-1]
    tau = (np.sum(B * B, axis=(-2, -1)) / n * np.asarray(v_sq_smoothed)
           + np.sum(W * W, axis=(-2, -1)) / (2 * n) * np.asarray(noise_var))
    return np.maximum(tau, epsilon)


def posterior_mean(r, tau_sq, alphabet) -> np.ndarray:
    """Per-component posterior mean under a uniform prior on ``alphabet``.

    ``tau_sq`` broadcasts against the leading (batch) axes of ``r``.
    """
    r = np.asarray(r, dtype=float)
    a = np.asarray(alphabet, dtype=float)
    tau = np.asarray(tau_sq, dtype=float)[..., None, None]
    logits = -((r[..., None] - a) ** 2) / (2 * tau)
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    return (w @ a) / w.sum(axis=-1)


def oamp_detect(model: DetectionModel, cfg: OampConfig = OampConfig()):
    """Run classic OAMP from ``u_hat = 0``.

    Returns the final estimate and the list of per-iteration states.
    """
    H, y, s2 = model.H_r, model.y_r, model.noise_var
    u = np.zeros_like(y)
    v_s = np.full(np.shape(s2), cfg.v_sq_init, dtype=float)
    traj = []
    for _ in range(cfg.iterations):
        v = oamp_v_sq(y, H, u, s2, cfg.epsilon)
        v_s = (1 - cfg.beta) * v_s + cfg.beta * v
        W, B = oamp_w(H, v_s, s2)
        r = u + (W @ (y - (H @ u[..., None])[..., 0])[..., None])[..., 0]
        tau = oamp_tau_sq(B, W, v_s, s2, cfg.epsilon)
        u = posterior_mean(r, tau, cfg.alphabet)
        traj.append(OampState(u_hat=u, r=r, v_sq=v, v_sq_smoothed=v_s, tau_sq=tau))
    return u, traj
