"""Pilot-based channel estimation: LS, LMMSE and the trainable linear CE-Net.

CE-Net is a single dense layer without bias or activation acting on the
real-stacked LS estimate. It starts at the real embedding of the LMMSE
weights, so before training it reproduces the LMMSE estimate exactly, and
is then fitted to true frequency responses with Adam on an l2 loss.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import PowerDelayProfile, channel_correlation, draw_taps, freq_response
from .link import Constellation, make_frame, transmit_cp_free
from .numerics import complex_to_real_mat, fft_unitary, solve, stack_vec, unstack_vec
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)


def ls_estimate(y_pilot_freq, x_pilot) -> np.ndarray:
    """Per-subcarrier division ``Y_p(n) / X_p(n)``.

    ``y_pilot_freq`` must already be in the frequency domain.
    """
    x_pilot = np.asarray(x_pilot, dtype=complex)
    if np.any(np.abs(x_pilot) == 0):
        raise ValueError("pilot symbol is zero on at least one subcarrier")
    return np.asarray(y_pilot_freq, dtype=complex) / x_pilot


def lmmse_weights(R_hh, noise_var: float, Es: float = 1.0) -> np.ndarray:
    """``W = R_HH (R_HH + (noise_var / Es) I)^-1``.

    The cross-correlation between the channel and its LS estimate equals
    ``R_HH`` because pilot noise is independent of the channel.
    """
    R = np.asarray(R_hh, dtype=complex)
    if Es <= 0:
        raise ValueError("pilot energy must be positive")
    if noise_var < 0:
        raise ValueError("noise variance must be non-negative")
    n = R.shape[-1]
    reg = R + (noise_var / Es) * np.eye(n)
    # W = R reg^-1  <=>  reg^T W^T = R^T
    return solve(reg.T, R.T).T


def realize_weights(W) -> np.ndarray:
    return complex_to_real_mat(W)


@dataclass
class CeNetParams:
    W: np.ndarray
    epoch: int = 0
    loss_history: list = field(default_factory=list)
    init_snr_db: float | None = None

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1] or self.W.shape[0] % 2:
            raise ValueError(f"CE-Net weights must be 2N x 2N, got {self.W.shape}")
        if not np.all(np.isfinite(self.W)):
            raise ValueError("CE-Net weights are not finite")

    @property
    def N(self) -> int:
        return self.W.shape[0] // 2

    @classmethod
    def from_lmmse(cls, pdp: PowerDelayProfile, N: int, snr_db: float, Es: float = 1.0) -> "CeNetParams":
        R = channel_correlation(pdp, N)
        W = lmmse_weights(R, nominal_noise_var(pdp, N, snr_db), Es)
        return cls(realize_weights(W), init_snr_db=snr_db)


def nominal_noise_var(pdp: PowerDelayProfile, N: int, snr_db: float) -> float:
    """Noise variance at ``snr_db`` for the average CP-free channel of ``pdp``.

    The useful signal excludes the wrap-around taps, so tap ``l`` only
    contributes on ``N - l`` of the ``N`` samples.
    """
    l = np.arange(pdp.L)
    s_bar = float(np.sum(pdp.tap_powers * (N - l) / N))
    return s_bar * 10.0 ** (-snr_db / 10.0)


def ce_forward(params: CeNetParams, h_ls) -> np.ndarray:
    x = stack_vec(h_ls)
    if x.shape[-1] != params.W.shape[1]:
        raise ValueError("LS estimate length does not match CE-Net size")
    return unstack_vec(x @ params.W.T)


def ce_loss(W, X, T) -> float:
    """Mean over samples of ``||W x - t||^2``; ``X``/``T`` are (n, 2N) real."""
    E = X @ W.T - T
    return float(np.mean(np.sum(E * E, axis=1)))


def ce_grad(W, X, T) -> np.ndarray:
    E = X @ W.T - T
    return (2.0 / X.shape[0]) * E.T @ X


@dataclass(frozen=True)
class CeTrainConfig:
    lr: float = 1e-3
    batch_size: int = 50
    epochs: int = 5
    seed: int = 0


def ce_train(params: CeNetParams, X, T, cfg: CeTrainConfig = CeTrainConfig(),
             X_val=None, T_val=None) -> CeNetParams:
    """Fit the CE-Net weights with mini-batch Adam.

    ``X`` holds real-stacked LS estimates and ``T`` the real-stacked true
    responses, one row each. With a validation set, the weights with the
    lowest validation loss seen at any epoch boundary (the starting weights
    included) are returned.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if X.shape != T.shape or X.shape[1] != params.W.shape[1]:
        raise ValueError("training data shape does not match CE-Net size")
    rng = np.random.default_rng(cfg.seed)
    W = params.W.copy()
    state = AdamState.zeros_like(W, lr=cfg.lr)
    history = list(params.loss_history)
    use_val = X_val is not None
    best_W, best_val = W.copy(), ce_loss(W, X_val, T_val) if use_val else np.inf
    n = X.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            W, state = adam_step(state, W, ce_grad(W, X[idx], T[idx]))
        train_loss = ce_loss(W, X, T)
        if not np.isfinite(train_loss):
            raise FloatingPointError(f"CE-Net training loss became {train_loss} at epoch {epoch}")
        entry = {"epoch": params.epoch + epoch + 1, "train_loss": train_loss}
        if use_val:
            val = ce_loss(W, X_val, T_val)
            entry["val_loss"] = val
            if val < best_val:
                best_W, best_val = W.copy(), val
        history.append(entry)
        logger.info("ce epoch %d train %.6g%s", entry["epoch"], train_loss,
                    f" val {entry['val_loss']:.6g}" if use_val else "")
    return CeNetParams(best_W if use_val else W, epoch=params.epoch + cfg.epochs,
                       loss_history=history, init_snr_db=params.init_snr_db)


def pilot_dataset(pdp: PowerDelayProfile, N: int, snr_db, n: int, seed: int,
                  constellation: Constellation = Constellation(16), pilot_isi: bool = True):
    """Draw ``n`` CP-free pilot receptions.

    Returns real-stacked ``(X_ls, T_true)`` with one frame per row.
    ``snr_db`` may be a scalar or a list to sample from uniformly. With
    ``pilot_isi`` the pilot is preceded by a random data symbol sent over
    the same channel.
    """
    ss = np.random.SeedSequence(seed)
    s_ch, s_frame, s_prev, s_noise, s_snr = ss.spawn(5)
    taps = np.stack([draw_taps(pdp, c).taps for c in s_ch.spawn(n)])
    frame = make_frame(constellation, N, s_frame, batch=(n,))
    q_prev = None
    if pilot_isi:
        q_prev = make_frame(constellation, N, s_prev, batch=(n,)).q_data
    snrs = np.atleast_1d(np.asarray(snr_db, dtype=float))
    snr = snrs[np.random.default_rng(s_snr).integers(0, snrs.size, n)] if snrs.size > 1 else snrs[0]
    rx = transmit_cp_free(frame, taps, snr, s_noise, q_prev=q_prev)
    h_ls = ls_estimate(fft_unitary(rx.y_pilot), frame.u_pilot)
    g = freq_response(taps, N)
    return stack_vec(h_ls), stack_vec(g)
