"""Reference receivers: per-subcarrier MMSE/ML, CP-OFDM and simple ISI cancellation."""

from enum import Enum

import numpy as np

from .ce_net import CeNetParams, ce_forward, ls_estimate
from .channel import PowerDelayProfile, channel_correlation, freq_response
from .link import (Constellation, OfdmFrame, as_taps, linear_convolve_stream, nearest_index,
                   noise_draws, qam_hard_demod, signal_power)
from .numerics import fft_unitary
from .oamp import estimated_taps, isi_cancel


class BaselineKind(Enum):
    LS_MMSE = "ls-mmse"
    LMMSE_MMSE = "lmmse-mmse"
    CE_OAMP = "oamp"
    MMSE_CP = "mmse-cp"
    ML_CP_PERFECT_CSI = "ml-cp-csi"
    ISI_CANCEL_MMSE = "isi-cancel-mmse"


def mmse_equalize_per_subcarrier(Y, H_est, noise_var) -> np.ndarray:
    """One-tap MMSE ``conj(H) Y / (|H|^2 + sigma^2)`` on every subcarrier."""
    Y = np.asarray(Y, dtype=complex)
    H_est = np.asarray(H_est, dtype=complex)
    if Y.shape[-1] != H_est.shape[-1]:
        raise ValueError("received symbols and channel estimate differ in length")
    s2 = np.asarray(noise_var, dtype=float)[..., None]
    return np.conj(H_est) * Y / (np.abs(H_est) ** 2 + s2)


def ml_per_subcarrier(Y, H, constellation: Constellation) -> np.ndarray:
    """``argmin_c |Y_n - H_n c|^2`` per subcarrier, ties to the lower point index."""
    Y = np.asarray(Y, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if Y.shape[-1] != H.shape[-1]:
        raise ValueError("received symbols and channel differ in length")
    c = constellation.points
    d = np.abs(Y[..., None] - H[..., None] * c) ** 2
    return c[nearest_index(d)]


def transmit_with_cp(frame: OfdmFrame, ch, snr_db: float, rng_seed, cp_len: int,
                     q_prev=None, noise: bool = True):
    """CP-OFDM reception of a frame: returns ``(y_pilot, y_data, noise_var)``.

    Each symbol is sent as ``[x[-cp:], x]``; after linear convolution with
    the channel the prefix samples are discarded, which leaves
    ``y = H_circ q + w`` whenever ``cp_len >= L - 1``.
    """
    h = as_taps(ch)
    N = frame.N
    if cp_len < h.shape[-1] - 1:
        raise ValueError(f"cyclic prefix of {cp_len} is shorter than the channel memory {h.shape[-1] - 1}")
    if q_prev is None:
        q_prev = np.zeros_like(frame.q_data)

    def with_cp(q):
        return np.concatenate([q[..., N - cp_len:], q], axis=-1) if cp_len else q

    stream = np.concatenate([with_cp(np.asarray(q_prev, dtype=complex)), with_cp(frame.q_pilot),
                             with_cp(frame.q_data)], axis=-1)
    rx = linear_convolve_stream(stream, h)
    sym = N + cp_len
    y_p = rx[..., sym + cp_len: 2 * sym]
    y_d = rx[..., 2 * sym + cp_len: 3 * sym]
    noise_var = signal_power(h, N, cp=True) * 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)
    if noise:
        zp, zd = noise_draws(rng_seed, y_d.shape)
        sd = np.sqrt(noise_var)[..., None]
        y_p = y_p + sd * zp
        y_d = y_d + sd * zd
    return y_p, y_d, noise_var


def estimate_channel(kind: str, Y_pilot, X_pilot, noise_var, *, true_response=None,
                     pdp: PowerDelayProfile | None = None, ce_params: CeNetParams | None = None):
    """Frequency-domain channel estimate by name: perfect, ls, lmmse or ce."""
    if kind == "perfect":
        if true_response is None:
            raise ValueError("perfect CSI needs the true frequency response")
        return np.asarray(true_response)
    h_ls = ls_estimate(Y_pilot, X_pilot)
    if kind == "ls":
        return h_ls
    if kind == "lmmse":
        if pdp is None:
            raise ValueError("LMMSE estimation needs the power delay profile")
        # R = Q diag(lam) Q^H turns R (R + s2 I)^-1 into a per-eigenvalue shrink,
        # so a batch of noise levels costs one eigendecomposition
        lam, Q = np.linalg.eigh(channel_correlation(pdp, h_ls.shape[-1]))
        lam = np.clip(lam, 0.0, None)
        s2 = np.asarray(noise_var, dtype=float)[..., None]
        coef = (Q.conj().T @ h_ls[..., None])[..., 0] * lam / (lam + s2)
        return (Q @ coef[..., None])[..., 0]
    if kind == "ce":
        if ce_params is None:
            raise ValueError("CE-Net estimation needs trained CE-Net parameters")
        return ce_forward(ce_params, h_ls)
    raise ValueError(f"unknown channel estimator {kind!r}")


def detect_with_cp(frame: OfdmFrame, ch, snr_db: float, estimator: str, detector: str,
                   constellation: Constellation, rng_seed, cp_len: int | None = None,
                   pdp=None, ce_params=None, q_prev=None) -> np.ndarray:
    """Data bits decided by a CP-OFDM receiver (the sufficient-CP reference)."""
    h = as_taps(ch)
    N = frame.N
    cp_len = h.shape[-1] - 1 if cp_len is None else cp_len
    y_p, y_d, s2 = transmit_with_cp(frame, h, snr_db, rng_seed, cp_len, q_prev=q_prev)
    Y_p, Y_d = fft_unitary(y_p), fft_unitary(y_d)
    H_est = estimate_channel(estimator, Y_p, frame.u_pilot, s2, true_response=freq_response(h, N),
                             pdp=pdp, ce_params=ce_params)
    if detector == "mmse":
        x = mmse_equalize_per_subcarrier(Y_d, H_est, s2)
    elif detector == "ml":
        x = ml_per_subcarrier(Y_d, H_est, constellation)
    else:
        raise ValueError(f"unknown detector {detector!r}")
    return qam_hard_demod(x, constellation)


def isi_cancel_mmse_detect(rx, h_freq_est, taps_count: int, constellation: Constellation) -> np.ndarray:
    """Cancel the previous block's leakage, then one-tap MMSE; residual ICI is ignored.

    ``h_freq_est`` is the channel estimator output; it is truncated to
    ``taps_count`` taps, and that tap model drives both the cancellation
    and the equaliser.
    """
    taps = estimated_taps(h_freq_est, taps_count)
    y_hat = isi_cancel(rx.y_data, taps, rx.q_prev_data)
    G = freq_response(taps, y_hat.shape[-1])
    x = mmse_equalize_per_subcarrier(fft_unitary(y_hat), G, rx.noise_var)
    return qam_hard_demod(x, constellation)
