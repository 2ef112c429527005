"""QAM mapping, OFDM frame construction and the CP-free reception model.

Frames carry one pilot symbol followed by one data symbol. Everything
that takes a frame, channel or received vector also accepts arrays with a
leading batch axis, which is how the sweep simulates blocks of frames.

Received data symbol without a cyclic prefix::

    y = (H - A) q + A q_prev + w

``H`` is the circulant channel matrix and ``A`` its strictly-upper
(wrap-around) part, so ``H - A`` is the causal linear-convolution matrix.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channel import ChannelRealization
from .numerics import ifft_unitary

PILOT_SEED = 0x51CF


def _gray(i):
    return i ^ (i >> 1)


@dataclass(frozen=True)
class Constellation:
    """Gray-labelled square M-QAM with unit average energy.

    Point index equals the integer value of its bit label (MSB first). The
    first ``log2(M)/2`` bits select the in-phase level and the rest the
    quadrature level; along each axis the level with ascending amplitude
    index ``i`` carries the Gray label ``i ^ (i >> 1)``. For QPSK this gives
    ``00 -> (-1-1j)/sqrt2, 01 -> (-1+1j)/sqrt2, 11 -> (1+1j)/sqrt2,
    10 -> (1-1j)/sqrt2``.
    """

    M: int

    def __post_init__(self):
        if self.M not in (4, 16, 64):
            raise ValueError(f"unsupported QAM order {self.M}")

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.M))

    @property
    def side(self) -> int:
        return int(np.sqrt(self.M))

    @cached_property
    def alphabet(self) -> np.ndarray:
        """Real per-axis levels, ascending and symmetric about zero."""
        m = self.side
        levels = np.arange(-(m - 1), m, 2, dtype=float)
        # (2/M) * sqrt(M) * sum(levels^2) over both axes must equal 1
        return levels / np.sqrt(2 * np.mean(levels**2))

    @cached_property
    def _level_of_label(self) -> np.ndarray:
        m = self.side
        out = np.empty(m, dtype=np.intp)
        out[_gray(np.arange(m))] = np.arange(m)
        return out

    @cached_property
    def points(self) -> np.ndarray:
        half = self.bits_per_symbol // 2
        labels = np.arange(self.M)
        i_lab = labels >> half
        q_lab = labels & (self.side - 1)
        a = self.alphabet
        return a[self._level_of_label[i_lab]] + 1j * a[self._level_of_label[q_lab]]

    @cached_property
    def labels(self) -> np.ndarray:
        """Bit labels as an (M, log2 M) 0/1 array."""
        k = self.bits_per_symbol
        return ((np.arange(self.M)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)


def qam_modulate(bits, constellation: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    k = constellation.bits_per_symbol
    if bits.shape[-1] % k:
        raise ValueError(f"bit count {bits.shape[-1]} is not a multiple of {k}")
    groups = bits.reshape(bits.shape[:-1] + (-1, k))
    idx = groups @ (1 << np.arange(k - 1, -1, -1))
    return constellation.points[idx]


def nearest_index(d) -> np.ndarray:
    """Argmin over the last axis where near-equal distances count as ties.

    A tie (within rounding of the smallest distance) resolves to the lowest
    index, so a midpoint between two points decides for the lower one.
    """
    d = np.asarray(d, dtype=float)
    dmin = d.min(axis=-1, keepdims=True)
    return np.argmax(d <= dmin * (1 + 1e-12) + 1e-300, axis=-1)


def qam_hard_demod(symbols, constellation: Constellation) -> np.ndarray:
    """Nearest-point decisions; ties go to the lower point index."""
    symbols = np.asarray(symbols, dtype=complex)
    idx = nearest_index(np.abs(symbols[..., None] - constellation.points) ** 2)
    bits = constellation.labels[idx]
    return bits.reshape(symbols.shape[:-1] + (-1,))


def qam_hard_symbols(symbols, constellation: Constellation) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=complex)
    return constellation.points[nearest_index(np.abs(symbols[..., None] - constellation.points) ** 2)]


def as_taps(ch) -> np.ndarray:
    return ch.taps if isinstance(ch, ChannelRealization) else np.asarray(ch, dtype=complex)


def build_cyclic_H(ch, N: int) -> np.ndarray:
    """Circulant matrix with first column ``[h_0 .. h_{L-1}, 0 .. 0]``."""
    h = as_taps(ch)
    L = h.shape[-1]
    if L > N:
        raise ValueError(f"channel has {L} taps but only {N} subcarriers")
    col = np.zeros(h.shape[:-1] + (N,), dtype=complex)
    col[..., :L] = h
    r = np.arange(N)
    return col[..., (r[:, None] - r[None, :]) % N]


def build_cutoff_A(ch, N: int) -> np.ndarray:
    """Wrap-around part of the circulant: ``A[r, N-k] = h_{k+r}``.

    Nonzero only in the top-right ``(L-1) x (L-1)`` triangle.
    """
    H = build_cyclic_H(ch, N)
    return np.triu(H, k=1)


def pilot_symbols(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed QPSK pilot (bits, symbols) shared by every frame."""
    qpsk = Constellation(4)
    bits = np.random.default_rng(PILOT_SEED).integers(0, 2, 2 * N, dtype=np.uint8)
    return bits, qam_modulate(bits, qpsk)


@dataclass(frozen=True)
class OfdmFrame:
    pilot_bits: np.ndarray
    data_bits: np.ndarray
    u_pilot: np.ndarray
    u_data: np.ndarray
    q_pilot: np.ndarray
    q_data: np.ndarray

    @property
    def N(self) -> int:
        return self.u_data.shape[-1]


def make_frame(constellation: Constellation, N: int, rng, batch: tuple = ()) -> OfdmFrame:
    """One pilot symbol plus one random data symbol (optionally batched)."""
    rng = np.random.default_rng(rng)
    pbits, upil = pilot_symbols(N)
    dbits = rng.integers(0, 2, tuple(batch) + (N * constellation.bits_per_symbol,), dtype=np.uint8)
    udat = qam_modulate(dbits, constellation)
    upil = np.broadcast_to(upil, udat.shape)
    return OfdmFrame(
        pilot_bits=np.broadcast_to(pbits, tuple(batch) + pbits.shape),
        data_bits=dbits,
        u_pilot=upil,
        u_data=udat,
        q_pilot=ifft_unitary(upil),
        q_data=ifft_unitary(udat),
    )


@dataclass(frozen=True)
class RxFrame:
    """Received pilot and data symbols (time domain) for one or more frames.

    ``noise_var`` is the total complex noise variance per sample.
    ``q_prev_data`` is the time-domain signal preceding the data symbol,
    i.e. the known pilot.
    """

    y_pilot: np.ndarray
    y_data: np.ndarray
    snr_db: float
    noise_var: np.ndarray
    q_prev_data: np.ndarray


def signal_power(ch, N: int, Es: float = 1.0, cp: bool = False) -> np.ndarray:
    """Mean per-sample power of the useful received signal ``s``.

    Ensemble average over i.i.d. symbols of energy ``Es``, i.e.
    ``(Es / N) * ||G||_F^2`` with ``G = H - A`` without a CP (tap ``l``
    reaches only ``N - l`` samples) or the full circulant ``H`` with one.
    """
    h = as_taps(ch)
    L = h.shape[-1]
    if L > N:
        raise ValueError(f"channel has {L} taps but only {N} subcarriers")
    reach = np.full(L, float(N)) if cp else N - np.arange(L, dtype=float)
    return Es * np.sum(np.abs(h) ** 2 * reach, axis=-1) / N


def linear_convolve_stream(x, taps) -> np.ndarray:
    """Causal linear convolution along the last axis, truncated to the input length."""
    x = np.asarray(x, dtype=complex)
    h = np.asarray(taps, dtype=complex)
    y = np.zeros(np.broadcast_shapes(x.shape[:-1], h.shape[:-1]) + x.shape[-1:], dtype=complex)
    for l in range(h.shape[-1]):
        y[..., l:] += h[..., l, None] * x[..., : x.shape[-1] - l]
    return y


def cp_free_receive(q, q_prev, ch) -> np.ndarray:
    """Noiseless ``(H - A) q + A q_prev`` computed as a streaming convolution."""
    q = np.asarray(q, dtype=complex)
    N = q.shape[-1]
    stream = np.concatenate([np.broadcast_to(q_prev, q.shape), q], axis=-1)
    return linear_convolve_stream(stream, as_taps(ch))[..., N:]


def snr_to_noise_var(ch, frame: OfdmFrame | None, snr_db: float, mode: str = "ensemble",
                     cp: bool = False) -> np.ndarray:
    """Noise variance giving ``10 log10(mean|s|^2 / noise_var) == snr_db``.

    ``mode="ensemble"`` averages ``|s|^2`` over the symbol ensemble for the
    given channel; ``mode="frame"`` uses the pilot and data symbols of
    ``frame`` that were actually sent.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    if not np.all(np.isfinite(snr_db)):
        raise ValueError("SNR must be finite")
    if frame is None:
        raise ValueError("frame is required to fix the block size")
    if mode == "ensemble":
        s_bar = signal_power(ch, frame.N, cp=cp)
    elif mode == "frame":
        if cp:
            H = build_cyclic_H(ch, frame.N)
            s_p = (H @ frame.q_pilot[..., None])[..., 0]
            s_d = (H @ frame.q_data[..., None])[..., 0]
        else:
            zero = np.zeros(frame.q_data.shape, dtype=complex)
            s_p = cp_free_receive(frame.q_pilot, zero, ch)
            s_d = cp_free_receive(frame.q_data, zero, ch)
        s_bar = (np.sum(np.abs(s_p) ** 2, -1) + np.sum(np.abs(s_d) ** 2, -1)) / (2 * frame.N)
    else:
        raise ValueError(f"unknown SNR mode {mode!r}")
    return s_bar * 10.0 ** (-snr_db / 10.0)


def noise_draws(rng_seed, shape) -> tuple[np.ndarray, np.ndarray]:
    """Unit-variance complex Gaussian draws for the pilot and data symbol."""
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((2, 2) + tuple(shape))
    return (z[0, 0] + 1j * z[0, 1]) / np.sqrt(2), (z[1, 0] + 1j * z[1, 1]) / np.sqrt(2)


def transmit_cp_free(frame: OfdmFrame, ch, snr_db: float, rng_seed, q_prev=None,
                     snr_mode: str = "ensemble", noise: bool = True) -> RxFrame:
    """Pass a frame through the channel with no cyclic prefix.

    ``q_prev`` is the time-domain symbol sent before the pilot (the previous
    frame's data); ``None`` means silence before the frame.
    """
    N = frame.N
    h = as_taps(ch)
    if h.shape[-1] > N:
        raise ValueError(f"channel has {h.shape[-1]} taps but only {N} subcarriers")
    if h.ndim > 1 and h.shape[:-1] != frame.u_data.shape[:-1]:
        raise ValueError("channel batch does not match frame batch")
    if q_prev is None:
        q_prev = np.zeros(frame.q_data.shape, dtype=complex)
    q_prev = np.asarray(q_prev, dtype=complex)
    if q_prev.shape[-1] != N:
        raise ValueError("previous symbol length does not match the frame")

    noise_var = snr_to_noise_var(h, frame, snr_db, mode=snr_mode)
    y_p = cp_free_receive(frame.q_pilot, q_prev, h)
    y_d = cp_free_receive(frame.q_data, frame.q_pilot, h)
    if noise:
        zp, zd = noise_draws(rng_seed, y_d.shape)
        sd = np.sqrt(noise_var)[..., None]
        y_p = y_p + sd * zp
        y_d = y_d + sd * zd
    return RxFrame(y_pilot=y_p, y_data=y_d, snr_db=snr_db, noise_var=np.asarray(noise_var),
                   q_prev_data=np.array(frame.q_pilot))
