"""Rayleigh block-fading multipath channels with an exponential delay profile."""

from dataclasses import dataclass

import numpy as np

from .numerics import fft_unitary


@dataclass(frozen=True)
class PowerDelayProfile:
    """Expected power per tap, normalised to unit total power."""

    tap_powers: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.tap_powers, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("power delay profile needs at least one tap")
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise ValueError("tap powers must be finite and positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"tap powers must sum to 1, got {p.sum()!r}")
        object.__setattr__(self, "tap_powers", p)

    @property
    def L(self) -> int:
        return self.tap_powers.size


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        h = np.asarray(self.taps, dtype=complex)
        if h.ndim != 1 or h.size == 0:
            raise ValueError("channel needs at least one tap")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel taps must be finite")
        object.__setattr__(self, "taps", h)

    @property
    def L(self) -> int:
        return self.taps.size


def exp_pdp(L: int, decay: float) -> PowerDelayProfile:
    """Profile with ``p_l`` proportional to ``exp(-l / decay)``.

    ``decay=inf`` gives the uniform profile.
    """
    if L < 1:
        raise ValueError("tap count must be at least 1")
    if not decay > 0:
        raise ValueError("decay must be positive")
    p = np.exp(-np.arange(L) / decay)
    return PowerDelayProfile(p / p.sum())


def flat_profile() -> PowerDelayProfile:
    return PowerDelayProfile(np.ones(1))


def draw_taps(pdp: PowerDelayProfile, rng_seed) -> ChannelRealization:
    """Draw circularly-symmetric Gaussian taps with variances ``pdp.tap_powers``.

    ``rng_seed`` may be an int, a ``SeedSequence`` or a ``Generator``; only
    integer seeds are recorded on the realization.
    """
    rng = np.random.default_rng(rng_seed)
    g = rng.standard_normal((2, pdp.L))
    h = np.sqrt(pdp.tap_powers / 2) * (g[0] + 1j * g[1])
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    return ChannelRealization(h, seed=seed)


def _padded(taps: np.ndarray, N: int) -> np.ndarray:
    taps = np.asarray(taps, dtype=complex)
    L = taps.shape[-1]
    if L > N:
        raise ValueError(f"channel has {L} taps but only {N} subcarriers")
    out = np.zeros(taps.shape[:-1] + (N,), dtype=complex)
    out[..., :L] = taps
    return out


def freq_response(ch, N: int) -> np.ndarray:
    """Non-unitary N-point DFT of the zero-padded taps.

    These are the eigenvalues of the cyclic channel matrix:
    ``F @ H @ F^H == diag(freq_response(ch, N))``. ``ch`` may be a
    :class:`ChannelRealization` or a raw (possibly batched) tap array.
    """
    taps = ch.taps if isinstance(ch, ChannelRealization) else ch
    return np.sqrt(N) * fft_unitary(_padded(taps, N))


def channel_correlation(pdp: PowerDelayProfile, N: int) -> np.ndarray:
    """Frequency-domain correlation ``R[m, n] = sum_l p_l exp(-2j pi (m-n) l / N)``."""
    if pdp.L > N:
        raise ValueError(f"profile has {pdp.L} taps but only {N} subcarriers")
    d = np.subtract.outer(np.arange(N), np.arange(N))
    l = np.arange(pdp.L)
    return np.tensordot(np.exp(-2j * np.pi * d[..., None] * l / N), pdp.tap_powers, axes=([-1], [0]))
