"""Frame simulation and the receiver registry used by training and BER sweeps.

Every receiver just maps a simulated :class:`FrameBlock` to decided data
bits. All receivers evaluated at one SNR see the same blocks (same
channels, symbols and noise), which keeps their BER comparisons paired.
"""

from dataclasses import dataclass, field

import numpy as np

from .baselines import detect_with_cp, estimate_channel, isi_cancel_mmse_detect, mmse_equalize_per_subcarrier
from .ce_net import CeNetParams, ce_forward, ls_estimate
from .channel import PowerDelayProfile, draw_taps, exp_pdp, freq_response
from .link import Constellation, OfdmFrame, RxFrame, make_frame, qam_hard_demod, transmit_cp_free
from .numerics import fft_unitary, stack_vec, unstack_vec
from .oamp import DetectionModel, OampConfig, build_detection_model, estimated_taps, isi_cancel
from .oamp_net import OampNetParams, net_forward


@dataclass(frozen=True)
class Scenario:
    """Link parameters shared by all receivers.

    ``fading=False`` replaces the Rayleigh draw by the deterministic taps
    ``sqrt(p_l)``; with a single-tap profile that is the AWGN channel.
    ``receiver_taps`` is the channel length assumed when converting a
    frequency-domain estimate back to taps (default: the true length).
    """

    N: int = 64
    constellation: Constellation = Constellation(16)
    pdp: PowerDelayProfile = field(default_factory=lambda: exp_pdp(8, 2.0))
    fading: bool = True
    pilot_isi: bool = True
    receiver_taps: int | None = None
    snr_mode: str = "ensemble"

    @property
    def taps_assumed(self) -> int:
        return self.receiver_taps or self.pdp.L


@dataclass
class FrameBlock:
    """A batch of simulated frames at one SNR, plus per-block receiver caches."""

    frame: OfdmFrame
    taps: np.ndarray
    q_prev: np.ndarray
    rx: RxFrame
    snr_db: float
    noise_seed: np.random.SeedSequence
    cache: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.taps.shape[0]


def draw_channels(scn: Scenario, seed, n: int) -> np.ndarray:
    if not scn.fading:
        return np.broadcast_to(np.sqrt(scn.pdp.tap_powers).astype(complex), (n, scn.pdp.L)).copy()
    return np.stack([draw_taps(scn.pdp, s).taps for s in _seedseq(seed).spawn(n)])


def _seedseq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def simulate_block(scn: Scenario, snr_db: float, seed, n: int, noise: bool = True) -> FrameBlock:
    s_ch, s_frame, s_prev, s_noise = _seedseq(seed).spawn(4)
    taps = draw_channels(scn, s_ch, n)
    frame = make_frame(scn.constellation, scn.N, s_frame, batch=(n,))
    if scn.pilot_isi:
        q_prev = make_frame(scn.constellation, scn.N, s_prev, batch=(n,)).q_data
    else:
        q_prev = np.zeros_like(frame.q_data)
    rx = transmit_cp_free(frame, taps, snr_db, s_noise, q_prev=q_prev, snr_mode=scn.snr_mode, noise=noise)
    return FrameBlock(frame=frame, taps=taps, q_prev=q_prev, rx=rx, snr_db=snr_db, noise_seed=s_noise)


@dataclass
class ReceiverContext:
    scenario: Scenario
    ce_params: CeNetParams | None = None
    net_params: OampNetParams | None = None
    oamp_cfg: OampConfig = field(default_factory=OampConfig)


def _need_ce(ctx):
    if ctx.ce_params is None:
        raise ValueError("this receiver needs a CE-Net checkpoint")
    return ctx.ce_params


def ce_estimate(blk: FrameBlock, ctx: ReceiverContext) -> np.ndarray:
    if "ce" not in blk.cache:
        h_ls = ls_estimate(fft_unitary(blk.rx.y_pilot), blk.frame.u_pilot)
        blk.cache["ce"] = ce_forward(_need_ce(ctx), h_ls)
    return blk.cache["ce"]


def front_end(rx: RxFrame, h_freq_est, taps_count: int) -> DetectionModel:
    """Estimated taps, ISI cancellation and the real-valued detection model."""
    taps = estimated_taps(h_freq_est, taps_count)
    y_hat = isi_cancel(rx.y_data, taps, rx.q_prev_data)
    return build_detection_model(y_hat, taps, rx.noise_var)


def ce_model(blk: FrameBlock, ctx: ReceiverContext) -> DetectionModel:
    if "model" not in blk.cache:
        blk.cache["model"] = front_end(blk.rx, ce_estimate(blk, ctx), ctx.scenario.taps_assumed)
    return blk.cache["model"]


def _demod(u_r, ctx):
    return qam_hard_demod(unstack_vec(u_r), ctx.scenario.constellation)


def _dl_oamp(blk, ctx):
    if ctx.net_params is None:
        raise ValueError("dl-oamp needs an OAMP-Net checkpoint")
    return _demod(net_forward(ce_model(blk, ctx), ctx.net_params, ctx.oamp_cfg), ctx)


def _oamp(blk, ctx):
    # unit (lambda, gamma) is exactly classic OAMP; the SVD path is much cheaper
    ones = OampNetParams.ones(ctx.oamp_cfg.iterations)
    return _demod(net_forward(ce_model(blk, ctx), ones, ctx.oamp_cfg), ctx)


def _cp_free_one_tap(estimator):
    def run(blk, ctx):
        Y_p = fft_unitary(blk.rx.y_pilot)
        H = estimate_channel(estimator, Y_p, blk.frame.u_pilot, blk.rx.noise_var, pdp=ctx.scenario.pdp)
        x = mmse_equalize_per_subcarrier(fft_unitary(blk.rx.y_data), H, blk.rx.noise_var)
        return qam_hard_demod(x, ctx.scenario.constellation)
    return run


def _isi_cancel_mmse(blk, ctx):
    return isi_cancel_mmse_detect(blk.rx, ce_estimate(blk, ctx), ctx.scenario.taps_assumed,
                                  ctx.scenario.constellation)


def _with_cp(estimator, detector):
    def run(blk, ctx):
        return detect_with_cp(blk.frame, blk.taps, blk.snr_db, estimator, detector,
                              ctx.scenario.constellation, blk.noise_seed, pdp=ctx.scenario.pdp,
                              ce_params=ctx.ce_params if estimator == "ce" else None,
                              q_prev=blk.q_prev)
    return run


RECEIVERS = {
    "dl-oamp": _dl_oamp,
    "oamp": _oamp,
    "ls-mmse": _cp_free_one_tap("ls"),
    "lmmse-mmse": _cp_free_one_tap("lmmse"),
    "isi-cancel-mmse": _isi_cancel_mmse,
    "mmse-cp": _with_cp("lmmse", "mmse"),
    "ml-cp-csi": _with_cp("perfect", "ml"),
    "ce-ml-cp": _with_cp("ce", "ml"),
    "mmse-cp-csi": _with_cp("perfect", "mmse"),
}

NEEDS_CE = frozenset({"dl-oamp", "oamp", "isi-cancel-mmse", "ce-ml-cp"})
NEEDS_NET = frozenset({"dl-oamp"})


def run_receiver(name: str, blk: FrameBlock, ctx: ReceiverContext) -> np.ndarray:
    try:
        fn = RECEIVERS[name]
    except KeyError:
        raise ValueError(f"unknown receiver {name!r}; choose from {', '.join(RECEIVERS)}") from None
    return fn(blk, ctx)


def oampnet_batch_maker(scn: Scenario, ce_params: CeNetParams | None = None, csi: str = "ce"):
    """Batch source for :func:`dloamp.oamp_net.train_oamp_net`.

    ``csi="ce"`` builds detection models from frozen CE-Net estimates (the
    deployed receiver); ``csi="true"`` uses the true channel instead.
    """
    if csi not in ("ce", "true"):
        raise ValueError(f"unknown CSI mode {csi!r}")
    if csi == "ce" and ce_params is None:
        raise ValueError("CE-Net parameters required for csi='ce'")
    ctx = ReceiverContext(scn, ce_params=ce_params)

    def make(seed, n, snr_db):
        blk = simulate_block(scn, snr_db, seed, n)
        if csi == "ce":
            model = ce_model(blk, ctx)
        else:
            model = front_end(blk.rx, freq_response(blk.taps, scn.N), scn.pdp.L)
        return model, stack_vec(blk.frame.u_data), blk.frame.data_bits

    return make
