"""CP-free OFDM link simulator with OAMP and unfolded OAMP-Net detection."""

from .ce_net import CeNetParams, ce_forward, ce_train, ls_estimate, lmmse_weights
from .channel import ChannelRealization, PowerDelayProfile, exp_pdp, flat_profile, freq_response
from .link import Constellation, make_frame, qam_hard_demod, qam_modulate, transmit_cp_free
from .oamp import OampConfig, oamp_detect, posterior_mean
from .oamp_net import OampNetParams, net_forward, train_oamp_net

__version__ = "0.1.0"

__all__ = [
    "CeNetParams", "ChannelRealization", "Constellation", "OampConfig", "OampNetParams",
    "PowerDelayProfile", "ce_forward", "ce_train", "exp_pdp", "flat_profile", "freq_response",
    "lmmse_weights", "ls_estimate", "make_frame", "net_forward", "oamp_detect", "posterior_mean",
    "qam_hard_demod", "qam_modulate", "train_oamp_net", "transmit_cp_free",
]
