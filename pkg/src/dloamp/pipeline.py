"""Config-driven training of the two learned blocks."""

import logging

from .ce_net import CeNetParams, CeTrainConfig, ce_loss, ce_train, pilot_dataset
from .config import SimConfig
from .oamp_net import NetTrainResult, OampNetParams, train_oamp_net
from .receivers import oampnet_batch_maker

logger = logging.getLogger(__name__)


def train_ce_net(cfg: SimConfig) -> CeNetParams:
    """LMMSE-initialised CE-Net fitted on synthetic pilot receptions."""
    scn, ce = cfg.scenario, cfg.ce
    init = CeNetParams.from_lmmse(scn.pdp, scn.N, ce.train_snr_db[0])
    kw = dict(constellation=scn.constellation, pilot_isi=scn.pilot_isi)
    X, T = pilot_dataset(scn.pdp, scn.N, ce.train_snr_db, ce.samples, [ce.seed, 0], **kw)
    X_val = T_val = None
    if ce.val_samples > 0:
        X_val, T_val = pilot_dataset(scn.pdp, scn.N, ce.train_snr_db, ce.val_samples, [ce.seed, 1], **kw)
        logger.info("ce init val loss %.6g", ce_loss(init.W, X_val, T_val))
    tc = CeTrainConfig(lr=ce.lr, batch_size=ce.batch_size, epochs=ce.epochs, seed=ce.seed)
    return ce_train(init, X, T, tc, X_val, T_val)


def train_oamp_net_from_config(cfg: SimConfig, ce_params: CeNetParams | None) -> NetTrainResult:
    make = oampnet_batch_maker(cfg.scenario, ce_params, csi=cfg.net.csi)
    start = OampNetParams.ones(cfg.oamp.iterations)
    return train_oamp_net(start, cfg.net.train, make, cfg.oamp)
