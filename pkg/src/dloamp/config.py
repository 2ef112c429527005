"""Experiment configuration read from an INI file.

Every key is optional; missing keys take the defaults below. Lists are
comma separated.

.. code-block:: ini

    [link]
    N = 64
    qam = 16
    pilot_isi = true          ; previous frame's data leaks into the pilot
    snr_mode = ensemble       ; ensemble | frame

    [channel]
    kind = rayleigh           ; rayleigh | awgn
    taps = 8
    decay = 2.0
    receiver_taps =           ; channel length assumed by receivers

    [oamp]
    iterations = 10
    beta = 0.5
    epsilon = 1e-9
    v_sq_init = 1.0

    [ce]
    train_snr_db = 20
    samples = 50000
    val_samples = 5000
    batch_size = 50
    epochs = 5
    lr = 0.001
    seed = 1
    checkpoint = ce_net.json

    [oampnet]
    epochs = 500
    batch_size = 100
    dev_size = 1000
    lr = 0.001
    fd_step = 1e-4
    train_snr_db = 20
    seed = 0
    eval_every = 1
    patience =                ; epochs without dev improvement before stopping; empty = never
    csi = ce                  ; ce | true
    checkpoint = oamp_net.json
    history = oamp_net_history.csv

    [sweep]
    receivers = dl-oamp,oamp,ls-mmse,lmmse-mmse,isi-cancel-mmse,mmse-cp,ml-cp-csi
    snr_db = 5,10,15,20,25,30
    target_errors = 1000
    frames_cap = 1000000
    block_size = 100
    seed = 12345
    timing = false            ; record wall-clock seconds (breaks byte-identical reruns)
    out = ber.csv
    figure = ber.pdf          ; empty to skip the figure
    trajectory =              ; optional JSON-lines dump of OAMP iterations
"""

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .channel import exp_pdp, flat_profile
from .link import Constellation
from .oamp import OampConfig
from .oamp_net import NetTrainConfig
from .receivers import RECEIVERS, Scenario

DEFAULT_RECEIVERS = ("dl-oamp", "oamp", "ls-mmse", "lmmse-mmse", "isi-cancel-mmse", "mmse-cp", "ml-cp-csi")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CeSettings:
    train_snr_db: tuple = (20.0,)
    samples: int = 50_000
    val_samples: int = 5_000
    batch_size: int = 50
    epochs: int = 5
    lr: float = 1e-3
    seed: int = 1
    checkpoint: str = "ce_net.json"


@dataclass(frozen=True)
class NetSettings:
    train: NetTrainConfig = field(default_factory=NetTrainConfig)
    csi: str = "ce"
    checkpoint: str = "oamp_net.json"
    history: str = "oamp_net_history.csv"


@dataclass(frozen=True)
class SweepSettings:
    receivers: tuple = DEFAULT_RECEIVERS
    snr_db: tuple = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    target_errors: int = 1000
    frames_cap: int = 1_000_000
    block_size: int = 100
    seed: int = 12345
    timing: bool = False
    out: str = "ber.csv"
    figure: str = "ber.pdf"
    trajectory: str = ""


@dataclass(frozen=True)
class SimConfig:
    scenario: Scenario = field(default_factory=Scenario)
    oamp: OampConfig = field(default_factory=OampConfig)
    ce: CeSettings = field(default_factory=CeSettings)
    net: NetSettings = field(default_factory=NetSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)

    def validate(self) -> "SimConfig":
        if self.scenario.N < 2:
            raise ConfigError("N must be at least 2")
        if self.scenario.pdp.L > self.scenario.N:
            raise ConfigError("channel has more taps than subcarriers")
        if not self.sweep.snr_db:
            raise ConfigError("SNR grid is empty")
        if self.sweep.target_errors < 100:
            raise ConfigError("target error count must be at least 100")
        if self.sweep.block_size < 1 or self.sweep.frames_cap < 1:
            raise ConfigError("block size and frame cap must be positive")
        unknown = [r for r in self.sweep.receivers if r not in RECEIVERS]
        if unknown:
            raise ConfigError(f"unknown receiver(s): {', '.join(unknown)}")
        if self.net.train.batch_size < 1 or self.net.train.dev_size < 1:
            raise ConfigError("OAMP-Net batch and dev sizes must be positive")
        if self.net.csi not in ("ce", "true"):
            raise ConfigError(f"oampnet.csi must be 'ce' or 'true', got {self.net.csi!r}")
        return self

    def with_overrides(self, snr=None, seed=None, receivers=None, frames_cap=None) -> "SimConfig":
        sweep = self.sweep
        if snr is not None:
            sweep = replace(sweep, snr_db=tuple(snr))
        if seed is not None:
            sweep = replace(sweep, seed=seed)
        if receivers is not None:
            sweep = replace(sweep, receivers=tuple(receivers))
        if frames_cap is not None:
            sweep = replace(sweep, frames_cap=frames_cap)
        return replace(self, sweep=sweep).validate()


def parse_list(text: str, cast=str) -> tuple:
    return tuple(cast(t.strip()) for t in text.split(",") if t.strip())


def _get(cp, section, key, cast, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key).strip()
    if raw == "" and cast is not str:
        return default
    try:
        if cast is bool:
            return cp.getboolean(section, key)
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _optional_int(raw: str):
    return int(raw) if raw.strip() else None


def load_config(path=None) -> SimConfig:
    """Read a config file; ``None`` returns the defaults."""
    if path is None:
        return SimConfig().validate()
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with path.open(encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    known = {"link", "channel", "oamp", "ce", "oampnet", "sweep"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown config section(s) in {path}: {', '.join(sorted(extra))}")

    d = SimConfig()
    sc, oc, ce, nt, sw = d.scenario, d.oamp, d.ce, d.net.train, d.sweep
    kind = _get(cp, "channel", "kind", str, "rayleigh")
    taps = _get(cp, "channel", "taps", int, sc.pdp.L)
    decay = _get(cp, "channel", "decay", float, 2.0)
    if kind == "rayleigh":
        pdp, fading = exp_pdp(taps, decay), True
    elif kind == "awgn":
        pdp, fading = flat_profile(), False
    else:
        raise ConfigError(f"[channel] kind must be rayleigh or awgn, got {kind!r}")
    constellation = Constellation(_get(cp, "link", "qam", int, sc.constellation.M))
    scenario = Scenario(
        N=_get(cp, "link", "N", int, sc.N),
        constellation=constellation,
        pdp=pdp,
        fading=fading,
        pilot_isi=_get(cp, "link", "pilot_isi", bool, sc.pilot_isi),
        receiver_taps=_get(cp, "channel", "receiver_taps", _optional_int, None),
        snr_mode=_get(cp, "link", "snr_mode", str, sc.snr_mode),
    )
    oamp = OampConfig(
        iterations=_get(cp, "oamp", "iterations", int, oc.iterations),
        beta=_get(cp, "oamp", "beta", float, oc.beta),
        epsilon=_get(cp, "oamp", "epsilon", float, oc.epsilon),
        constellation=constellation,
        v_sq_init=_get(cp, "oamp", "v_sq_init", float, oc.v_sq_init),
    )
    ce_s = CeSettings(
        train_snr_db=_get(cp, "ce", "train_snr_db", lambda t: parse_list(t, float), ce.train_snr_db),
        samples=_get(cp, "ce", "samples", int, ce.samples),
        val_samples=_get(cp, "ce", "val_samples", int, ce.val_samples),
        batch_size=_get(cp, "ce", "batch_size", int, ce.batch_size),
        epochs=_get(cp, "ce", "epochs", int, ce.epochs),
        lr=_get(cp, "ce", "lr", float, ce.lr),
        seed=_get(cp, "ce", "seed", int, ce.seed),
        checkpoint=_get(cp, "ce", "checkpoint", str, ce.checkpoint),
    )
    train = NetTrainConfig(
        epochs=_get(cp, "oampnet", "epochs", int, nt.epochs),
        batch_size=_get(cp, "oampnet", "batch_size", int, nt.batch_size),
        dev_size=_get(cp, "oampnet", "dev_size", int, nt.dev_size),
        lr=_get(cp, "oampnet", "lr", float, nt.lr),
        fd_step=_get(cp, "oampnet", "fd_step", float, nt.fd_step),
        snr_db=_get(cp, "oampnet", "train_snr_db", float, nt.snr_db),
        seed=_get(cp, "oampnet", "seed", int, nt.seed),
        eval_every=_get(cp, "oampnet", "eval_every", int, nt.eval_every),
        patience=_get(cp, "oampnet", "patience", _optional_int, nt.patience),
    )
    net = NetSettings(
        train=train,
        csi=_get(cp, "oampnet", "csi", str, d.net.csi),
        checkpoint=_get(cp, "oampnet", "checkpoint", str, d.net.checkpoint),
        history=_get(cp, "oampnet", "history", str, d.net.history),
    )
    sweep = SweepSettings(
        receivers=_get(cp, "sweep", "receivers", parse_list, sw.receivers),
        snr_db=_get(cp, "sweep", "snr_db", lambda t: parse_list(t, float), sw.snr_db),
        target_errors=_get(cp, "sweep", "target_errors", int, sw.target_errors),
        frames_cap=_get(cp, "sweep", "frames_cap", int, sw.frames_cap),
        block_size=_get(cp, "sweep", "block_size", int, sw.block_size),
        seed=_get(cp, "sweep", "seed", int, sw.seed),
        timing=_get(cp, "sweep", "timing", bool, sw.timing),
        out=_get(cp, "sweep", "out", str, sw.out),
        figure=cp.get("sweep", "figure", fallback=sw.figure).strip(),
        trajectory=cp.get("sweep", "trajectory", fallback=sw.trajectory).strip(),
    )
    try:
        return SimConfig(scenario, oamp, ce_s, net, sweep).validate()
    except ValueError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from None
