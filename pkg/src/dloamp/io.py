"""Checkpoint files, BER records and their CSV form.

Checkpoints are JSON. Floats are written with Python's shortest
round-trip ``repr``, so save/load reproduces parameters bit for bit.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ce_net import CeNetParams
from .oamp_net import OampNetParams

CHECKPOINT_VERSION = 1
CSV_HEADER = ("receiver", "snr_db", "bits_sent", "bit_errors", "ber", "frames", "wall_seconds", "seed")


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class BerRecord:
    receiver: str
    snr_db: float
    bits_sent: int
    bit_errors: int
    frames: int
    seed: int
    wall_seconds: float = math.nan
    # not part of the CSV schema; None when read back from a file
    target_reached: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.bits_sent <= 0:
            raise ValueError("a BER record needs at least one bit")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_sent


def _clean(x):
    # JSON has no NaN; missing values become null
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        return _clean(x.item())
    return x


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(payload), indent=1) + "\n", encoding="utf-8", newline="\n")


def _read_json(path, kind):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise CheckpointError(f"corrupt checkpoint {path}: {exc.msg} at byte offset {offset}") from None
    if not isinstance(data, dict) or data.get("format") != kind:
        raise CheckpointError(f"{path} is not a {kind} checkpoint")
    if data.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {data.get('version')!r}")
    return data


def save_ce(params: CeNetParams, path) -> None:
    _write_json(path, {
        "format": "dloamp-ce-net",
        "version": CHECKPOINT_VERSION,
        "N": params.N,
        "init_snr_db": params.init_snr_db,
        "epoch": params.epoch,
        "W": params.W.ravel().tolist(),
        "loss_history": params.loss_history,
    })


def load_ce(path, N: int | None = None) -> CeNetParams:
    d = _read_json(path, "dloamp-ce-net")
    try:
        n = int(d["N"])
        W = np.array(d["W"], dtype=float)
        if W.size != 4 * n * n:
            raise CheckpointError(f"{path}: weight count {W.size} does not match N = {n}")
        params = CeNetParams(W.reshape(2 * n, 2 * n), epoch=int(d["epoch"]),
                             loss_history=list(d.get("loss_history", [])),
                             init_snr_db=d.get("init_snr_db"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed CE-Net checkpoint ({exc})") from None
    if N is not None and params.N != N:
        raise CheckpointError(f"{path}: checkpoint is for N = {params.N}, run uses N = {N}")
    return params


def save_oampnet(params: OampNetParams, path, *, train_snr_db=None, seed=None, **meta) -> None:
    _write_json(path, {
        "format": "dloamp-oamp-net",
        "version": CHECKPOINT_VERSION,
        "L": params.L,
        "lambdas": params.lambdas.tolist(),
        "gammas": params.gammas.tolist(),
        "train_snr_db": train_snr_db,
        "seed": seed,
        **meta,
    })


def load_oampnet(path, L: int | None = None) -> OampNetParams:
    d = _read_json(path, "dloamp-oamp-net")
    try:
        params = OampNetParams(d["lambdas"], d["gammas"])
        if params.L != int(d["L"]):
            raise CheckpointError(f"{path}: layer count {d['L']} does not match parameter lists")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed OAMP-Net checkpoint ({exc})") from None
    if L is not None and params.L != L:
        raise CheckpointError(f"{path}: checkpoint has {params.L} layers, run uses {L}")
    return params


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_csv(records, path) -> None:
    """Write BER records; BER and SNR use round-trip float formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([r.receiver, _fmt(r.snr_db), r.bits_sent, r.bit_errors, _fmt(r.ber),
                        r.frames, _fmt(r.wall_seconds), r.seed])


def read_csv(path) -> list[BerRecord]:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected CSV header")
    out = []
    for row in rows[1:]:
        rec = dict(zip(CSV_HEADER, row))
        out.append(BerRecord(receiver=rec["receiver"], snr_db=float(rec["snr_db"]),
                             bits_sent=int(rec["bits_sent"]), bit_errors=int(rec["bit_errors"]),
                             frames=int(rec["frames"]), seed=int(rec["seed"]),
                             wall_seconds=float(rec["wall_seconds"])))
    return out


def write_history_csv(history, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "dev_loss", "dev_ber"])
        for h in history:
            w.writerow([h["epoch"]] + ["" if not math.isfinite(h[k]) else repr(float(h[k]))
                                       for k in ("train_loss", "dev_loss", "dev_ber")])
