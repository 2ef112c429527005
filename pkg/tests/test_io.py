import json
import math

import numpy as np
import pytest

from dloamp.ce_net import CeNetParams
from dloamp.io import (CSV_HEADER, BerRecord, CheckpointError, emit_csv, load_ce, load_oampnet, read_csv, save_ce,
                       save_oampnet, write_history_csv)
from dloamp.oamp_net import OampNetParams


def test_ber_record_invariants():
    r = BerRecord("oamp", 10.0, bits_sent=3000, bit_errors=7, frames=3, seed=1)
    assert r.ber == 7 / 3000
    with pytest.raises(ValueError):
        BerRecord("oamp", 10.0, bits_sent=0, bit_errors=0, frames=0, seed=1)


def test_empty_csv_is_header_only(tmp_path):
    emit_csv([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_bytes() == (",".join(CSV_HEADER) + "\n").encode()


def test_csv_round_trip_and_format(tmp_path):
    recs = [BerRecord("dl-oamp", 20.0, 256_000, 4321, 1000, 7),
            BerRecord("ml-cp-csi", 12.5, 3, 1, 1, 7, wall_seconds=0.125),
            BerRecord("mmse-cp", -3.0, 10**7, 1, 39_063, 7)]
    path = tmp_path / "b.csv"
    emit_csv(recs, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "receiver,snr_db,bits_sent,bit_errors,ber,frames,wall_seconds,seed"
    assert lines[2].split(",")[4] == repr(1 / 3)
    assert len(lines[1].split(",")[4].replace("0.", "").lstrip("0")) >= 6
    back = read_csv(path)
    assert [(b.receiver, b.snr_db, b.bits_sent, b.bit_errors, b.frames, b.seed) for b in back] == \
        [(r.receiver, r.snr_db, r.bits_sent, r.bit_errors, r.frames, r.seed) for r in recs]
    assert [b.ber for b in back] == [r.ber for r in recs]
    assert math.isnan(back[0].wall_seconds) and back[1].wall_seconds == 0.125
    assert back[1] == recs[1]


def test_csv_bad_header(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n")
    with pytest.raises(ValueError):
        read_csv(tmp_path / "x.csv")


def test_checkpoint_round_trip_bit_exact(tmp_path, rng):
    W = rng.standard_normal((16, 16)) * 10.0 ** rng.integers(-12, 12, (16, 16))
    ce = CeNetParams(W, epoch=4, loss_history=[{"epoch": 1, "train_loss": 0.5, "val_loss": float("nan")}],
                     init_snr_db=20.0)
    save_ce(ce, tmp_path / "ce.json")
    back = load_ce(tmp_path / "ce.json", N=8)
    assert back.W.tobytes() == ce.W.tobytes()
    assert back.epoch == 4 and back.init_snr_db == 20.0
    assert back.loss_history[0]["val_loss"] is None
    net = OampNetParams(rng.random(10) * 1e-3 + 1 / 3, rng.random(10) + np.pi)
    save_oampnet(net, tmp_path / "n.json", train_snr_db=20.0, seed=5, best_epoch=3)
    nb = load_oampnet(tmp_path / "n.json", L=10)
    assert nb.lambdas.tobytes() == net.lambdas.tobytes() and nb.gammas.tobytes() == net.gammas.tobytes()
    assert json.loads((tmp_path / "n.json").read_text())["best_epoch"] == 3


def test_dimension_mismatch(tmp_path):
    save_ce(CeNetParams(np.eye(64)), tmp_path / "ce32.json")
    with pytest.raises(CheckpointError, match="N = 32"):
        load_ce(tmp_path / "ce32.json", N=64)
    save_oampnet(OampNetParams.ones(5), tmp_path / "n5.json")
    with pytest.raises(CheckpointError, match="5 layers"):
        load_oampnet(tmp_path / "n5.json", L=10)


def test_truncated_reports_byte_offset(tmp_path):
    save_ce(CeNetParams(np.eye(8)), tmp_path / "ce.json")
    raw = (tmp_path / "ce.json").read_bytes()
    (tmp_path / "cut.json").write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CheckpointError, match=r"byte offset \d+") as exc:
        load_ce(tmp_path / "cut.json")
    offset = int(str(exc.value).rsplit(" ", 1)[-1])
    assert 0 < offset <= len(raw) // 2


@pytest.mark.parametrize("payload,match", [
    ({"format": "dloamp-ce-net", "version": 99}, "version"),
    ({"format": "something-else", "version": 1}, "not a"),
    ({"format": "dloamp-ce-net", "version": 1, "N": 2, "W": [1.0, 2.0], "epoch": 0}, "weight count"),
    ({"format": "dloamp-ce-net", "version": 1, "N": 1}, "malformed"),
])
def test_corrupt_payloads(tmp_path, payload, match):
    (tmp_path / "c.json").write_text(json.dumps(payload))
    with pytest.raises(CheckpointError, match=match):
        load_ce(tmp_path / "c.json")


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError, match="cannot read"):
        load_oampnet(tmp_path / "nope.json")


def test_history_csv(tmp_path):
    write_history_csv([{"epoch": 0, "train_loss": float("nan"), "dev_loss": 2.0, "dev_ber": 0.1},
                       {"epoch": 1, "train_loss": 1.5, "dev_loss": float("nan"), "dev_ber": float("nan")}],
                      tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text() == "epoch,train_loss,dev_loss,dev_ber\n0,,2.0,0.1\n1,1.5,,\n"
