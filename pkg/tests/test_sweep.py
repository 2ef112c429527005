import dataclasses
import json

import numpy as np
import pytest

from dloamp.channel import exp_pdp, freq_response
from dloamp.config import SimConfig, SweepSettings
from dloamp.io import emit_csv
from dloamp.link import Constellation
from dloamp.receivers import (RECEIVERS, ReceiverContext, Scenario, oampnet_batch_maker, run_receiver,
                              simulate_block)
from dloamp.sweep import MissingCheckpointError, block_seed, run_ber_sweep


def small_cfg(small_run, **sweep):
    cfg = small_run["cfg"]
    return dataclasses.replace(cfg, sweep=dataclasses.replace(cfg.sweep, **sweep)).validate()


def test_zero_errors_at_sentinel_snr(small_run):
    cfg = small_cfg(small_run, receivers=("ml-cp-csi", "mmse-cp-csi"), snr_db=(200.0,), frames_cap=200)
    recs = run_ber_sweep(cfg)
    assert [r.bit_errors for r in recs] == [0, 0]
    assert all(r.frames == 200 and r.bits_sent == 200 * 16 * 2 for r in recs)
    assert not any(r.target_reached for r in recs)


def test_rerun_bit_identical(small_run, tmp_path):
    cfg = small_cfg(small_run)
    a = run_ber_sweep(cfg, small_run["ce"], small_run["net"])
    b = run_ber_sweep(cfg, small_run["ce"], small_run["net"])
    emit_csv(a, tmp_path / "a.csv")
    emit_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_receiver_order_and_workers_do_not_matter(small_run):
    cfg = small_cfg(small_run)
    base = {(r.receiver, r.snr_db): r for r in run_ber_sweep(cfg, small_run["ce"], small_run["net"])}
    perm = small_cfg(small_run, receivers=tuple(reversed(cfg.sweep.receivers)))
    for r in run_ber_sweep(perm, small_run["ce"], small_run["net"], workers=3):
        assert r == base[(r.receiver, r.snr_db)]
    alone = small_cfg(small_run, receivers=("ls-mmse",))
    for r in run_ber_sweep(alone):
        assert r == base[(r.receiver, r.snr_db)]


def test_stopping_rules(small_run):
    cfg = small_cfg(small_run, receivers=("ls-mmse", "ml-cp-csi"), snr_db=(5.0,), target_errors=100,
                    frames_cap=10_000, block_size=10)
    recs = {r.receiver: r for r in run_ber_sweep(cfg)}
    for r in recs.values():
        assert r.target_reached and r.bit_errors >= 100
        # stops at the first block that reaches the target
        assert r.bit_errors - 100 < 10 * 16 * 2
    cap = small_cfg(small_run, receivers=("ml-cp-csi",), snr_db=(40.0,), frames_cap=125, block_size=50)
    (r,) = run_ber_sweep(cap)
    assert r.frames == 125 and not r.target_reached


def test_missing_checkpoints_and_bad_names(small_run):
    cfg = small_cfg(small_run, receivers=("dl-oamp",))
    with pytest.raises(MissingCheckpointError, match="CE-Net"):
        run_ber_sweep(cfg)
    with pytest.raises(MissingCheckpointError, match="OAMP-Net"):
        run_ber_sweep(cfg, small_run["ce"])
    with pytest.raises(ValueError, match="unknown receiver"):
        run_ber_sweep(dataclasses.replace(cfg, sweep=dataclasses.replace(cfg.sweep, receivers=("x",))))


def test_three_snrs_two_receivers(small_run):
    cfg = small_run["cfg"].with_overrides(receivers=["dl-oamp", "oamp"], snr=[10, 20, 30], frames_cap=50)
    recs = run_ber_sweep(cfg, small_run["ce"], small_run["net"])
    assert len(recs) == 6
    assert [(r.receiver, r.snr_db) for r in recs[:2]] == [("dl-oamp", 10.0), ("oamp", 10.0)]


def test_trajectory_dump(small_run, tmp_path):
    cfg = small_cfg(small_run, receivers=("oamp",), snr_db=(10.0, 20.0), frames_cap=50)
    run_ber_sweep(cfg, small_run["ce"], trajectory_path=tmp_path / "t.jsonl")
    lines = [json.loads(l) for l in (tmp_path / "t.jsonl").read_text().splitlines()]
    assert len(lines) == 2 * cfg.oamp.iterations
    assert lines[0]["iteration"] == 1 and lines[-1]["snr_db"] == 20.0
    assert all(l["tau_sq"] >= cfg.oamp.epsilon for l in lines)


def test_block_seeds_distinct():
    a = block_seed(1, 10.0, 0).generate_state(2)
    assert not np.array_equal(a, block_seed(1, 10.0, 1).generate_state(2))
    assert not np.array_equal(a, block_seed(1, 20.0, 0).generate_state(2))
    assert not np.array_equal(a, block_seed(2, 10.0, 0).generate_state(2))


def test_every_receiver_runs(small_run):
    scn = small_run["cfg"].scenario
    ctx = ReceiverContext(scn, small_run["ce"], small_run["net"], small_run["cfg"].oamp)
    blk = simulate_block(scn, 40.0, 1, 8)
    for name in RECEIVERS:
        bits = run_receiver(name, blk, ctx)
        assert bits.shape == blk.frame.data_bits.shape
        # one-tap CP-free receivers keep an ICI error floor
        floor = 0.25 if name in ("ls-mmse", "lmmse-mmse", "isi-cancel-mmse") else 0.05
        assert np.mean(bits != blk.frame.data_bits) < floor, name
    with pytest.raises(ValueError, match="unknown receiver"):
        run_receiver("nope", blk, ctx)
    with pytest.raises(ValueError):
        run_receiver("oamp", simulate_block(scn, 40.0, 2, 2), ReceiverContext(scn))


def test_batch_maker_modes(small_run):
    scn = small_run["cfg"].scenario
    model, u, bits = oampnet_batch_maker(scn, csi="true")(np.random.SeedSequence(0), 5, 20.0)
    assert model.H_r.shape == (5, 32, 32) and u.shape == (5, 32) and bits.shape == (5, 32)
    with pytest.raises(ValueError):
        oampnet_batch_maker(scn, csi="ce")
    with pytest.raises(ValueError):
        oampnet_batch_maker(scn, csi="maybe")


def test_noise_free_block_is_exact():
    scn = Scenario(N=16, constellation=Constellation(16), pdp=exp_pdp(4, 2.0))
    blk = simulate_block(scn, 20.0, 5, 3, noise=False)
    ctx = ReceiverContext(scn)
    from dloamp.receivers import front_end
    m = front_end(blk.rx, freq_response(blk.taps, 16), 4)
    from dloamp.numerics import stack_vec
    np.testing.assert_allclose(m.y_r, np.einsum("bij,bj->bi", m.H_r, stack_vec(blk.frame.u_data)), atol=1e-12)
