"""Monte Carlo BER sweep over SNR for a list of receivers.

Frames are simulated in blocks. Block ``k`` at a given SNR is seeded from
``(master seed, SNR, k)`` only, so every receiver sees the same frames and
a receiver's result does not depend on which other receivers run with it.
Each receiver stops on its own once it reaches the error target or the
frame cap.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import SimConfig
from .io import BerRecord
from .numerics import unstack_vec
from .oamp import oamp_detect
from .receivers import NEEDS_CE, NEEDS_NET, RECEIVERS, ReceiverContext, ce_model, run_receiver, simulate_block


class MissingCheckpointError(RuntimeError):
    pass


def snr_key(snr_db: float) -> int:
    # millidecibels keep the seed stable under float formatting
    return int(round(float(snr_db) * 1000)) & 0xFFFFFFFF


def block_seed(master: int, snr_db: float, block: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master) & 0xFFFFFFFF, snr_key(snr_db), int(block)])


def _check_receivers(names, ce_params, net_params):
    unknown = [r for r in names if r not in RECEIVERS]
    if unknown:
        raise ValueError(f"unknown receiver(s): {', '.join(unknown)}")
    if ce_params is None and any(r in NEEDS_CE for r in names):
        need = sorted(set(names) & NEEDS_CE)
        raise MissingCheckpointError(f"CE-Net checkpoint required for: {', '.join(need)}")
    if net_params is None and any(r in NEEDS_NET for r in names):
        raise MissingCheckpointError("OAMP-Net checkpoint required for: dl-oamp")


def _eval_block(cfg, ctx, snr, k, n, names, timing):
    blk = simulate_block(cfg.scenario, snr, block_seed(cfg.sweep.seed, snr, k), n)
    out = {}
    for name in names:
        t0 = time.perf_counter() if timing else 0.0
        bits = run_receiver(name, blk, ctx)
        errs = int(np.count_nonzero(bits != blk.frame.data_bits))
        out[name] = (errs, int(blk.frame.data_bits.size), time.perf_counter() - t0 if timing else 0.0)
    return out


def _trajectory_lines(cfg, ctx, snr):
    """Classic OAMP iterations on the first frame of the first block."""
    blk = simulate_block(cfg.scenario, snr, block_seed(cfg.sweep.seed, snr, 0), 1)
    model = ce_model(blk, ctx) if ctx.ce_params is not None else None
    if model is None:
        return []
    _, traj = oamp_detect(model, ctx.oamp_cfg)
    u_true = blk.frame.u_data[0]
    lines = []
    for i, st in enumerate(traj):
        err = unstack_vec(st.u_hat[0]) - u_true
        lines.append({"snr_db": float(snr), "frame": 0, "iteration": i + 1,
                      "v_sq": float(st.v_sq[0]), "v_sq_smoothed": float(st.v_sq_smoothed[0]),
                      "tau_sq": float(st.tau_sq[0]), "symbol_mse": float(np.mean(np.abs(err) ** 2))})
    return lines


def run_ber_sweep(cfg: SimConfig, ce_params=None, net_params=None, workers: int = 1,
                  trajectory_path=None, progress=None) -> list[BerRecord]:
    """Simulate every (receiver, SNR) pair; records come out SNR-major in config order.

    ``workers > 1`` evaluates several blocks concurrently. Blocks are
    merged in index order, so results do not depend on ``workers``.
    """
    sw = cfg.sweep
    names = list(dict.fromkeys(sw.receivers))
    _check_receivers(names, ce_params, net_params)
    if workers < 1:
        raise ValueError("workers must be positive")
    ctx = ReceiverContext(cfg.scenario, ce_params=ce_params, net_params=net_params, oamp_cfg=cfg.oamp)

    records = []
    traj_lines = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for snr in sw.snr_db:
            tally = {r: [0, 0, 0, 0.0] for r in names}   # errors, bits, frames, seconds
            active = list(names)
            k = 0
            while active:
                frames_done = min(tally[r][2] for r in active)
                wave = []
                for j in range(workers):
                    start = frames_done + j * sw.block_size
                    if start >= sw.frames_cap:
                        break
                    wave.append((k + j, min(sw.block_size, sw.frames_cap - start)))
                args = [(cfg, ctx, snr, kk, n, tuple(active), sw.timing) for kk, n in wave]
                if pool is None:
                    results = [_eval_block(*a) for a in args]
                else:
                    results = list(pool.map(lambda a: _eval_block(*a), args))
                k += len(wave)
                for (_, n), res in zip(wave, results):
                    for r in list(active):
                        t = tally[r]
                        e, b, s = res[r]
                        t[0] += e
                        t[1] += b
                        t[2] += n
                        t[3] += s
                        if t[0] >= sw.target_errors or t[2] >= sw.frames_cap:
                            active.remove(r)
                if progress is not None:
                    progress(snr, k, {r: tuple(tally[r][:3]) for r in names})
            for r in names:
                e, b, f, s = tally[r]
                records.append(BerRecord(receiver=r, snr_db=float(snr), bits_sent=b, bit_errors=e,
                                         frames=f, seed=sw.seed,
                                         wall_seconds=s if sw.timing else math.nan,
                                         target_reached=e >= sw.target_errors))
            if trajectory_path is not None:
                traj_lines.extend(_trajectory_lines(cfg, ctx, snr))
    finally:
        if pool is not None:
            pool.shutdown()

    if trajectory_path is not None:
        path = Path(trajectory_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for line in traj_lines:
                fh.write(json.dumps(line) + "\n")
    return records
