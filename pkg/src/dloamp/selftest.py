"""Fast invariant checks run by ``dloamp selftest``."""

import tempfile
from pathlib import Path

import numpy as np

from .ce_net import CeNetParams, ce_grad, ce_loss
from .channel import draw_taps, exp_pdp, freq_response
from .io import load_ce, load_oampnet, save_ce, save_oampnet
from .link import Constellation, build_cutoff_A, build_cyclic_H, make_frame, qam_hard_demod, qam_modulate, transmit_cp_free
from .numerics import dft_matrix, fft_unitary, ifft_unitary
from .oamp import OampConfig, build_detection_model, oamp_detect, posterior_mean
from .oamp_net import OampNetParams, fd_gradient, net_forward


def _fft():
    x = np.random.default_rng(1).standard_normal((3, 64)) + 1j
    a = fft_unitary(x, method="radix2")
    b = fft_unitary(x, method="direct")
    back = ifft_unitary(a)
    return max(np.abs(a - b).max(), np.abs(back - x).max()) < 1e-10


def _diagonalisation():
    worst = 0.0
    for i, (N, L) in enumerate([(8, 1), (8, 4), (64, 8)]):
        taps = draw_taps(exp_pdp(L, 2.0), i).taps
        F = dft_matrix(N)
        H = build_cyclic_H(taps, N)
        D = F @ H @ F.conj().T
        worst = max(worst, np.linalg.norm(D - np.diag(freq_response(taps, N))))
        T = H - build_cutoff_A(taps, N)
        ref = np.zeros((N, N), complex)
        for r in range(N):
            for c in range(max(0, r - L + 1), r + 1):
                ref[r, c] = taps[r - c]
        worst = max(worst, np.abs(T - ref).max())
    return worst < 1e-10


def _denoiser():
    tau = np.array([0.05, 0.5, 2.0])
    r = np.broadcast_to(np.linspace(-3, 3, 41), (3, 41))
    pm = posterior_mean(r, tau, np.array([-1.0, 1.0]))
    return np.abs(pm - np.tanh(r / tau[:, None])).max() < 1e-12


def _gray():
    for M in (4, 16, 64):
        c = Constellation(M)
        pts = c.points
        d = np.abs(pts[:, None] - pts[None, :])
        dmin = d[d > 0].min()
        for a, b in zip(*np.nonzero(np.isclose(d, dmin))):
            if bin(a ^ b).count("1") != 1:
                return False
        bits = np.random.default_rng(M).integers(0, 2, (5, 8 * c.bits_per_symbol))
        if not np.array_equal(qam_hard_demod(qam_modulate(bits, c), c), bits):
            return False
    return True


def _reduction():
    pdp, N, cfg = exp_pdp(4, 2.0), 16, OampConfig(iterations=5)
    taps = np.stack([draw_taps(pdp, s).taps for s in range(4)])
    frame = make_frame(cfg.constellation, N, 3, batch=(4,))
    rx = transmit_cp_free(frame, taps, 20.0, 4)
    model = build_detection_model(rx.y_data, taps, rx.noise_var)
    ref, _ = oamp_detect(model, cfg)
    fast = net_forward(model, OampNetParams.ones(5), cfg)
    return np.abs(ref - fast).max() < 1e-10


def _ce_gradient():
    rng = np.random.default_rng(5)
    W, X, T = rng.standard_normal((8, 8)), rng.standard_normal((20, 8)), rng.standard_normal((20, 8))
    g = ce_grad(W, X, T)
    fd = fd_gradient(lambda w: ce_loss(w.reshape(8, 8), X, T), W.ravel(), 1e-5).reshape(8, 8)
    return np.linalg.norm(g - fd) / np.linalg.norm(g) < 1e-5


def _checkpoints():
    with tempfile.TemporaryDirectory() as d:
        ce = CeNetParams(np.random.default_rng(2).standard_normal((16, 16)) / 3)
        net = OampNetParams(np.random.default_rng(3).random(4) + 0.5, np.random.default_rng(4).random(4))
        save_ce(ce, Path(d) / "ce.json")
        save_oampnet(net, Path(d) / "net.json")
        ce2, net2 = load_ce(Path(d) / "ce.json", N=8), load_oampnet(Path(d) / "net.json", L=4)
    return (np.array_equal(ce.W, ce2.W) and np.array_equal(net.lambdas, net2.lambdas)
            and np.array_equal(net.gammas, net2.gammas))


CHECKS = {
    "fft round trip": _fft,
    "circulant diagonalisation": _diagonalisation,
    "binary denoiser is tanh": _denoiser,
    "gray labelling": _gray,
    "unit OAMP-Net equals OAMP": _reduction,
    "CE-Net gradient": _ce_gradient,
    "checkpoint round trip": _checkpoints,
}


def run_selftest(echo=print) -> bool:
    ok = True
    for name, fn in CHECKS.items():
        try:
            passed = bool(fn())
        except Exception as exc:  # a crash is a failed check
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        echo(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= passed
    return ok
