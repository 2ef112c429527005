import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import crandn
from dloamp.channel import draw_taps, exp_pdp, freq_response
from dloamp.link import (Constellation, build_cutoff_A, build_cyclic_H, cp_free_receive, make_frame, pilot_symbols,
                         qam_hard_demod, qam_hard_symbols, qam_modulate, signal_power, snr_to_noise_var,
                         transmit_cp_free)
from dloamp.numerics import fft_unitary, ifft_unitary

QPSK, QAM16, QAM64 = Constellation(4), Constellation(16), Constellation(64)


def test_qpsk_gray_map():
    bits = np.array([0, 0, 0, 1, 1, 1, 1, 0])
    expect = np.array([-1 - 1j, -1 + 1j, 1 + 1j, 1 - 1j]) / np.sqrt(2)
    np.testing.assert_allclose(qam_modulate(bits, QPSK), expect, atol=1e-15)


@pytest.mark.parametrize("c", [QPSK, QAM16, QAM64])
def test_unit_energy_and_round_trip(c):
    assert abs(np.mean(np.abs(c.points) ** 2) - 1) < 1e-14
    np.testing.assert_array_equal(qam_hard_demod(c.points, c), c.labels.ravel())
    # Gray property: nearest neighbours differ in exactly one bit
    d = np.abs(c.points[:, None] - c.points[None])
    for a, b in np.argwhere(np.isclose(d, d[d > 1e-9].min())):
        assert bin(int(a) ^ int(b)).count("1") == 1


def test_16qam_levels():
    # (2/sqrt(M)) * sum(a^2) = 1 with a in {-3,-1,1,3}*s gives s = 1/sqrt(10)
    s = np.sqrt(1 / (2 / 4 * (9 + 1 + 1 + 9)))
    np.testing.assert_allclose(QAM16.alphabet, np.array([-3, -1, 1, 3]) * s, rtol=1e-15)
    np.testing.assert_allclose(QAM16.alphabet, np.array([-3, -1, 1, 3]) / np.sqrt(10), rtol=1e-15)


def test_unsupported_order():
    with pytest.raises(ValueError):
        Constellation(8)
    with pytest.raises(ValueError):
        qam_modulate(np.zeros(3), QAM16)


def test_perturbation_keeps_bits(rng):
    pts = QAM16.points + 1e-6 * np.exp(2j * np.pi * rng.random(16))
    np.testing.assert_array_equal(qam_hard_demod(pts, QAM16), QAM16.labels.ravel())


def test_midpoint_goes_to_lower_index():
    pts = QAM16.points
    d = np.abs(pts[:, None] - pts[None])
    dmin = d[d > 1e-9].min()
    pairs = [(a, b) for a, b in np.argwhere(np.isclose(d, dmin)) if a < b]
    assert len(pairs) == 24
    for a, b in pairs:
        mid = (pts[a] + pts[b]) / 2
        np.testing.assert_array_equal(qam_hard_demod(np.array([mid]), QAM16), QAM16.labels[a])
        assert qam_hard_symbols(np.array([mid]), QAM16)[0] == pts[a]


@pytest.mark.parametrize("c", [QPSK, QAM16, QAM64])
def test_random_bits_round_trip(c, rng):
    bits = rng.integers(0, 2, (7, 32 * c.bits_per_symbol))
    np.testing.assert_array_equal(qam_hard_demod(qam_modulate(bits, c), c), bits)


def test_cyclic_H_examples():
    h0, h1 = 0.7 + 0.1j, -0.2 + 0.4j
    H = build_cyclic_H(np.array([h0, h1]), 4)
    np.testing.assert_array_equal(H[0], [h0, 0, 0, h1])
    np.testing.assert_array_equal(build_cyclic_H(np.array([h0]), 5), h0 * np.eye(5))
    A = build_cutoff_A(np.array([h0, h1]), 4)
    expect = np.zeros((4, 4), complex)
    expect[0, 3] = h1
    np.testing.assert_array_equal(A, expect)
    np.testing.assert_array_equal(build_cutoff_A(np.array([h0]), 6), np.zeros((6, 6)))


def test_cyclic_H_is_circulant_and_convolves(rng):
    h = crandn(rng, 5)
    N = 12
    H = build_cyclic_H(h, N)
    for r in range(1, N):
        np.testing.assert_array_equal(H[r], np.roll(H[r - 1], 1))
    x = crandn(rng, N)
    cyc = np.array([sum(h[l] * x[(n - l) % N] for l in range(5)) for n in range(N)])
    np.testing.assert_allclose(H @ x, cyc, atol=1e-12)


def test_H_minus_A_is_truncated_linear_convolution(rng):
    h, N = crandn(rng, 4), 10
    T = build_cyclic_H(h, N) - build_cutoff_A(h, N)
    for r in range(N):
        for c in range(N):
            assert T[r, c] == (h[r - c] if 0 <= r - c <= 3 else 0)
    x = crandn(rng, N)
    np.testing.assert_allclose(T @ x, np.convolve(x, h)[:N], atol=1e-12)


def test_cp_free_matches_stream_convolution(rng):
    N, L = 8, 3
    h = draw_taps(exp_pdp(L, 1.0), 1).taps
    frame = make_frame(QAM16, N, 2)
    q_prev = ifft_unitary(qam_modulate(rng.integers(0, 2, 4 * N), QAM16))
    rx = transmit_cp_free(frame, h, 20.0, 0, q_prev=q_prev, noise=False)
    stream = np.concatenate([q_prev, frame.q_pilot, frame.q_data])
    full = np.array([sum(h[l] * stream[n - l] for l in range(L) if n - l >= 0) for n in range(3 * N)])
    np.testing.assert_allclose(rx.y_pilot, full[N:2 * N], atol=1e-12)
    np.testing.assert_allclose(rx.y_data, full[2 * N:], atol=1e-12)
    H, A = build_cyclic_H(h, N), build_cutoff_A(h, N)
    np.testing.assert_allclose(rx.y_data, (H - A) @ frame.q_data + A @ frame.q_pilot, atol=1e-12)
    np.testing.assert_array_equal(rx.q_prev_data, frame.q_pilot)


def test_single_tap_is_isi_free():
    h0 = 0.3 - 0.8j
    frame = make_frame(QAM16, 16, 5)
    rx = transmit_cp_free(frame, np.array([h0]), 30.0, 0, noise=False)
    np.testing.assert_allclose(rx.y_data, h0 * ifft_unitary(frame.u_data), atol=1e-14)
    np.testing.assert_allclose(fft_unitary(rx.y_data), h0 * frame.u_data, atol=1e-12)


def test_transmit_deterministic_and_batched():
    pdp = exp_pdp(4, 2.0)
    taps = np.stack([draw_taps(pdp, s).taps for s in range(3)])
    frame = make_frame(QAM16, 16, 9, batch=(3,))
    a = transmit_cp_free(frame, taps, 10.0, 42)
    b = transmit_cp_free(frame, taps, 10.0, 42)
    c = transmit_cp_free(frame, taps, 10.0, 43)
    np.testing.assert_array_equal(a.y_data, b.y_data)
    np.testing.assert_array_equal(a.y_pilot, b.y_pilot)
    assert not np.array_equal(a.y_data, c.y_data)
    assert a.noise_var.shape == (3,)
    with pytest.raises(ValueError):
        transmit_cp_free(frame, taps[:2], 10.0, 0)
    with pytest.raises(ValueError):
        transmit_cp_free(make_frame(QAM16, 2, 0), taps[0], 10.0, 0)


def test_noise_variance_is_as_requested():
    h = draw_taps(exp_pdp(4, 2.0), 3).taps
    frame = make_frame(QAM16, 32, 1, batch=(4000,))
    clean = transmit_cp_free(frame, h, 5.0, 0, noise=False)
    noisy = transmit_cp_free(frame, h, 5.0, 7)
    w = noisy.y_data - clean.y_data
    assert abs(np.mean(np.abs(w) ** 2) / noisy.noise_var - 1) < 0.02


def test_snr_examples():
    frame = make_frame(QPSK, 16, 0)
    flat = np.array([1.0 + 0j])
    for mode in ("ensemble", "frame"):
        s_bar = snr_to_noise_var(flat, frame, 0.0, mode=mode)
        np.testing.assert_allclose(s_bar, 1.0, rtol=1e-12)
        np.testing.assert_allclose(snr_to_noise_var(flat, frame, 10.0, mode=mode), s_bar / 10, rtol=1e-12)
        np.testing.assert_allclose(snr_to_noise_var(flat, frame, 7.0, mode=mode), 10 ** -0.7, rtol=1e-12)
    h = draw_taps(exp_pdp(3, 1.0), 0).taps
    np.testing.assert_allclose(snr_to_noise_var(h, frame, 0.0), signal_power(h, 16), rtol=1e-15)
    with pytest.raises(ValueError):
        snr_to_noise_var(h, frame, np.inf)
    with pytest.raises(ValueError):
        snr_to_noise_var(h, frame, 1.0, mode="bogus")


def test_ensemble_signal_power_monte_carlo():
    # reach formula equals the symbol-ensemble average of |(H - A) q|^2 / N
    h, N = draw_taps(exp_pdp(5, 2.0), 8).taps, 16
    frame = make_frame(QAM16, N, 4, batch=(20000,))
    s = cp_free_receive(frame.q_data, np.zeros(N), h)
    assert abs(np.mean(np.abs(s) ** 2) / signal_power(h, N) - 1) < 0.02
    T = build_cyclic_H(h, N) - build_cutoff_A(h, N)
    np.testing.assert_allclose(signal_power(h, N), np.sum(np.abs(T) ** 2) / N, rtol=1e-12)
    np.testing.assert_allclose(signal_power(h, N, cp=True), np.sum(np.abs(h) ** 2), rtol=1e-12)


def test_pilot_is_fixed_qpsk():
    b1, p1 = pilot_symbols(32)
    b2, p2 = pilot_symbols(32)
    np.testing.assert_array_equal(p1, p2)
    np.testing.assert_allclose(np.abs(p1), 1.0)
    f1, f2 = make_frame(QAM16, 32, 1), make_frame(QAM16, 32, 2)
    np.testing.assert_array_equal(f1.u_pilot, f2.u_pilot)
    assert not np.array_equal(f1.u_data, f2.u_data)


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_frequency_domain_model_with_cyclic_input(L, seed):
    # a circulant channel is diagonal in frequency for any symbol
    rng = np.random.default_rng(seed)
    h, N = crandn(rng, L), 8
    x = crandn(rng, N)
    np.testing.assert_allclose(fft_unitary(build_cyclic_H(h, N) @ ifft_unitary(x)), freq_response(h, N) * x,
                               atol=1e-10)
