import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopcdma import sigmodel as sm
from oracles import eta_by_decomposition, matvec_loop, signature_matrix_loop, windows_by_decomposition


# --- codes and signature matrices

def test_random_code_is_unit_norm_pm_chips(rng):
    code = sm.random_code(rng, 16, user_id=3)
    assert code.N == 16 and code.user_id == 3
    assert np.allclose(np.abs(code.chips), 1 / 4)
    assert abs(np.linalg.norm(code.chips) - 1) < 1e-12


def test_signature_matrix_two_chip_example():
    C = sm.build_signature_matrix(np.array([1.0, -1.0]) / np.sqrt(2), 2)
    expect = np.array([[0.70710678, 0], [-0.70710678, 0.70710678], [0, -0.70710678]])
    assert np.allclose(C, expect, atol=1e-8)


def test_signature_matrix_default_dims(rng):
    assert sm.build_signature_matrix(sm.random_code(rng, 16), 5).shape == (20, 5)


def test_signature_matrix_single_path_is_code(rng):
    code = sm.random_code(rng, 8)
    assert np.array_equal(sm.build_signature_matrix(code, 1)[:, 0], code.chips)


@pytest.mark.parametrize("bad", [0, -1])
def test_signature_matrix_rejects_bad_L(rng, bad):
    with pytest.raises(ValueError):
        sm.build_signature_matrix(sm.random_code(rng, 4), bad)


def test_signature_matrix_rejects_empty_code():
    with pytest.raises(ValueError):
        sm.build_signature_matrix(np.array([]), 2)


@given(st.integers(1, 12), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_signature_band_structure(N, L, seed):
    chips = sm.random_code(np.random.default_rng(seed), N).chips
    C = sm.build_signature_matrix(chips, L)
    assert np.array_equal(C, signature_matrix_loop(chips, L))


# --- stacked signatures and effective signatures

def test_stacked_single_phase_is_C(rng):
    C = sm.build_signature_matrix(sm.random_code(rng, 16), 5)
    assert np.array_equal(sm.build_stacked_signature(C, 0), C)


def test_stacked_dims_and_blocks(rng):
    C = sm.build_signature_matrix(sm.random_code(rng, 16), 5)
    Cs = sm.build_stacked_signature(C, 2)
    assert Cs.shape == (60, 15)
    assert not np.any(Cs[20:40, 0:5])
    for j in range(3):
        assert np.array_equal(Cs[j * 20:(j + 1) * 20, j * 5:(j + 1) * 5], C)


def test_stacked_rejects_negative_relays(rng):
    with pytest.raises(ValueError):
        sm.build_stacked_signature(np.eye(2), -1)


def test_effective_signature_selector_and_zero(rng):
    Cs = sm.build_stacked_signature(sm.build_signature_matrix(sm.random_code(rng, 4), 2), 1)
    e1 = np.zeros(4)
    e1[0] = 1
    assert np.array_equal(sm.effective_signature(Cs, e1), Cs[:, 0])
    assert not np.any(sm.effective_signature(Cs, np.zeros(4)))


def test_effective_signature_matches_loop(rng):
    Cs = sm.build_stacked_signature(sm.build_signature_matrix(sm.random_code(rng, 4), 2), 1)
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.allclose(sm.effective_signature(Cs, h), matvec_loop(Cs, h), atol=1e-14)


def test_effective_signature_dimension_mismatch(rng):
    Cs = sm.build_stacked_signature(sm.build_signature_matrix(sm.random_code(rng, 4), 2), 1)
    with pytest.raises(ValueError):
        sm.effective_signature(Cs, np.ones(3))


# --- channels

@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_channel_unit_norm(L, seed):
    h = sm.generate_multipath_channel(np.random.default_rng(seed), L)
    assert h.shape == (L,)
    assert abs(np.linalg.norm(h) - 1) < 1e-12


def test_single_tap_channel_has_unit_magnitude_random_phase():
    phases = [np.angle(sm.generate_multipath_channel(np.random.default_rng(s), 1)[0]) for s in range(400)]
    mags = [abs(sm.generate_multipath_channel(np.random.default_rng(s), 1)[0]) for s in range(5)]
    assert np.allclose(mags, 1, atol=1e-12)
    # roughly uniform: every quadrant is populated
    counts = np.histogram(phases, bins=4, range=(-np.pi, np.pi))[0]
    assert counts.min() > 60


def test_channel_determinism():
    a = sm.generate_multipath_channel(np.random.default_rng(7), 5)
    b = sm.generate_multipath_channel(np.random.default_rng(7), 5)
    assert np.array_equal(a, b)


def test_channel_rejects_bad_L(rng):
    with pytest.raises(ValueError):
        sm.generate_multipath_channel(rng, 0)


# --- window synthesis

def test_single_path_noise_free_window_is_scaled_code(rng):
    code = sm.random_code(rng, 8)
    C = sm.build_signature_matrix(code, 1)
    b = np.full(5, (1 + 1j) / np.sqrt(2))
    W = sm.synthesize_link_windows(b, C, np.array([1.0]), 1.0, 0.0)
    assert np.allclose(W, b[:, None] * code.chips[None, :], atol=1e-15)


def test_zero_symbols_give_unit_variance_noise():
    C = sm.build_signature_matrix(sm.random_code(np.random.default_rng(0), 16), 5)
    h = sm.generate_multipath_channel(np.random.default_rng(1), 5)
    W = sm.synthesize_link_windows(np.zeros(2000), C, h, 1.0, 1.0, np.random.default_rng(2))
    # the first N samples of every window are distinct chip samples
    samples = W[:, :16].reshape(-1)
    assert samples.size >= 10_000
    assert abs(np.var(samples) - 1) < 0.05


def test_windows_match_decomposition_oracle(rng):
    code = sm.random_code(rng, 4)
    h = sm.generate_multipath_channel(rng, 3)
    b = sm.random_qpsk(rng, 3)
    W = sm.synthesize_link_windows(b, sm.build_signature_matrix(code, 3), h, 1.0, 0.0)
    assert np.allclose(W, windows_by_decomposition(b, code.chips, h), atol=1e-12)


def test_isi_vanishes_for_single_path(rng):
    code = sm.random_code(rng, 6)
    b = sm.random_qpsk(rng, 10)
    assert not np.any(eta_by_decomposition(b, code.chips, np.array([0.3 - 0.4j])))


def test_rejects_off_grid_symbols(rng):
    C = sm.build_signature_matrix(sm.random_code(rng, 4), 2)
    with pytest.raises(ValueError):
        sm.synthesize_link_windows(np.array([1.0 + 0j]), C, np.ones(2) / np.sqrt(2), 1.0, 0.0)


def test_noise_needs_rng(rng):
    C = sm.build_signature_matrix(sm.random_code(rng, 4), 2)
    with pytest.raises(ValueError):
        sm.synthesize_link_windows(sm.random_qpsk(rng, 3), C, np.ones(2) / np.sqrt(2), 1.0, 0.1)


@given(st.integers(2, 8), st.integers(1, 3), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_superposition_is_linear(N, L, P, seed):
    r = np.random.default_rng(seed)
    L = min(L, N)
    C1 = sm.build_signature_matrix(sm.random_code(r, N), L)
    C2 = sm.build_signature_matrix(sm.random_code(r, N), L)
    h1, h2 = sm.generate_multipath_channel(r, L), sm.generate_multipath_channel(r, L)
    b1, b2 = sm.random_qpsk(r, P), sm.random_qpsk(r, P)
    W1 = sm.synthesize_link_windows(b1, C1, h1, 0.7, 0.0)
    W2 = sm.synthesize_link_windows(b2, C2, h2, 1.3, 0.0)
    # the superposed chip stream, windowed the same way
    N_ = C1.shape[0] - L + 1
    tx = (0.7 * b1[:, None] * C1[:N_, 0]).reshape(-1)
    stream = np.convolve(tx, h1) + np.convolve((1.3 * b2[:, None] * C2[:N_, 0]).reshape(-1), h2)
    W = sm.window_stream(stream, P, N_, C1.shape[0])
    assert np.allclose(W, W1 + W2, atol=1e-12)


@given(st.integers(2, 10), st.integers(1, 4), st.integers(1, 20), st.floats(0.1, 3.0),
       st.integers(0, 2**32 - 1))
def test_desired_term_energy(N, L, P, amp, seed):
    """Desired-term energy over a packet equals amp^2 P |C h|^2.

    Full windows also carry ISI; their energy matches only in expectation, so
    the exact identity is stated for the desired-term decomposition.
    """
    r = np.random.default_rng(seed)
    L = min(L, N)
    code = sm.random_code(r, N)
    h = sm.generate_multipath_channel(r, L)
    b = sm.random_qpsk(r, P)
    p = sm.build_signature_matrix(code, L) @ h
    desired = amp * np.outer(b, p)
    W = sm.synthesize_link_windows(b, sm.build_signature_matrix(code, L), h, amp, 0.0)
    assert abs(np.sum(np.abs(desired) ** 2) - amp**2 * P * np.linalg.norm(p) ** 2) < 1e-9
    eta = W - desired
    assert np.allclose(eta, eta_by_decomposition(b, code.chips, h, amp), atol=1e-12)


def test_window_energy_in_expectation():
    r = np.random.default_rng(5)
    code = sm.random_code(r, 8)
    h = sm.generate_multipath_channel(r, 3)
    C = sm.build_signature_matrix(code, 3)
    p = C @ h
    b = sm.random_qpsk(r, 20000)
    W = sm.synthesize_link_windows(b, C, h, 1.0, 0.0)
    # each window holds the full p plus one shifted tail and one shifted head
    expect = np.linalg.norm(p) ** 2 + np.linalg.norm(p[8:]) ** 2 + np.linalg.norm(p[:2]) ** 2
    assert abs(np.mean(np.sum(np.abs(W) ** 2, axis=1)) - expect) < 0.02 * expect


def test_per_symbol_amplitudes(rng):
    code = sm.random_code(rng, 4)
    C = sm.build_signature_matrix(code, 2)
    h = sm.generate_multipath_channel(rng, 2)
    b = sm.random_qpsk(rng, 6)
    amps = np.linspace(0.5, 2.0, 6)
    W = sm.synthesize_link_windows(b, C, h, amps, 0.0)
    assert np.allclose(W, windows_by_decomposition(amps * b, code.chips, h), atol=1e-12)


def test_synthesis_determinism():
    def make():
        r = np.random.default_rng(99)
        C = sm.build_signature_matrix(sm.random_code(r, 16), 5)
        h = sm.generate_multipath_channel(r, 5)
        return sm.synthesize_link_windows(sm.random_qpsk(r, 50), C, h, 1.0, 0.1, r)
    assert np.array_equal(make(), make())


def test_isi_parts_shapes(rng):
    p = rng.standard_normal(20) + 0j
    cur, tail, head = sm.isi_parts(p, 16)
    assert np.array_equal(cur, p)
    assert np.array_equal(tail[:4], p[16:]) and not np.any(tail[4:])
    assert np.array_equal(head[16:], p[:4]) and not np.any(head[:16])


# --- symbols

@given(st.lists(st.integers(0, 1), min_size=2, max_size=40).filter(lambda x: len(x) % 2 == 0))
def test_gray_bits_round_trip(bits):
    s = sm.qpsk_from_bits(np.array(bits))
    sm.check_qpsk(s)
    assert np.array_equal(sm.bits_from_qpsk(s).reshape(-1), np.array(bits))


def test_lognormal_powers_spread():
    p = sm.lognormal_powers(np.random.default_rng(0), 20000, mean_power=2.0, std_db=3.0)
    db = 10 * np.log10(p / 2.0)
    assert abs(db.mean()) < 0.1 and abs(db.std() - 3.0) < 0.1


def test_power_budget_identity():
    """P_T = P_G + (K - G) P_A under equal nominal powers with P_G = G P_A."""
    K, G, P_A = 8, 3, 1.7
    P_G = G * P_A
    P_T = P_G + (K - G) * P_A
    assert abs(P_T - K * P_A) < 1e-9
