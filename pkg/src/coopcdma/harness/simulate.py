"""One Monte Carlo trial: scenario draw, relay stage and the destination loop.

Randomness is keyed by ``(seed, trial, purpose, index)`` so that a trial's
codes, powers, symbols, channels and noise are the same for every scheme,
SNR point and relay count.  Noise is drawn at unit variance and scaled, which
pairs the realizations across the SNR grid as well.
"""

from dataclasses import dataclass

import numpy as np

from .. import sigmodel
from ..allocator import GroupAllocation, allocation_rls_update, block_regressor, select_group
from ..errors import NumericDegenerateError
from ..estimator import BlindChannelEstimator
from ..receiver import (
    ReceiverState,
    ccm_rls_update,
    detect,
    mmse_genie_filter,
    qpsk_slice,
    refresh_filter,
)
from ..relays import RelaySite

_CODES, _POWERS, _SYMBOLS, _H_SD, _H_SR, _H_RD, _NOISE_RELAY, _NOISE_DEST = range(8)

MAX_RESETS_PER_SYMBOL = 4.0


class NumericDivergenceError(NumericDegenerateError):
    """Adaptive states kept diverging after repeated resets."""


def stream(seed, trial, purpose, *index):
    ss = np.random.SeedSequence(seed, spawn_key=(trial, purpose) + tuple(index))
    return np.random.default_rng(ss)


@dataclass
class Scenario:
    """Ground truth of one trial.  Channel arrays are indexed ``[relay, user]``."""

    C: np.ndarray          # (K, M, L)
    powers: np.ndarray     # (K,)
    symbols: np.ndarray    # (K, P)
    h_sd: np.ndarray       # (K, L)
    h_sr: np.ndarray       # (n_r, K, L)
    h_rd: np.ndarray       # (n_r, K, L)
    noise_relay: np.ndarray  # (n_r, P, M), unit variance
    noise_dest: np.ndarray   # (n_r + 1, P, M), unit variance


def make_scenario(cfg, trial, n_r, K=None):
    K = cfg.K if K is None else K
    N, L, P = cfg.N, cfg.L, cfg.P
    codes = [sigmodel.random_code(stream(cfg.seed, trial, _CODES, k), N, k) for k in range(K)]
    C = np.stack([sigmodel.build_signature_matrix(c, L) for c in codes])
    powers = np.array([sigmodel.lognormal_powers(stream(cfg.seed, trial, _POWERS, k), 1,
                                                 std_db=cfg.lognormal_std_db)[0] for k in range(K)])
    symbols = np.stack([sigmodel.random_qpsk(stream(cfg.seed, trial, _SYMBOLS, k), P)
                        for k in range(K)])
    chan = sigmodel.generate_multipath_channel
    h_sd = np.stack([chan(stream(cfg.seed, trial, _H_SD, k), L) for k in range(K)])
    h_sr = np.array([[chan(stream(cfg.seed, trial, _H_SR, j, k), L) for k in range(K)]
                     for j in range(n_r)]).reshape(n_r, K, L)
    h_rd = np.array([[chan(stream(cfg.seed, trial, _H_RD, j, k), L) for k in range(K)]
                     for j in range(n_r)]).reshape(n_r, K, L)
    noise_relay = np.array([sigmodel.noise_windows(stream(cfg.seed, trial, _NOISE_RELAY, j), P, N, L, 1.0)
                            for j in range(n_r)]).reshape(n_r, P, N + L - 1)
    noise_dest = np.array([sigmodel.noise_windows(stream(cfg.seed, trial, _NOISE_DEST, j), P, N, L, 1.0)
                           for j in range(n_r + 1)])
    return Scenario(C, powers, symbols, h_sd, h_sr, h_rd, noise_relay, noise_dest)


def link_windows(coef, cur, tail, head):
    """Noise-free windows of one link for a whole packet.

    ``coef`` is ``(K, P)`` amplitude times symbol; ``cur/tail/head`` are the
    ``(K, M)`` ISI parts of each user's effective signature on the link.
    """
    prev = np.zeros_like(coef)
    prev[:, 1:] = coef[:, :-1]
    nxt = np.zeros_like(coef)
    nxt[:, :-1] = coef[:, 1:]
    return coef.T @ cur + prev.T @ tail + nxt.T @ head


def derotated_bit_errors(decisions, truth, start=0):
    """Per-symbol bit errors after the best of the four QPSK rotations.

    The rotation is chosen on symbols ``start:``.
    """
    true_bits = sigmodel.bits_from_qpsk(truth)
    best = None
    for q in range(4):
        errs = (sigmodel.bits_from_qpsk(decisions * 1j**q) != true_bits).sum(axis=-1)
        total = errs[start:].sum()
        if best is None or total < best[0]:
            best = (total, errs)
    return best[1]


def link_signatures(weighted, amps, floor=1e-6):
    """Per-link signatures ``C h_j`` from amplitude-weighted ones ``a_j C h_j``.

    Each user's result is scaled to unit stacked norm; links with amplitude
    below ``floor`` times the user's largest are left at zero.
    """
    amps = np.asarray(amps, dtype=float)
    top = amps.max(axis=-1, keepdims=True)
    live = amps > floor * np.where(top > 0, top, 1.0)
    scale = np.where(live, 1.0 / np.where(live, amps, 1.0), 0.0)
    sig = weighted * scale[..., None]
    nrm = np.sqrt(np.sum(np.abs(sig) ** 2, axis=(-2, -1), keepdims=True))
    return sig / np.where(nrm > 0, nrm, 1.0)


@dataclass
class TrialResult:
    bit_errors: np.ndarray   # (P,) bit errors per symbol, summed over counted users
    users_counted: int
    group: tuple
    resets: int


def run_trial(cfg, scheme, snr_db, trial, K=None):
    K = cfg.K if K is None else K
    n_r = 0 if scheme == "BNCIS" else cfg.n_r
    n_p = n_r + 1
    N, L, P, M = cfg.N, cfg.L, cfg.P, cfg.M
    G = min(cfg.G, K)
    genie = scheme == "MMSE_GENIE"
    desired = cfg.desired_user
    nominal = cfg.nominal_power
    sigma2 = nominal * 10.0 ** (-snr_db / 10.0)
    noise_scale = np.sqrt(sigma2)
    sc = make_scenario(cfg, trial, n_r, K)
    sc.powers = sc.powers * nominal

    # --- phase 1: relays listen to the sources at full user power
    amp_sr = np.sqrt(sc.powers)
    relayed = []
    resets = 0
    for j in range(n_r):
        p_sr = np.einsum("kml,kl->km", sc.C, sc.h_sr[j])
        cur, tail, head = sigmodel.isi_parts(p_sr, N)
        W = link_windows(amp_sr[:, None] * sc.symbols, cur, tail, head) + noise_scale * sc.noise_relay[j]
        if genie:
            F = np.stack([mmse_genie_filter(p_sr[:, None, :], amp_sr[:, None], sigma2, N, desired=k)
                          for k in range(K)])
            relayed.append(qpsk_slice(F.conj() @ W.T))
        else:
            site = RelaySite(sc.C, amp_sr, alpha=cfg.alpha, nu=cfg.nu, p_exponent=cfg.p_exponent,
                             iterations=cfg.iterations_per_symbol)
            relayed.append(site.decode_packet(W, cfg.relay_passes, cfg.relay_redetect))
            resets += site.resets + site.estimator.resets

    # --- destination: stacked direct and relay links
    p_true = np.empty((K, n_p, M), dtype=complex)
    p_true[:, 0] = np.einsum("kml,kl->km", sc.C, sc.h_sd)
    for j in range(n_r):
        p_true[:, j + 1] = np.einsum("kml,kl->km", sc.C, sc.h_rd[j])
    cur, tail, head = sigmodel.isi_parts(p_true, N)
    link_syms = np.stack([sc.symbols] + relayed, axis=-1)        # (K, P, n_p)
    amp_tab = np.empty((P, K, n_p))
    amp_tab[:] = np.sqrt(sc.powers / n_p)[None, :, None]
    noise = noise_scale * sc.noise_dest                            # (n_p, P, M)

    decisions = np.empty(P, dtype=complex)
    if genie:
        w = mmse_genie_filter(p_true, amp_tab[0], sigma2, N, desired=desired)
        for j in range(n_p):
            coef = amp_tab[:, :, j].T * link_syms[:, :, j]
            noise[j] += link_windows(coef, cur[:, j], tail[:, j], head[:, j])
        R = noise.transpose(1, 0, 2).reshape(P, n_p * M)
        decisions[:] = qpsk_slice(R @ w.conj())
        errs = derotated_bit_errors(decisions, sc.symbols[desired], cfg.warmup)
        return TrialResult(errs, 1, (), resets)

    adapt_alloc = scheme == "BJPAIS_GBC"
    est = BlindChannelEstimator(sc.C, n_p, alpha=cfg.alpha, p_exponent=cfg.p_exponent, delta=cfg.delta)
    rx = ReceiverState.init(est.signatures().reshape(K, -1), alpha=cfg.alpha, nu=cfg.nu,
                            p_init=cfg.pmat_init)
    b_prev = np.ones(K, dtype=complex)
    rake = np.zeros(K)
    alloc = None
    members = ()
    lag = cfg.feedback_lag
    coef = np.zeros((3, K, n_p), dtype=complex)
    reset_budget = MAX_RESETS_PER_SYMBOL * P

    for i in range(P):
        # transmitted contributions of symbols i-1, i, i+1 on every link
        coef[:] = 0
        for s, t in enumerate((i - 1, i, i + 1)):
            if 0 <= t < P:
                coef[s] = amp_tab[t] * link_syms[:, t, :]
        r = (np.einsum("kj,kjm->jm", coef[1], cur) + np.einsum("kj,kjm->jm", coef[0], tail)
             + np.einsum("kj,kjm->jm", coef[2], head) + noise[:, i, :]).reshape(-1)

        # the estimator tracks the amplitude-weighted channel A h; weighting
        # by symbols only keeps it well posed when a link is switched off
        est.observe(r, np.broadcast_to(b_prev[:, None], (K, n_p)))
        sig = est.signatures()
        p_hat = sig.reshape(K, -1)
        if i < cfg.group_window:
            rake += np.abs(p_hat.conj() @ r)
        w_prev = rx.w[desired].copy()
        try:
            _, z, b_hat = ccm_rls_update(rx, r, p_hat)
        except NumericDegenerateError:
            bad = ~(np.all(np.isfinite(rx.w), axis=1) & np.all(np.isfinite(rx.P), axis=(1, 2)))
            rx.reset(bad, cfg.pmat_init)
            resets += int(bad.sum())
            z = rx.w.conj() @ r
            b_hat = detect(rx, r)
        for _ in range(cfg.iterations_per_symbol - 1):
            est.refine()
            refresh_filter(rx, est.signatures().reshape(K, -1))
        decisions[i] = b_hat[desired]
        b_prev = b_hat

        if adapt_alloc and i == cfg.group_window - 1:
            members = select_group(rake, G)
            a0 = amp_tab[i, list(members)].reshape(-1)
            alloc = GroupAllocation.init(members, n_p, P_G=G * nominal, alpha=cfg.alpha,
                                         lam=cfg.lambda_k, a0=a0, p_init=cfg.pmat_init,
                                         warm_start=True)
            if i + lag < P:
                amp_tab[i + lag:, list(members)] = alloc.amplitudes(n_p)
        elif alloc is not None:
            mem = list(members)
            v = block_regressor(link_signatures(sig[mem], amp_tab[i, mem]),
                                np.repeat(b_hat[mem][:, None], n_p, axis=1), w_prev)
            try:
                allocation_rls_update(alloc, v, z[desired])
            except NumericDegenerateError:
                resets += 1
            if i + lag < P:
                amp_tab[i + lag:, mem] = alloc.amplitudes(n_p)

        resets += est.resets
        est.resets = 0
        if resets > reset_budget:
            raise NumericDivergenceError(
                f"{scheme}: adaptive states diverged repeatedly (trial {trial}, symbol {i})")

    errs = derotated_bit_errors(decisions, sc.symbols[desired], cfg.warmup)
    return TrialResult(errs, 1, tuple(members), resets)
