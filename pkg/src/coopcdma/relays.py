"""Decode-and-forward relaying: phase bookkeeping, relay detection and stacking."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError, NumericDegenerateError
from .estimator import BlindChannelEstimator
from .receiver import ReceiverState, ccm_rls_update, detect, qpsk_slice, refresh_filter


@dataclass(frozen=True)
class PhaseSchedule:
    """Time-slot map: phase ``j`` (1-based) carries symbols ``(j-1) P + 1 .. j P``."""

    n_r: int
    P: int

    def __post_init__(self):
        if self.n_r < 0 or self.P < 1:
            raise ValueError("need n_r >= 0 and P >= 1")

    @property
    def n_p(self):
        return self.n_r + 1

    def index(self, j, i):
        """Global 1-based time index of symbol ``i`` in phase ``j``."""
        if not (1 <= j <= self.n_p and 1 <= i <= self.P):
            raise ValueError(f"phase {j} / symbol {i} out of range")
        return (j - 1) * self.P + i

    def phase_range(self, j):
        return range(self.index(j, 1), self.index(j, self.P) + 1)


class RelaySite:
    """Blind CCM receivers for all users at one relay (single-link observation).

    Parameters
    ----------
    C : (K, M, L) signature matrices
    amps : (K,) amplitudes on the source-to-relay link, used to weight the
        channel-estimation matrix
    """

    def __init__(self, C, amps, alpha=0.998, nu=1.0, p_exponent=1, iterations=1):
        self.estimator = BlindChannelEstimator(C, 1, alpha=alpha, p_exponent=p_exponent)
        self.amps = np.asarray(amps, dtype=complex).reshape(-1, 1)
        p0 = self.estimator.signatures()[:, 0, :]
        self.receivers = ReceiverState.init(p0, alpha=alpha, nu=nu)
        self.iterations = iterations
        self.resets = 0

    def step(self, r):
        """Adapt on one window and return the K decisions."""
        self.estimator.observe(r, self.amps)
        p_hat = self.estimator.signatures()[:, 0, :]
        try:
            _, z, b = ccm_rls_update(self.receivers, r, p_hat)
        except NumericDegenerateError:
            bad = ~np.all(np.isfinite(self.receivers.w), axis=1)
            self.receivers.reset(bad)
            self.resets += int(bad.sum())
            b = detect(self.receivers, r)
        for _ in range(self.iterations - 1):
            self.estimator.refine()
            refresh_filter(self.receivers, self.estimator.signatures()[:, 0, :])
        return b

    def final_decisions(self, windows):
        """Decisions on ``(P, M)`` windows with the current filters held fixed."""
        z = np.asarray(windows) @ self.receivers.w.conj().T      # (P, K)
        if self.receivers.track_phase:
            z = z * np.exp(-0.25j * self.receivers.phase)
        return qpsk_slice(z).T

    def decode_packet(self, windows, passes=1, redetect=True):
        """Decode a buffered packet.

        A decode-and-forward relay holds the whole source packet before its
        own transmission phase, so it may adapt over the packet ``passes``
        times and then re-detect every symbol with the converged filters.
        With ``passes=1, redetect=False`` this is plain online detection.
        """
        windows = np.asarray(windows)
        if passes < 1:
            raise ValueError("need at least one adaptation pass")
        for _ in range(passes):
            online = np.stack([self.step(r) for r in windows], axis=1)
        return self.final_decisions(windows) if redetect else online


def relay_decode(windows, receivers, estimator=None, amps=None, adapt=True):
    """Detect every user's symbols at one relay.

    Parameters
    ----------
    windows : (P, M) source-to-relay windows
    receivers : ReceiverState bank of shape ``(K, M)`` or a :class:`RelaySite`
    estimator : BlindChannelEstimator supplying effective signatures while adapting
    amps : (K,) source-to-relay amplitudes for the estimator
    adapt : when False the receivers' current filters are applied unchanged

    Returns
    -------
    (K, P) array of QPSK decisions.
    """
    windows = np.asarray(windows)
    if isinstance(receivers, RelaySite):
        site = receivers
        if not adapt:
            receivers = site.receivers
        else:
            return np.stack([site.step(r) for r in windows], axis=1)
    if not adapt:
        return np.stack([np.atleast_1d(detect(receivers, r)) for r in windows], axis=1)
    if estimator is None:
        raise InvalidStateError("adaptive relay decoding needs a channel estimator")
    link_amps = np.ones((receivers.w.shape[0], 1)) if amps is None else np.asarray(amps).reshape(-1, 1)
    out = []
    for r in windows:
        estimator.observe(r, link_amps)
        _, _, b = ccm_rls_update(receivers, r, estimator.signatures()[:, 0, :])
        out.append(np.atleast_1d(b))
    return np.stack(out, axis=1)


def build_symbol_matrices(source, relayed, i, group=None):
    """Per-user ``B_k[i]`` and, when ``group`` is given, the group matrix ``B_S[i]``.

    Parameters
    ----------
    source : (K, P) source symbols
    relayed : sequence of ``n_r`` arrays of shape (K, P) (None marks a missing stream)
    i : 0-based symbol index within the packet
    group : optional member indices

    Returns
    -------
    (B, B_S) where ``B`` has shape (K, n_p, n_p) and ``B_S`` is
    ``(G n_p, G n_p)`` or None.
    """
    source = np.asarray(source)
    streams = [source]
    for j, s in enumerate(relayed):
        if s is None:
            raise InvalidStateError(f"relay {j + 1} has not produced its decoded stream")
        s = np.asarray(s)
        if s.shape != source.shape:
            raise InvalidStateError(f"relay {j + 1} stream has shape {s.shape}, expected {source.shape}")
        streams.append(s)
    diag = np.stack([s[:, i] for s in streams], axis=1)  # (K, n_p)
    K, n_p = diag.shape
    B = np.zeros((K, n_p, n_p), dtype=complex)
    B[:, np.arange(n_p), np.arange(n_p)] = diag
    B_S = None
    if group is not None:
        B_S = np.diag(diag[list(group)].reshape(-1))
    return B, B_S


def stack_destination(window_sd, windows_rd):
    """Concatenate the direct window and relay windows in phase order."""
    window_sd = np.asarray(window_sd)
    parts = [window_sd]
    for w in windows_rd:
        w = np.asarray(w)
        if w.shape != window_sd.shape:
            raise ValueError(f"relay window of shape {w.shape} differs from direct window {window_sd.shape}")
        parts.append(w)
    return np.concatenate(parts)


def unstack_destination(r, n_p):
    r = np.asarray(r)
    if r.size % n_p:
        raise ValueError("stacked window length is not a multiple of the phase count")
    return list(r.reshape(n_p, -1))
