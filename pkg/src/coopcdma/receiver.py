"""Linear interference suppression: slicer, RAKE, CCM filters and a genie MMSE reference.

The CCM (code-constrained constant modulus) receiver minimizes
``E[(|w^H r|^2 - 1)^2]`` subject to ``w^H p = nu``.  Fixing the output
``z`` inside the expectation turns the problem into a weighted least squares
with correlation ``R = E[|z|^2 r r^H]`` and cross-correlation
``d = E[conj(z) r]``, solved either in closed form or recursively.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NumericDegenerateError
from .sigmodel import SQRT_HALF, isi_parts

P_INIT = 0.01
COND_LIMIT = 1e12


def qpsk_slice(z):
    """Nearest QPSK point; zero real or imaginary parts resolve to +."""
    z = np.asarray(z)
    if not np.all(np.isfinite(z)):
        raise ValueError("cannot slice a non-finite soft output")
    out = SQRT_HALF * (np.where(z.real >= 0, 1.0, -1.0) + 1j * np.where(z.imag >= 0, 1.0, -1.0))
    return complex(out) if out.ndim == 0 else out


def rake_output(p_hat, r):
    p_hat = np.asarray(p_hat)
    r = np.asarray(r)
    if p_hat.shape != r.shape:
        raise ValueError(f"signature {p_hat.shape} and window {r.shape} differ in length")
    return np.vdot(p_hat, r)


def _loaded(R):
    D = R.shape[0]
    if np.linalg.cond(R) > COND_LIMIT:
        R = R + (1e-8 * np.trace(R).real / D) * np.eye(D)
    return R


def ccm_filter_closed_form(R, d, p_hat, nu=1.0):
    """``w = R^-1 (d - p (p^H R^-1 d - nu) / (p^H R^-1 p))``.

    The result satisfies ``w^H p_hat = conj(nu)``.
    """
    R = np.asarray(R)
    d = np.asarray(d)
    p_hat = np.asarray(p_hat)
    if not np.any(p_hat):
        raise ValueError("constraint vector p_hat must be non-zero")
    try:
        X = np.linalg.solve(_loaded(R), np.stack([d, p_hat], axis=1))
    except np.linalg.LinAlgError as exc:
        raise NumericDegenerateError("singular correlation matrix") from exc
    Rd, Rp = X[:, 0], X[:, 1]
    gamma = np.vdot(p_hat, Rp).real
    if not np.isfinite(gamma) or gamma <= 0:
        raise NumericDegenerateError("non-positive constraint gain p^H R^-1 p")
    return Rd - Rp * (np.vdot(p_hat, Rd) - nu) / gamma


def _bank(x):
    return x if x.ndim >= 2 else x[None]


@dataclass
class ReceiverState:
    """CCM-RLS receiver state; arrays may carry a leading bank axis.

    A 1-D ``w`` is a single receiver.  A 2-D ``w`` of shape ``(n, D)`` is a
    bank of ``n`` receivers that all filter the same observation.
    ``phase`` is the unwrapped estimate of four times the output rotation,
    tracked from the fourth power of the soft output.
    """

    w: np.ndarray
    P: np.ndarray
    d: np.ndarray
    p_hat: np.ndarray
    nu: float = 1.0
    alpha: float = 0.998
    track_phase: bool = True
    phase_acc: np.ndarray = field(default=None)
    phase: np.ndarray = field(default=None)

    def __post_init__(self):
        lead = self.w.shape[:-1]
        if self.phase_acc is None:
            self.phase_acc = np.zeros(lead, dtype=complex)
        if self.phase is None:
            self.phase = np.zeros(lead)

    @classmethod
    def init(cls, p_hat, alpha=0.998, nu=1.0, p_init=P_INIT, track_phase=True):
        p_hat = np.array(p_hat, dtype=complex)
        D = p_hat.shape[-1]
        P = np.broadcast_to(p_init * np.eye(D, dtype=complex), p_hat.shape[:-1] + (D, D)).copy()
        state = cls(w=np.zeros_like(p_hat), P=P, d=np.zeros_like(p_hat), p_hat=p_hat,
                    nu=nu, alpha=alpha, track_phase=track_phase)
        state.w[...] = scaled_rake(p_hat, nu)
        return state

    @property
    def dim(self):
        return self.w.shape[-1]

    def reset(self, index=Ellipsis, p_init=P_INIT):
        """Restart the recursion of the selected receivers from a scaled RAKE."""
        D = self.dim
        self.P[index] = p_init * np.eye(D)
        self.d[index] = 0
        self.w[index] = scaled_rake(self.p_hat[index], self.nu)
        self.phase_acc[index] = 0
        self.phase[index] = 0

    def derotate(self, z):
        return z * np.exp(-0.25j * self.phase)

    def update_phase(self, z):
        mag = np.abs(z)
        unit = np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 0)
        self.phase_acc = self.alpha * self.phase_acc - unit**4
        target = np.angle(self.phase_acc)
        self.phase = self.phase + np.angle(np.exp(1j * (target - self.phase)))


def scaled_rake(p_hat, nu=1.0):
    """Feasible starting filter ``p nu / |p|^2``."""
    p_hat = np.asarray(p_hat)
    return p_hat * (nu / np.sum(np.abs(p_hat) ** 2, axis=-1, keepdims=True))


def filter_output(state, r):
    return state.w.conj() @ r


def detect(state, r):
    """Slicer decision on the filter output; the state is not modified."""
    z = filter_output(state, r)
    if state.track_phase:
        z = state.derotate(z)
    return qpsk_slice(z)


def ccm_rls_update(state, r, p_hat=None):
    """One recursive CCM iteration on observation ``r``.

    Computes ``z = w^H r`` with the previous filter, accumulates
    ``d <- alpha d + conj(z) r``, applies the rank-one inverse update with
    regressor ``z r`` and recomputes the constrained filter.  ``p_hat``
    replaces the stored effective signature first when given.

    Returns ``(state, z, b_hat)``.
    """
    r = np.asarray(r, dtype=complex)
    if r.shape != (state.dim,):
        raise ValueError(f"window of length {r.shape} does not match receiver dimension {state.dim}")
    if p_hat is not None:
        state.p_hat[...] = p_hat
    z = np.empty(state.w.shape[:-1], dtype=complex)
    kernels.ccm_step(_bank(state.P.reshape((-1,) + state.P.shape[-2:])),
                     _bank(state.d), _bank(state.w), _bank(state.p_hat),
                     r, state.alpha, state.nu, z.reshape(-1))
    if not np.all(np.isfinite(z)) or not np.all(np.isfinite(state.w)):
        raise NumericDegenerateError("CCM-RLS recursion diverged")
    if state.track_phase:
        state.update_phase(z)
        b_hat = qpsk_slice(state.derotate(z))
    else:
        b_hat = qpsk_slice(z)
    if z.ndim == 0:
        z = complex(z)
    return state, z, b_hat


def refresh_filter(state, p_hat=None):
    """Recompute ``w`` from the stored recursion with a new constraint vector."""
    if p_hat is not None:
        state.p_hat[...] = p_hat
    kernels.ccm_weights(_bank(state.P.reshape((-1,) + state.P.shape[-2:])), _bank(state.d),
                        _bank(state.p_hat), state.nu, _bank(state.w))


def mmse_genie_filter(signatures, amplitudes, sigma2, N, desired=0):
    """Linear MMSE filter from exact second-order statistics.

    Parameters
    ----------
    signatures : (K, n_p, M) per-user, per-link effective signatures
    amplitudes : (K, n_p) link amplitudes
    sigma2 : noise variance per complex sample
    N : processing gain, used to place the ISI shifts
    desired : user index

    The covariance assumes error-free relays, unit-power independent symbols
    and counts the desired, previous-symbol and next-symbol contributions of
    every user plus white noise.
    """
    signatures = np.asarray(signatures)
    amplitudes = np.asarray(amplitudes, dtype=float)
    K = signatures.shape[0]
    cur, tail, head = isi_parts(signatures, N)
    weighted = amplitudes[:, :, None]
    s = (weighted * cur).reshape(K, -1)
    t = (weighted * tail).reshape(K, -1)
    u = (weighted * head).reshape(K, -1)
    V = np.concatenate([s, t, u], axis=0)
    R = V.T @ V.conj() + sigma2 * np.eye(V.shape[1])
    try:
        return np.linalg.solve(R, s[desired])
    except np.linalg.LinAlgError as exc:
        raise NumericDegenerateError("singular genie covariance") from exc
