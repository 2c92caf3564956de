"""Blind subspace channel estimation.

The estimator tracks the inverse covariance of the received vector with the
matrix inversion lemma, accumulates ``Y = sum alpha^(i-l) Cs^H B^H A^H R^-p A B Cs``
and follows its minimum eigenvector with a shifted power iteration.  The
true channel is (asymptotically) orthogonal to the noise subspace, which
``R^-p`` approximates, so it minimizes ``h^H Y h`` on the unit sphere.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericDegenerateError

DEFAULT_DELTA = 100.0


@dataclass
class InverseCovarianceState:
    """Tracks ``(sum_l alpha^(i-l) r r^H + delta alpha^i I)^-1``."""

    P: np.ndarray
    alpha: float = 0.998
    p_exponent: int = 1

    @classmethod
    def init(cls, D, alpha=0.998, p_exponent=1, delta=DEFAULT_DELTA):
        if p_exponent not in (1, 2):
            raise ValueError("p_exponent must be 1 or 2")
        return cls(np.eye(D, dtype=complex) / delta, alpha, p_exponent)

    @property
    def dim(self):
        return self.P.shape[0]

    def inverse_power(self):
        """``R^-p`` for the configured exponent."""
        if self.p_exponent == 1:
            return self.P
        return self.P @ self.P


def update_inverse_covariance(state, r):
    r = np.asarray(r, dtype=complex)
    if r.shape != (state.dim,):
        raise ValueError(f"window of length {r.shape} does not match covariance dimension {state.dim}")
    kernels.rls_update(state.P[None], r[None], state.alpha)
    return state


@dataclass
class UpsilonState:
    """Accumulated channel-estimation matrix; may be a bank ``(n, S, S)``."""

    Y: np.ndarray
    alpha: float = 0.998

    @classmethod
    def init(cls, S, n=None, alpha=0.998):
        shape = (S, S) if n is None else (n, S, S)
        return cls(np.zeros(shape, dtype=complex), alpha)


def update_upsilon(state, Cs, A_tilde, B_tilde, Rinv_p):
    """Dense single-user form ``Y <- alpha Y + Cs^H B^H A^H R^-p A B Cs``.

    ``A_tilde`` and ``B_tilde`` are the M-expanded diagonal matrices, given
    either as square matrices or as their diagonals.
    """
    D, S = Cs.shape
    a = np.asarray(A_tilde)
    b = np.asarray(B_tilde)
    a = np.diag(a) if a.ndim == 2 else a
    b = np.diag(b) if b.ndim == 2 else b
    if a.shape != (D,) or b.shape != (D,) or Rinv_p.shape != (D, D) or state.Y.shape != (S, S):
        raise ValueError("dimension mismatch in channel-estimation update")
    X = (a * b)[:, None] * Cs
    inc = X.conj().T @ Rinv_p @ X
    state.Y *= state.alpha
    state.Y += 0.5 * (inc + inc.conj().T)
    return state


def update_upsilon_blocks(state, Rinv_p, C, link_amps):
    """Block-structured bank update for users sharing one observation.

    Parameters
    ----------
    state : UpsilonState with ``Y`` of shape ``(n, n_p L, n_p L)``
    Rinv_p : (n_p M, n_p M) tracked inverse covariance power
    C : (n, M, L) per-user signature matrices
    link_amps : (n, n_p) complex ``amplitude * symbol`` per link
    """
    kernels.upsilon_update(state.Y, Rinv_p, C, np.asarray(link_amps, dtype=complex), state.alpha)
    return state


def power_method_step(h_hat, Y):
    """``h <- normalize((I - Y / tr Y) h)``."""
    h = np.array(h_hat, dtype=complex)[None]
    bad = np.zeros(1, dtype=bool)
    kernels.power_step(np.asarray(Y, dtype=complex)[None], h, bad)
    if bad[0]:
        raise NumericDegenerateError("channel-estimation matrix has non-positive or non-finite trace")
    return h[0]


def batch_channel_estimate(Y, atol=1e-8):
    """Unit-norm eigenvector of the smallest eigenvalue of a Hermitian ``Y``.

    For repeated smallest eigenvalues the first eigenvector returned by the
    symmetric eigensolver is used (``e_1`` for a multiple of the identity).
    """
    Y = np.asarray(Y)
    scale = max(1.0, np.abs(Y).max())
    if np.abs(Y - Y.conj().T).max() > atol * scale:
        raise ValueError("channel-estimation matrix is not Hermitian")
    _, V = np.linalg.eigh(0.5 * (Y + Y.conj().T))
    return V[:, 0]


class BlindChannelEstimator:
    """Bank of blind channel trackers for ``n`` users observed at one site.

    Parameters
    ----------
    C : (n, M, L) signature matrices of the tracked users
    n_p : number of stacked links in the observation
    """

    def __init__(self, C, n_p, alpha=0.998, p_exponent=1, delta=DEFAULT_DELTA):
        self.C = np.ascontiguousarray(C, dtype=float)
        n, M, L = self.C.shape
        self.n_p = n_p
        self.cov = InverseCovarianceState.init(n_p * M, alpha, p_exponent, delta)
        self.ups = UpsilonState.init(n_p * L, n, alpha)
        self.h = np.zeros((n, n_p * L), dtype=complex)
        self.h[:, 0] = 1.0
        self._bad = np.zeros(n, dtype=bool)
        self.resets = 0

    def observe(self, r, link_amps):
        """Fold in one observation and advance the power iteration."""
        update_inverse_covariance(self.cov, r)
        update_upsilon_blocks(self.ups, self.cov.inverse_power(), self.C, link_amps)
        self.refine()

    def refine(self):
        kernels.power_step(self.ups.Y, self.h, self._bad)
        if self._bad.any():
            self.h[self._bad] = 0
            self.h[self._bad, 0] = 1.0
            self.resets += int(self._bad.sum())

    def signatures(self):
        """Per-link effective signatures ``C_k h_kj`` with shape ``(n, n_p, M)``."""
        n, M, L = self.C.shape
        hb = self.h.reshape(n, self.n_p, L)
        return np.einsum("nml,njl->njm", self.C, hb)
