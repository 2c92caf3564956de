"""Group selection and group-constrained power allocation.

The ``G`` users with the strongest RAKE outputs share a single amplitude
vector ``a`` of length ``G (n_r + 1)`` whose squared norm is held at the group
budget ``P_G``.  With the receive filter fixed, the CM criterion in ``a`` is a
ridge-regularized least squares ``(R_S + lambda I) a = d_S`` with
``R_S = E[|z|^2 v v^H]``, ``d_S = E[z v]`` and regressor ``v = B_S^H P_S^H w``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateAllocationWarning, NumericDegenerateError

P_INIT = 0.01


def select_group(rake_magnitudes, G):
    """Indices of the ``G`` largest magnitudes, descending; ties go to the lower index."""
    m = np.asarray(rake_magnitudes, dtype=float)
    K = m.size
    if not 1 <= G <= K:
        raise ValueError(f"group size G={G} must lie in [1, K={K}]")
    order = np.lexsort((np.arange(K), -m))
    return tuple(int(k) for k in order[:G])


def group_signature_matrix(link_signatures):
    """``P_S`` from per-member, per-link signatures of shape ``(G, n_p, M)``.

    Column ``g n_p + j`` holds member g's link-j signature in row block j.
    """
    sig = np.asarray(link_signatures)
    G, n_p, M = sig.shape
    P_S = np.zeros((n_p * M, G * n_p), dtype=complex)
    for g in range(G):
        for j in range(n_p):
            P_S[j * M:(j + 1) * M, g * n_p + j] = sig[g, j]
    return P_S


def build_regressor(B_S, P_S, w):
    """``v = B_S^H P_S^H w``; ``B_S`` may be the diagonal matrix or its diagonal."""
    B = np.asarray(B_S)
    b = np.diag(B) if B.ndim == 2 else B
    P_S = np.asarray(P_S)
    w = np.asarray(w)
    if P_S.shape[0] != w.shape[0] or P_S.shape[1] != b.shape[0]:
        raise ValueError("dimension mismatch between symbols, signatures and filter")
    return b.conj() * (P_S.conj().T @ w)


def block_regressor(link_signatures, symbols, w):
    """Fast ``v`` when ``P_S`` is block structured: entries ``conj(b_gj) p_gj^H w_j``."""
    sig = np.asarray(link_signatures)
    G, n_p, M = sig.shape
    proj = np.einsum("gjm,jm->gj", sig.conj(), np.asarray(w).reshape(n_p, M))
    return (np.conj(symbols) * proj).reshape(-1)


def equal_power(dim, P_G):
    return np.full(dim, np.sqrt(P_G / dim), dtype=complex)


def normalize_allocation(a, P_G):
    nrm = np.linalg.norm(a)
    if not np.isfinite(nrm):
        raise NumericDegenerateError("non-finite allocation")
    if nrm == 0:
        warnings.warn("zero allocation; falling back to equal power", DegenerateAllocationWarning,
                      stacklevel=3)
        return equal_power(a.size, P_G)
    return a * (np.sqrt(P_G) / nrm)


def allocation_closed_form(R_S, d_S, lam, P_G):
    """``a = (R_S + lambda I)^-1 d_S`` scaled so that ``|a|^2 = P_G``.

    A zero ``d_S`` has no preferred direction: equal power is returned and a
    :class:`DegenerateAllocationWarning` is emitted.
    """
    R_S = np.asarray(R_S)
    d_S = np.asarray(d_S, dtype=complex)
    if not np.any(d_S):
        warnings.warn("zero cross-correlation; using equal power", DegenerateAllocationWarning,
                      stacklevel=2)
        return equal_power(d_S.size, P_G)
    try:
        a = np.linalg.solve(R_S + lam * np.eye(R_S.shape[0]), d_S)
    except np.linalg.LinAlgError as exc:
        raise NumericDegenerateError("singular allocation system") from exc
    return normalize_allocation(a, P_G)


@dataclass
class GroupAllocation:
    """Recursive allocation state for one group.

    ``a`` is always normalized; ``a_raw`` keeps the last unnormalized
    solution ``P d``.
    """

    members: tuple
    a: np.ndarray
    P_G: float
    P: np.ndarray
    d: np.ndarray
    alpha: float = 0.998
    lam: float = 0.025
    a_raw: np.ndarray = None

    @classmethod
    def init(cls, members, n_p, P_G, alpha=0.998, lam=0.025, a0=None, p_init=P_INIT,
             warm_start=False):
        """Fresh state; ``warm_start`` seeds ``d`` so that the first solution ``P d`` is ``a``.

        Without it the first normalized solution follows a single noisy sample
        of ``z v``.  The seed is forgotten at the same rate as the ``P`` loading.
        """
        dim = len(members) * n_p
        a = equal_power(dim, P_G) if a0 is None else normalize_allocation(
            np.asarray(a0, dtype=complex), P_G)
        d = a / p_init if warm_start else np.zeros(dim, dtype=complex)
        return cls(tuple(members), a, P_G, p_init * np.eye(dim, dtype=complex), d, alpha, lam)

    @property
    def dim(self):
        return self.a.size

    def amplitudes(self, n_p):
        """Transmit amplitudes per member and link, shape ``(G, n_p)``."""
        return np.abs(self.a).reshape(-1, n_p)

    def reset(self, p_init=P_INIT):
        self.P[...] = p_init * np.eye(self.dim)
        self.d[...] = 0
        self.a = equal_power(self.dim, self.P_G)


def allocation_rls_update(state, v, z):
    """One recursive step: ``d <- alpha d + z v``, rank-one update with ``z v``, renormalize."""
    v = np.asarray(v, dtype=complex)
    if v.shape != (state.dim,):
        raise ValueError(f"regressor of length {v.shape} does not match allocation dimension {state.dim}")
    state.d *= state.alpha
    state.d += z * v
    kernels.rls_update(state.P[None], (z * v)[None], state.alpha)
    a = state.P @ state.d
    if not np.all(np.isfinite(a)):
        state.reset()
        raise NumericDegenerateError("allocation recursion diverged")
    state.a_raw = a
    if not np.any(a):
        # no information yet (e.g. zero regressors): keep the previous direction
        return state
    state.a = normalize_allocation(a, state.P_G)
    return state


def out_of_group_allocation(P_Ak, n_r):
    """Equal split of a user's power over its ``n_r + 1`` links."""
    if P_Ak <= 0:
        raise ValueError("user power must be positive")
    return np.full(n_r + 1, np.sqrt(P_Ak / (n_r + 1)))
