"""Vectorized numpy reference implementations of the bank kernels."""

import numpy as np


def rls_update(P, u, alpha):
    g = np.einsum("nij,nj->ni", P, u)
    c = alpha + np.einsum("ni,ni->n", u.conj(), g).real
    P -= g[:, :, None] * g.conj()[:, None, :] / c[:, None, None]
    P /= alpha


def ccm_weights(P, d, p, nu, w):
    q = np.einsum("nij,nj->ni", P, d)
    s = np.einsum("nij,nj->ni", P, p)
    gamma = np.einsum("ni,ni->n", p.conj(), s).real
    t = np.einsum("ni,ni->n", p.conj(), q)
    w[:] = q - s * ((t - nu) / gamma)[:, None]


def ccm_step(P, d, w, p, r, alpha, nu, z):
    z[:] = w.conj() @ r
    d *= alpha
    d += z.conj()[:, None] * r[None, :]
    rls_update(P, z[:, None] * r[None, :], alpha)
    ccm_weights(P, d, p, nu, w)


def upsilon_update(Y, Rinv, C, amps, alpha):
    n, M, L = C.shape
    nb = amps.shape[1]
    D = nb * M
    # Rinv restricted to block column l, times C: (n, D, nb, L)
    T = np.einsum("dlm,nmc->ndlc", Rinv.reshape(D, nb, M), C)
    G = np.einsum("nma,njmlc->njalc", C, T.reshape(n, nb, M, nb, L))
    coef = amps.conj()[:, :, None] * amps[:, None, :]
    G = G * coef[:, :, None, :, None]
    G = G.reshape(n, nb * L, nb * L)
    G = 0.5 * (G + np.conj(np.swapaxes(G, 1, 2)))
    Y *= alpha
    Y += G


def power_step(Y, h, bad):
    tr = np.trace(Y, axis1=1, axis2=2).real
    Yh = np.einsum("nij,nj->ni", Y, h)
    ok = np.isfinite(tr) & (tr > 0)
    safe_tr = np.where(ok, tr, 1.0)
    h_new = h - Yh / safe_tr[:, None]
    nrm = np.linalg.norm(h_new, axis=1)
    ok &= np.isfinite(nrm) & (nrm > 0)
    h[ok] = h_new[ok] / nrm[ok, None]
    bad[:] = ~ok
