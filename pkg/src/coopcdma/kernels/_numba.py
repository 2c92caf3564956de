"""numba-compiled loop implementations of the bank kernels.

Semantics match :mod:`coopcdma.kernels._numpy` exactly; only the evaluation
order of floating-point sums differs.
"""

import numpy as np
from numba import njit

_opts = dict(cache=True, nogil=True, fastmath=False)


@njit(**_opts)
def _rls_one(P, u, alpha, g):
    D = P.shape[0]
    for i in range(D):
        acc = 0j
        for j in range(D):
            acc += P[i, j] * u[j]
        g[i] = acc
    c = alpha
    for i in range(D):
        c += (u[i].conjugate() * g[i]).real
    inv_c = 1.0 / c
    inv_a = 1.0 / alpha
    for i in range(D):
        gi = g[i] * inv_c
        for j in range(D):
            P[i, j] = (P[i, j] - gi * g[j].conjugate()) * inv_a


@njit(**_opts)
def rls_update(P, u, alpha):
    n, D = u.shape
    g = np.empty(D, dtype=np.complex128)
    for k in range(n):
        _rls_one(P[k], u[k], alpha, g)


@njit(**_opts)
def _weights_one(P, d, p, nu, w, q, s):
    D = P.shape[0]
    for i in range(D):
        aq = 0j
        as_ = 0j
        for j in range(D):
            aq += P[i, j] * d[j]
            as_ += P[i, j] * p[j]
        q[i] = aq
        s[i] = as_
    gamma = 0.0
    t = 0j
    for i in range(D):
        pc = p[i].conjugate()
        gamma += (pc * s[i]).real
        t += pc * q[i]
    f = (t - nu) / gamma
    for i in range(D):
        w[i] = q[i] - s[i] * f


@njit(**_opts)
def ccm_weights(P, d, p, nu, w):
    n, D = d.shape
    q = np.empty(D, dtype=np.complex128)
    s = np.empty(D, dtype=np.complex128)
    for k in range(n):
        _weights_one(P[k], d[k], p[k], nu, w[k], q, s)


@njit(**_opts)
def ccm_step(P, d, w, p, r, alpha, nu, z):
    n, D = d.shape
    u = np.empty(D, dtype=np.complex128)
    g = np.empty(D, dtype=np.complex128)
    q = np.empty(D, dtype=np.complex128)
    s = np.empty(D, dtype=np.complex128)
    for k in range(n):
        zk = 0j
        for i in range(D):
            zk += w[k, i].conjugate() * r[i]
        z[k] = zk
        zc = zk.conjugate()
        for i in range(D):
            d[k, i] = alpha * d[k, i] + zc * r[i]
            u[i] = zk * r[i]
        _rls_one(P[k], u, alpha, g)
        _weights_one(P[k], d[k], p[k], nu, w[k], q, s)


@njit(**_opts)
def upsilon_update(Y, Rinv, C, amps, alpha):
    n, M, L = C.shape
    nb = amps.shape[1]
    D = nb * M
    S = nb * L
    T = np.empty((D, L), dtype=np.complex128)
    G = np.empty((S, S), dtype=np.complex128)
    for k in range(n):
        Ck = C[k]
        for lb in range(nb):
            off = lb * M
            for row in range(D):
                for c in range(L):
                    acc = 0j
                    for m in range(M):
                        acc += Rinv[row, off + m] * Ck[m, c]
                    T[row, c] = acc
            for jb in range(nb):
                coef = amps[k, jb].conjugate() * amps[k, lb]
                roff = jb * M
                for a in range(L):
                    for c in range(L):
                        acc = 0j
                        for m in range(M):
                            acc += Ck[m, a] * T[roff + m, c]
                        G[jb * L + a, lb * L + c] = coef * acc
        Yk = Y[k]
        for x in range(S):
            for y in range(S):
                Yk[x, y] = alpha * Yk[x, y] + 0.5 * (G[x, y] + G[y, x].conjugate())


@njit(**_opts)
def power_step(Y, h, bad):
    n, S = h.shape
    tmp = np.empty(S, dtype=np.complex128)
    for k in range(n):
        tr = 0.0
        for i in range(S):
            tr += Y[k, i, i].real
        if not (np.isfinite(tr) and tr > 0.0):
            bad[k] = True
            continue
        inv_tr = 1.0 / tr
        nrm2 = 0.0
        for i in range(S):
            acc = 0j
            for j in range(S):
                acc += Y[k, i, j] * h[k, j]
            v = h[k, i] - acc * inv_tr
            tmp[i] = v
            nrm2 += v.real * v.real + v.imag * v.imag
        nrm = np.sqrt(nrm2)
        if not (np.isfinite(nrm) and nrm > 0.0):
            bad[k] = True
            continue
        bad[k] = False
        for i in range(S):
            h[k, i] = tmp[i] / nrm
