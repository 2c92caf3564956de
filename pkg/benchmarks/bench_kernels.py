"""Time the numba kernels against the pure-numpy fallback.

Sizes follow the destination of the default scenario: K=8 users, M=20,
n_r=2 (stacked dimension 60, channel dimension 15).

    python benchmarks/bench_kernels.py [--repeat 200] [--json out.json]
"""

import argparse
import json
import time

import numpy as np

from coopcdma.kernels import get_backend


def make_inputs(K=8, N=16, L=5, n_p=3, seed=0):
    rng = np.random.default_rng(seed)
    M = N + L - 1
    D = n_p * M

    def cplx(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    C = np.zeros((K, M, L))
    for k in range(K):
        code = rng.choice([-1.0, 1.0], N) / np.sqrt(N)
        for j in range(L):
            C[k, j:j + N, j] = code
    A = cplx(D, D)
    return {
        "K": K, "D": D, "S": n_p * L, "C": C,
        "P": np.broadcast_to(0.01 * np.eye(D, dtype=complex), (K, D, D)).copy(),
        "Rinv": A @ A.conj().T / D + np.eye(D),
        "d": cplx(K, D), "w": cplx(K, D), "p": cplx(K, D), "r": cplx(D),
        "amps": cplx(K, n_p), "h": cplx(K, n_p * L),
    }


def bench(fn, repeat):
    fn()  # warm-up (and JIT compile for numba)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def run(repeat=200):
    x = make_inputs()
    K, D, S = x["K"], x["D"], x["S"]
    out = {}
    for name in ("numpy", "numba"):
        kb = get_backend(name)
        P, d, w = x["P"].copy(), x["d"].copy(), x["w"].copy()
        z = np.zeros(K, dtype=complex)
        Y = np.zeros((K, S, S), dtype=complex)
        h = x["h"].copy()
        bad = np.zeros(K, dtype=bool)
        Pc = np.eye(D, dtype=complex)[None] * 0.01
        out[name] = {
            "ccm_step": bench(lambda: kb.ccm_step(P, d, w, x["p"], x["r"], 0.998, 1.0, z), repeat),
            "rls_update": bench(lambda: kb.rls_update(Pc, x["r"][None], 0.998), repeat),
            "upsilon_update": bench(lambda: kb.upsilon_update(Y, x["Rinv"], x["C"], x["amps"], 0.998),
                                    repeat),
            "power_step": bench(lambda: kb.power_step(Y + np.eye(S), h, bad), repeat),
        }
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args()
    res = run(args.repeat)
    print(f"{'kernel':<16}{'numpy [us]':>12}{'numba [us]':>12}{'speedup':>9}")
    for k in res["numpy"]:
        a, b = res["numpy"][k] * 1e6, res["numba"][k] * 1e6
        print(f"{k:<16}{a:>12.1f}{b:>12.1f}{a / b:>9.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res, fh, indent=2)


if __name__ == "__main__":
    main()
