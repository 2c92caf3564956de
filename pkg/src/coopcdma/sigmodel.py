"""Spreading structures, multipath channels and chip-rate received windows.

Conventions used throughout the package:

* QPSK symbols are ``(+-1 +- 1j) / sqrt(2)`` with Gray mapping: bit pair
  ``(b0, b1)`` selects the sign of the real and imaginary part (0 -> +).
* ``sigma2`` is the total noise variance of one complex sample.
* A received window for symbol ``i`` holds chip samples ``[i*N, i*N + M)``
  of the convolved chip stream, so it carries the tail of symbol ``i-1`` in
  its first ``L-1`` samples and the head of symbol ``i+1`` in its last
  ``L-1`` samples.
"""

from dataclasses import dataclass

import numpy as np

SQRT_HALF = np.sqrt(0.5)
QPSK_ALPHABET = SQRT_HALF * np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])


@dataclass(frozen=True)
class SpreadingCode:
    """Unit-norm real spreading sequence of one user."""

    chips: np.ndarray
    user_id: int = 0

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=float)
        if chips.ndim != 1 or chips.size == 0:
            raise ValueError("spreading code must be a non-empty 1-D sequence")
        object.__setattr__(self, "chips", chips)

    @property
    def N(self):
        return self.chips.size


def random_code(rng, N, user_id=0):
    """Random +-1 chips normalized by sqrt(N)."""
    if N < 1:
        raise ValueError("processing gain N must be >= 1")
    chips = rng.choice([-1.0, 1.0], size=N) / np.sqrt(N)
    return SpreadingCode(chips, user_id)


def _chips(code):
    if isinstance(code, SpreadingCode):
        return code.chips
    chips = np.asarray(code)
    if chips.ndim != 1 or chips.size == 0:
        raise ValueError("spreading code must be a non-empty 1-D sequence")
    return chips


def build_signature_matrix(code, L):
    """M x L matrix whose column ``c`` is the code shifted down by ``c`` chips."""
    chips = _chips(code)
    if L < 1:
        raise ValueError("number of paths L must be >= 1")
    N = chips.size
    C = np.zeros((N + L - 1, L), dtype=chips.dtype)
    for c in range(L):
        C[c:c + N, c] = chips
    return C


def build_stacked_signature(C, n_r):
    """Block-diagonal matrix with ``n_r + 1`` copies of ``C``."""
    if n_r < 0:
        raise ValueError("number of relays n_r must be >= 0")
    return np.kron(np.eye(n_r + 1, dtype=C.dtype), C)


def effective_signature(Cs, h):
    h = np.asarray(h)
    if Cs.ndim != 2 or h.shape != (Cs.shape[1],):
        raise ValueError(
            f"channel of shape {h.shape} does not match signature with {Cs.shape[1]} columns")
    return Cs @ h


def generate_multipath_channel(rng, L):
    """Unit-norm L-tap channel: Gaussian taps shaped by a random power-delay profile."""
    if L < 1:
        raise ValueError("number of paths L must be >= 1")
    pdp = rng.uniform(size=L)
    pdp /= pdp.sum()
    taps = np.sqrt(pdp / 2) * (rng.standard_normal(L) + 1j * rng.standard_normal(L))
    return taps / np.linalg.norm(taps)


def complex_noise(rng, shape, sigma2):
    """Circular complex Gaussian samples with total variance ``sigma2``."""
    scale = np.sqrt(sigma2 / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def window_stream(stream, P, N, M):
    """Cut a chip stream of length ``(P-1)*N + M`` into P overlapping M-windows."""
    idx = np.arange(P)[:, None] * N + np.arange(M)[None, :]
    return stream[idx]


def noise_windows(rng, P, N, L, sigma2):
    """Windowed chip-rate noise; one realization shared by overlapping windows."""
    M = N + L - 1
    stream = complex_noise(rng, P * N + L - 1, sigma2)
    return window_stream(stream, P, N, M)


def check_qpsk(symbols, atol=1e-9):
    s = np.asarray(symbols)
    ok = (np.abs(np.abs(s.real) - SQRT_HALF) <= atol) & (np.abs(np.abs(s.imag) - SQRT_HALF) <= atol)
    ok |= np.abs(s) == 0
    if not np.all(ok):
        raise ValueError("symbols must lie on the QPSK grid (+-1 +- 1j)/sqrt(2)")


def synthesize_link_windows(symbols, C, h, amp, sigma2, rng=None):
    """Chip-rate synthesis of one user's windows over a packet.

    The symbols are spread by the code in ``C`` (column 0), convolved with
    ``h`` over the whole packet, noise of variance ``sigma2`` is added to the
    chip stream, and the result is cut into M-sample windows at symbol
    boundaries.  Zero symbols are allowed and model a silent user.

    Parameters
    ----------
    symbols : (P,) complex
    C : (M, L) signature matrix
    h : (L,) channel taps
    amp : float or (P,) per-symbol amplitudes
    sigma2 : float
    rng : numpy Generator, required when ``sigma2 > 0``

    Returns
    -------
    (P, M) complex array of windows.
    """
    symbols = np.asarray(symbols, dtype=complex)
    check_qpsk(symbols)
    M, L = C.shape
    N = M - L + 1
    h = np.asarray(h)
    if h.shape != (L,):
        raise ValueError(f"channel must have {L} taps")
    if L - 1 > N:
        raise ValueError("ISI beyond adjacent symbols (L - 1 > N) is not supported")
    P = symbols.size
    chips = C[:N, 0]
    s = np.broadcast_to(np.asarray(amp, dtype=float), (P,)) * symbols
    tx = (s[:, None] * chips[None, :]).reshape(-1)
    stream = np.convolve(tx, h)
    windows = window_stream(stream, P, N, M)
    if sigma2 > 0:
        if rng is None:
            raise ValueError("an RNG is required to synthesize noise")
        windows = windows + noise_windows(rng, P, N, L, sigma2)
    return windows


def isi_parts(p, N):
    """Split an effective signature into its in-window shifts.

    Returns ``(cur, prev_tail, next_head)``, each of length M: the response
    of the current symbol, the tail of the previous symbol that leaks into the
    first ``L-1`` samples, and the head of the next symbol that occupies the
    last ``L-1`` samples.  Works on the trailing axis, so a stack of
    signatures may be passed.
    """
    p = np.asarray(p)
    M = p.shape[-1]
    Lm1 = M - N
    tail = np.zeros_like(p)
    head = np.zeros_like(p)
    tail[..., :Lm1] = p[..., N:]
    head[..., N:] = p[..., :Lm1]
    return p, tail, head


def qpsk_from_bits(bits):
    bits = np.asarray(bits).reshape(-1, 2)
    return SQRT_HALF * ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1]))


def bits_from_qpsk(symbols):
    s = np.asarray(symbols)
    return np.stack([(s.real < 0), (s.imag < 0)], axis=-1).astype(np.int8)


def random_qpsk(rng, shape):
    bits = rng.integers(0, 2, size=tuple(np.atleast_1d(shape)) + (2,))
    return SQRT_HALF * ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1]))


def lognormal_powers(rng, K, mean_power=1.0, std_db=3.0):
    """Per-user powers whose dB value is Gaussian around ``mean_power``."""
    return mean_power * 10.0 ** (std_db * rng.standard_normal(K) / 10.0)
