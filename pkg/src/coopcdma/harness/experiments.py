"""BER experiments: versus symbol index, SNR and number of users.

Every experiment runs ``cfg.packets`` independent trials per arm and
aggregates bit errors over trials.  Trials never share mutable state, so they
may run on a thread pool; results are collected in trial order and the
emitted records do not depend on the thread count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .simulate import run_trial

log = logging.getLogger(__name__)

BITS_PER_SYMBOL = 2
STEADY = -1  # bucket id of the steady-state (post warm-up) record


@dataclass(frozen=True)
class BerRecord:
    scheme: str
    snr_db: float
    K: int
    G: int
    n_r: int
    bucket: int
    bit_errors: int
    bits: int
    ber: float
    seed: int

    def __post_init__(self):
        if self.bits <= 0:
            raise ValueError("a record must count at least one bit")

    def sort_key(self):
        return (self.scheme, self.snr_db, self.K, self.G, self.n_r, self.bucket)


def make_record(scheme, snr_db, K, G, n_r, bucket, bit_errors, bits, seed):
    bit_errors, bits = int(bit_errors), int(bits)
    if bits <= 0:
        raise ValueError("a record must count at least one bit")
    return BerRecord(scheme, float(snr_db), int(K), int(G), int(n_r), int(bucket),
                     bit_errors, bits, bit_errors / bits, int(seed))


def arm_labels(cfg, scheme, K):
    """``(G, n_r)`` as reported: G only applies to the allocating scheme."""
    n_r = 0 if scheme == "BNCIS" else cfg.n_r
    G = min(cfg.G, K) if scheme == "BJPAIS_GBC" else 0
    return G, n_r


def run_trials(cfg, scheme, snr_db, K=None, threads=1):
    """``(packets, P)`` per-symbol bit errors of the counted users, in trial order."""
    def one(t):
        return run_trial(cfg, scheme, snr_db, t, K).bit_errors

    if threads > 1 and cfg.packets > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(cfg.packets)))
    else:
        rows = [one(t) for t in range(cfg.packets)]
    return np.stack(rows)


def _steady_record(cfg, scheme, snr_db, K, errs):
    G, n_r = arm_labels(cfg, scheme, K)
    tail = errs[:, cfg.warmup:]
    return make_record(scheme, snr_db, K, G, n_r, STEADY, tail.sum(),
                       tail.size * BITS_PER_SYMBOL, cfg.seed)


def run_ber_vs_symbols(cfg, threads=1):
    """Bucketed BER over the packet plus one steady-state record per scheme.

    Buckets are ``cfg.bucket`` symbols wide (the last may be shorter); bucket
    ``-1`` counts symbols from ``cfg.warmup`` on.
    """
    records = []
    for scheme in cfg.scheme:
        log.info("ber-vs-symbols: %s", scheme)
        errs = run_trials(cfg, scheme, cfg.snr_db, threads=threads)
        G, n_r = arm_labels(cfg, scheme, cfg.K)
        for b, start in enumerate(range(0, cfg.P, cfg.bucket)):
            chunk = errs[:, start:start + cfg.bucket]
            records.append(make_record(scheme, cfg.snr_db, cfg.K, G, n_r, b, chunk.sum(),
                                       chunk.size * BITS_PER_SYMBOL, cfg.seed))
        records.append(_steady_record(cfg, scheme, cfg.snr_db, cfg.K, errs))
    return sorted(records, key=BerRecord.sort_key)


def run_ber_vs_snr(cfg, threads=1):
    if not cfg.sweep_snr_db:
        raise ConfigError("sweep.snr_db", "ber-vs-snr needs a [sweep] snr_db list")
    records = []
    for scheme in cfg.scheme:
        for snr in cfg.sweep_snr_db:
            log.info("ber-vs-snr: %s at %.1f dB", scheme, snr)
            errs = run_trials(cfg, scheme, snr, threads=threads)
            records.append(_steady_record(cfg, scheme, snr, cfg.K, errs))
    return sorted(records, key=BerRecord.sort_key)


def run_ber_vs_users(cfg, threads=1):
    if not cfg.sweep_K:
        raise ConfigError("sweep.K", "ber-vs-users needs a [sweep] K list")
    if cfg.desired_user >= min(cfg.sweep_K):
        raise ConfigError("desired_user", "must index a user for every K in the sweep")
    records = []
    for scheme in cfg.scheme:
        for K in cfg.sweep_K:
            log.info("ber-vs-users: %s with K=%d", scheme, K)
            errs = run_trials(cfg, scheme, cfg.snr_db, K=K, threads=threads)
            records.append(_steady_record(cfg, scheme, cfg.snr_db, K, errs))
    return sorted(records, key=BerRecord.sort_key)


def max_supported_users(records, scheme, target):
    """Largest K whose steady BER is at most ``target``, or 0 if none.

    Only K values at or below the first failing point count, so a lucky
    point beyond a failure does not raise the capacity.
    """
    pts = sorted((r.K, r.ber) for r in records if r.scheme == scheme and r.bucket == STEADY)
    best = 0
    for K, ber in pts:
        if ber > target:
            break
        best = K
    return best


def aggregate_ber(records):
    bits = sum(r.bits for r in records)
    return sum(r.bit_errors for r in records) / bits if bits else float("nan")
