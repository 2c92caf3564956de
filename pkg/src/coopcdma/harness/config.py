"""Experiment configuration: TOML text in, validated :class:`SimConfig` out.

Every top-level key is a :class:`SimConfig` field.  An optional ``[sweep]``
table holds the grids used by the SNR and user-count experiments::

    K = 8
    n_r = 2
    G = 3
    scheme = ["BJPAIS_GBC", "BCIS", "BNCIS"]

    [sweep]
    snr_db = [0, 5, 10, 15, 20]
    K = [4, 8, 12]
"""

import dataclasses
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ..errors import ConfigError

SCHEMES = ("BJPAIS_GBC", "BCIS", "BNCIS", "MMSE_GENIE")


@dataclass(frozen=True)
class SimConfig:
    K: int = 8
    N: int = 16
    L: int = 5
    n_r: int = 2
    G: int = 3
    P: int = 1500
    packets: int = 50
    snr_db: float = 15.0
    alpha: float = 0.998
    p_exponent: int = 1
    lambda_k: float = 0.025
    nu: float = 1.0
    iterations_per_symbol: int = 1
    scheme: tuple = ("BJPAIS_GBC",)
    seed: int = 0
    lognormal_std_db: float = 3.0
    # nominal user power; sigma^2 = nominal_power * 10^(-snr_db/10).  The
    # absolute scale matters because the recursion initializations are fixed
    # and the CM cost targets unit modulus; 3 gives unit per-link amplitudes
    # under an equal split over three links
    nominal_power: float = 3.0
    # recursion initialization: P_hat = pmat_init * I, inverse covariance = I / delta
    pmat_init: float = 0.01
    delta: float = 100.0
    # reporting
    warmup: int = 500
    bucket: int = 50
    desired_user: int = 0
    # protocol
    group_window: int = 50
    feedback_lag: int = 2
    # decode-and-forward relays buffer the packet: adaptation passes, then
    # optional re-detection with the converged filters
    relay_passes: int = 1
    relay_redetect: bool = True
    sweep_snr_db: tuple = field(default=())
    sweep_K: tuple = field(default=())

    @property
    def M(self):
        return self.N + self.L - 1

    def replace(self, **changes):
        return validate(dataclasses.replace(self, **changes))


_INT_FIELDS = {"K", "N", "L", "n_r", "G", "P", "packets", "p_exponent", "iterations_per_symbol",
               "seed", "warmup", "bucket", "desired_user", "group_window", "feedback_lag",
               "relay_passes"}
_BOOL_FIELDS = {"relay_redetect"}
_FLOAT_FIELDS = {"snr_db", "alpha", "lambda_k", "nu", "lognormal_std_db", "nominal_power", "pmat_init", "delta"}
_SWEEP_KEYS = {"snr_db": "sweep_snr_db", "K": "sweep_K"}
_TOP_KEYS = {f.name for f in dataclasses.fields(SimConfig)} - set(_SWEEP_KEYS.values())


def _as_int(key, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    return value


def _as_float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    return float(value)


def parse_schemes(value):
    names = [value] if isinstance(value, str) else value
    if not isinstance(names, (list, tuple)) or not names:
        raise ConfigError("scheme", "expected a scheme name or a non-empty list of names")
    out = []
    for name in names:
        canon = str(name).upper().replace("-", "_")
        if canon not in SCHEMES:
            raise ConfigError("scheme", f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")
        out.append(canon)
    return tuple(dict.fromkeys(out))


def _coerce(key, value):
    if key == "scheme":
        return parse_schemes(value)
    if key in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {value!r}")
        return value
    if key in _INT_FIELDS:
        return _as_int(key, value)
    if key in _FLOAT_FIELDS:
        return _as_float(key, value)
    raise ConfigError(key, "unknown configuration key")


def _check(cond, key, message):
    if not cond:
        raise ConfigError(key, message)


def validate(cfg):
    _check(cfg.K >= 1, "K", "must be >= 1")
    _check(1 <= cfg.G <= cfg.K, "G", f"must satisfy 1 <= G <= K (K={cfg.K})")
    _check(cfg.N >= 1, "N", "must be >= 1")
    _check(cfg.L >= 1, "L", "must be >= 1")
    _check(cfg.L - 1 <= cfg.N, "L", "ISI span L-1 must not exceed N")
    _check(cfg.n_r >= 0, "n_r", "must be >= 0")
    _check(cfg.P >= 1, "P", "must be >= 1")
    _check(cfg.packets >= 1, "packets", "must be >= 1")
    _check(0.9 < cfg.alpha <= 1.0, "alpha", "must lie in (0.9, 1]")
    _check(cfg.p_exponent in (1, 2), "p_exponent", "must be 1 or 2")
    _check(cfg.iterations_per_symbol in (1, 2), "iterations_per_symbol", "must be 1 or 2")
    _check(cfg.lambda_k >= 0, "lambda_k", "must be >= 0")
    _check(cfg.nu > 0, "nu", "must be > 0")
    _check(cfg.lognormal_std_db >= 0, "lognormal_std_db", "must be >= 0")
    _check(cfg.nominal_power > 0, "nominal_power", "must be > 0")
    _check(cfg.pmat_init > 0, "pmat_init", "must be > 0")
    _check(cfg.delta > 0, "delta", "must be > 0")
    _check(0 <= cfg.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
    _check(0 <= cfg.warmup < cfg.P, "warmup", "must lie in [0, P)")
    _check(cfg.bucket >= 1, "bucket", "must be >= 1")
    _check(0 <= cfg.desired_user < cfg.K, "desired_user", "must index a user")
    _check(1 <= cfg.group_window <= cfg.P, "group_window", "must lie in [1, P]")
    _check(cfg.feedback_lag >= 2, "feedback_lag", "must be >= 2 (windows overlap the next symbol)")
    _check(cfg.relay_passes >= 1, "relay_passes", "must be >= 1")
    for k in cfg.sweep_K:
        _check(k >= 1, "K", "sweep values must be >= 1")
    return cfg


def parse_config(text):
    """Parse TOML text into a validated :class:`SimConfig`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"malformed TOML: {exc}") from exc
    values = {}
    for key, value in doc.items():
        if key == "sweep":
            if not isinstance(value, dict):
                raise ConfigError("sweep", "must be a table")
            for skey, svalue in value.items():
                if skey not in _SWEEP_KEYS:
                    raise ConfigError(f"sweep.{skey}", "unknown sweep key")
                if not isinstance(svalue, list) or not svalue:
                    raise ConfigError(f"sweep.{skey}", "expected a non-empty list")
                conv = _as_float if skey == "snr_db" else _as_int
                values[_SWEEP_KEYS[skey]] = tuple(conv(f"sweep.{skey}", v) for v in svalue)
            continue
        if key not in _TOP_KEYS:
            raise ConfigError(key, "unknown configuration key")
        values[key] = _coerce(key, value)
    return validate(SimConfig(**values))


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_to_dict(cfg):
    d = dataclasses.asdict(cfg)
    for k, v in d.items():
        if isinstance(v, tuple):
            d[k] = list(v)
    return d
