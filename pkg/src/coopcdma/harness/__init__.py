"""Monte Carlo BER harness: configuration, trials, experiments and output."""

from .config import SCHEMES, SimConfig, load_config, parse_config
from .experiments import BerRecord, run_ber_vs_snr, run_ber_vs_symbols, run_ber_vs_users
from .results import emit_results, read_results

__all__ = ["SCHEMES", "SimConfig", "load_config", "parse_config", "BerRecord",
           "run_ber_vs_symbols", "run_ber_vs_snr", "run_ber_vs_users", "emit_results",
           "read_results"]
