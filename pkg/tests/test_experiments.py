import json

import numpy as np
import pytest

from coopcdma.errors import ConfigError
from coopcdma.harness import experiments as ex
from coopcdma.harness.config import SimConfig
from coopcdma.harness.results import HEADER, emit_results, manifest_path, read_results
from coopcdma.harness.simulate import derotated_bit_errors, link_signatures, run_trial

SMALL = SimConfig(K=3, G=2, N=8, L=2, n_r=1, P=120, packets=2, warmup=40, bucket=50,
                  group_window=20, scheme=("BJPAIS_GBC", "BCIS", "BNCIS"), seed=7)


# --- records and CSV

def _records(rng, n):
    out = []
    for i in range(n):
        bits = int(rng.integers(1, 5000))
        out.append(ex.make_record(["BCIS", "BNCIS"][i % 2], float(i % 7), 8, 0, 2, i,
                                  rng.integers(0, bits + 1), bits, 3))
    return out


def test_record_rejects_zero_bits():
    with pytest.raises(ValueError):
        ex.make_record("BCIS", 15.0, 8, 0, 2, 0, 0, 0, 1)


def test_csv_round_trip_empty(tmp_path):
    path = tmp_path / "r.csv"
    emit_results([], path)
    assert path.read_text() == ",".join(HEADER) + "\n"
    assert read_results(path) == []


def test_csv_round_trip_single(tmp_path, rng):
    path = tmp_path / "r.csv"
    recs = _records(rng, 1)
    emit_results(recs, path)
    assert read_results(path) == recs


def test_csv_round_trip_many_aggregate(tmp_path, rng):
    path = tmp_path / "r.csv"
    recs = _records(rng, 10_000)
    emit_results(recs, path)
    back = read_results(path)
    assert sorted(back, key=ex.BerRecord.sort_key) == sorted(recs, key=ex.BerRecord.sort_key)
    assert abs(ex.aggregate_ber(back) - ex.aggregate_ber(recs)) <= 1e-12


def test_csv_rows_sorted_and_manifest(tmp_path, rng):
    path = tmp_path / "r.csv"
    recs = _records(rng, 20)
    emit_results(recs[::-1], path, SMALL, command="ber-vs-symbols")
    back = read_results(path)
    assert back == sorted(back, key=ex.BerRecord.sort_key)
    man = json.loads(manifest_path(path).read_text())
    assert man["seed"] == 7 and man["records"] == 20 and man["command"] == "ber-vs-symbols"
    assert man["config"]["K"] == 3 and man["config"]["scheme"] == list(SMALL.scheme)


def test_read_results_rejects_bad_header(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_results(path)


def test_emit_reports_unwritable_path(tmp_path):
    with pytest.raises(OSError, match="cannot write"):
        emit_results([], tmp_path / "missing" / "r.csv")


def test_max_supported_users():
    recs = [ex.make_record("BCIS", 15, K, 0, 2, ex.STEADY, e, 1000, 0)
            for K, e in [(2, 0), (4, 5), (6, 30), (8, 2)]]
    assert ex.max_supported_users(recs, "BCIS", 0.01) == 4
    assert ex.max_supported_users(recs, "BCIS", 1e-6) == 2
    assert ex.max_supported_users(recs, "BNCIS", 0.5) == 0


# --- metric helpers

def test_derotation_picks_best_quadrant(rng):
    from coopcdma.sigmodel import random_qpsk
    b = random_qpsk(rng, 50)
    assert derotated_bit_errors(b * 1j, b).sum() == 0
    errs = derotated_bit_errors(-b, b)
    assert errs.shape == (50,) and errs.sum() == 0


def test_link_signatures_normalizes_and_drops_dead_links(rng):
    sig = rng.standard_normal((2, 3, 4)) + 0j
    amps = np.array([[1.0, 2.0, 0.0], [0.5, 0.5, 0.5]])
    out = link_signatures(sig * amps[..., None], amps)
    assert not np.any(out[0, 2])
    assert np.allclose(np.linalg.norm(out.reshape(2, -1), axis=1), 1.0)
    ref = sig[1] / np.linalg.norm(sig[1])
    assert np.allclose(out[1], ref)


# --- trials and experiments

def test_trial_is_deterministic():
    a = run_trial(SMALL, "BJPAIS_GBC", 10.0, 1)
    b = run_trial(SMALL, "BJPAIS_GBC", 10.0, 1)
    assert np.array_equal(a.bit_errors, b.bit_errors) and a.group == b.group
    assert len(a.group) == SMALL.G


def test_genie_noiseless_single_user_is_error_free():
    cfg = SimConfig(K=1, G=1, L=1, N=8, n_r=2, P=60, packets=2, warmup=10, group_window=10)
    for scheme_cfg in (cfg, cfg.replace(n_r=0)):
        res = run_trial(scheme_cfg, "MMSE_GENIE", 120.0, 0)
        assert res.bit_errors.sum() == 0


def test_genie_ber_falls_with_snr():
    cfg = SimConfig(K=4, G=2, N=8, L=2, n_r=1, P=400, packets=4, warmup=0, group_window=20,
                    scheme=("MMSE_GENIE",), sweep_snr_db=(-5.0, 5.0, 15.0))
    recs = ex.run_ber_vs_snr(cfg)
    bers = [r.ber for r in sorted(recs, key=lambda r: r.snr_db)]
    assert bers[0] > bers[1] >= bers[2]


def test_ber_vs_symbols_conserves_bits():
    recs = ex.run_ber_vs_symbols(SMALL)
    for scheme in SMALL.scheme:
        mine = [r for r in recs if r.scheme == scheme]
        buckets = [r for r in mine if r.bucket != ex.STEADY]
        steady = [r for r in mine if r.bucket == ex.STEADY]
        assert len(buckets) == 3 and len(steady) == 1
        assert sum(r.bits for r in buckets) == SMALL.packets * SMALL.P * 2
        assert steady[0].bits == SMALL.packets * (SMALL.P - SMALL.warmup) * 2
        G, n_r = ex.arm_labels(SMALL, scheme, SMALL.K)
        assert all((r.G, r.n_r) == (G, n_r) for r in mine)
    assert recs == sorted(recs, key=ex.BerRecord.sort_key)


def test_threads_do_not_change_results():
    one = ex.run_ber_vs_symbols(SMALL.replace(scheme=("BCIS",)), threads=1)
    many = ex.run_ber_vs_symbols(SMALL.replace(scheme=("BCIS",)), threads=3)
    assert one == many


def test_sweeps_need_values():
    with pytest.raises(ConfigError):
        ex.run_ber_vs_snr(SMALL)
    with pytest.raises(ConfigError):
        ex.run_ber_vs_users(SMALL)
    with pytest.raises(ConfigError):
        ex.run_ber_vs_users(SMALL.replace(desired_user=2, sweep_K=(2, 3)))


def test_ber_vs_users_labels():
    cfg = SMALL.replace(scheme=("BJPAIS_GBC",), sweep_K=(2, 3), packets=1)
    recs = ex.run_ber_vs_users(cfg)
    assert [(r.K, r.G) for r in recs] == [(2, 2), (3, 2)]
