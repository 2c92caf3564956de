"""CSV emission of BER records and the run manifest written next to it."""

import csv
import json
from pathlib import Path

from .. import __version__
from .config import config_to_dict
from .experiments import BerRecord

HEADER = ("scheme", "snr_db", "K", "G", "n_r", "bucket", "bit_errors", "bits", "ber", "seed")

_CASTS = {"scheme": str, "snr_db": float, "K": int, "G": int, "n_r": int, "bucket": int,
          "bit_errors": int, "bits": int, "ber": float, "seed": int}


def manifest_path(path):
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def emit_results(records, path, cfg=None, command=None):
    """Write ``records`` sorted by arm and bucket, plus ``<path>.manifest.json``.

    Floats are written with ``repr`` so they survive a round trip exactly.
    I/O failures surface as ``OSError`` naming the path.
    """
    path = Path(path)
    rows = sorted(records, key=BerRecord.sort_key)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADER)
            for r in rows:
                w.writerow([r.scheme, repr(r.snr_db), r.K, r.G, r.n_r, r.bucket,
                            r.bit_errors, r.bits, repr(r.ber), r.seed])
        manifest = {
            "code_version": __version__,
            "command": command,
            "seed": None if cfg is None else cfg.seed,
            "config": None if cfg is None else config_to_dict(cfg),
            "records": len(rows),
            "ber_convention": "desired user only; best of 4 QPSK rotations per packet "
                              "(genie derotation, metric only); bucket -1 = symbols after warmup",
        }
        with open(manifest_path(path), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc


def read_results(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [BerRecord(**{k: _CASTS[k](v) for k, v in row.items()}) for row in reader]
