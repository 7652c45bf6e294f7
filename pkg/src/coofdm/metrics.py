"""Error counting, Q-factor conversion, error-vector statistics, and the
text formats the plotting front end consumes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcinv

from .coding import ROLE_DATA, SymbolGrid
from .core import BitStream

# column order is a published contract; downstream parsers key on it
CSV_FIELDS = ("scheme", "pre_edc", "launch_dbm", "seed", "n_bits",
              "n_errors", "ber", "q_db", "evm")

# a BER estimate below this many counted errors is statistically shaky
MIN_ERRORS_FOR_CONFIDENCE = 100


def count_ber(tx, rx) -> tuple[int, float]:
    """Hamming distance and error ratio between two equal-length bit streams."""
    a = tx.bits if isinstance(tx, BitStream) else np.asarray(tx, dtype=np.uint8)
    b = rx.bits if isinstance(rx, BitStream) else np.asarray(rx, dtype=np.uint8)
    if a.size != b.size:
        raise ValueError(f"bit stream lengths differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty bit streams")
    n_errors = int(np.count_nonzero(a != b))
    return n_errors, n_errors / a.size


def q_from_ber(ber: float) -> float:
    """Gaussian-equivalent Q in dB: 20*log10(sqrt(2)*erfcinv(2*ber))."""
    if not 0.0 < ber < 0.5:
        raise ValueError(f"q undefined for ber={ber}; report raw BER instead")
    return float(20.0 * np.log10(np.sqrt(2.0) * erfcinv(2.0 * ber)))


@dataclass(frozen=True)
class MetricsRecord:
    scheme: str
    pre_edc: float
    launch_dbm: float
    seed: int
    n_bits: int
    n_errors: int
    ber: float
    q_db: float  # NaN when ber is outside (0, 0.5)
    evm: float

    def __post_init__(self):
        if self.n_bits <= 0:
            raise ValueError("n_bits must be positive")
        if not 0 <= self.n_errors <= self.n_bits:
            raise ValueError("n_errors out of range")
        if abs(self.ber - self.n_errors / self.n_bits) > 1e-12:
            raise ValueError("ber inconsistent with counts")

    @property
    def low_confidence(self) -> bool:
        return self.n_errors < MIN_ERRORS_FOR_CONFIDENCE

    @classmethod
    def from_counts(cls, scheme: str, pre_edc: float, launch_dbm: float,
                    seed: int, n_bits: int, n_errors: int,
                    evm: float) -> "MetricsRecord":
        ber = n_errors / n_bits
        q = q_from_ber(ber) if 0.0 < ber < 0.5 else math.nan
        return cls(scheme, pre_edc, launch_dbm, seed, n_bits, n_errors,
                   ber, q, evm)


@dataclass(frozen=True)
class ErrorVectorStats:
    evm: float
    var_x: float  # mean squared error magnitude per polarization
    var_y: float
    correlation: float  # <e_x, -conj(e_y)> normalized; 1 = anti-correlated pair


def error_vector_stats(rx_x: SymbolGrid, tx_x: SymbolGrid,
                       rx_y: SymbolGrid, tx_y: SymbolGrid) -> ErrorVectorStats:
    """Second-order error statistics over the data subcarriers."""
    if rx_x.symbols.shape != tx_x.symbols.shape or rx_y.symbols.shape != tx_y.symbols.shape:
        raise ValueError("grid shapes differ")
    dx = tx_x.role == ROLE_DATA
    dy = tx_y.role == ROLE_DATA
    ex = (rx_x.symbols - tx_x.symbols)[:, dx].ravel()
    ey = (rx_y.symbols - tx_y.symbols)[:, dy].ravel()
    ref = np.concatenate([tx_x.symbols[:, dx].ravel(), tx_y.symbols[:, dy].ravel()])
    err = np.concatenate([ex, ey])
    evm = float(np.sqrt(np.sum(np.abs(err) ** 2) / np.sum(np.abs(ref) ** 2)))
    var_x = float(np.mean(np.abs(ex) ** 2)) if ex.size else 0.0
    var_y = float(np.mean(np.abs(ey) ** 2)) if ey.size else 0.0
    nx, ny = np.linalg.norm(ex), np.linalg.norm(ey)
    corr = float(np.real(-np.sum(ex * ey) / (nx * ny))) if nx > 0 and ny > 0 else 0.0
    return ErrorVectorStats(evm, var_x, var_y, corr)


def dump_constellation(grid: SymbolGrid, path, **meta) -> None:
    """Text dump of the data-subcarrier symbols, one "re,im" line each,
    preceded by "# key=value" header lines."""
    data = grid.symbols[:, grid.role == ROLE_DATA].ravel()
    with open(path, "w") as fh:
        fh.write("# constellation-dump v1\n")
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        for v in data:
            fh.write(f"{float(v.real)!r},{float(v.imag)!r}\n")


def load_constellation(path) -> tuple[np.ndarray, dict]:
    """Inverse of dump_constellation; the reference parser for the format."""
    meta: dict = {}
    points = []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != "# constellation-dump v1":
            raise ValueError("not a constellation dump")
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                meta[key] = value
            elif line:
                re_s, _, im_s = line.partition(",")
                points.append(complex(float(re_s), float(im_s)))
    return np.asarray(points, dtype=np.complex128), meta


def write_records(path, records) -> None:
    """One CSV row per experiment point, in the published column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for r in records:
            writer.writerow([
                r.scheme, repr(float(r.pre_edc)), repr(float(r.launch_dbm)),
                r.seed, r.n_bits, r.n_errors, repr(float(r.ber)),
                repr(float(r.q_db)), repr(float(r.evm)),
            ])


def read_records(path) -> list[MetricsRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_FIELDS:
            raise ValueError(f"unexpected CSV header: {header}")
        out = []
        for row in reader:
            if not row:
                continue
            scheme, pre_edc, launch, seed, n_bits, n_errors, ber, q, evm = row
            out.append(MetricsRecord(scheme, float(pre_edc), float(launch),
                                     int(seed), int(n_bits), int(n_errors),
                                     float(ber), float(q), float(evm)))
        return out
