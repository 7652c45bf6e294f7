"""Constellation maps and the four subcarrier coding schemes.

Schemes share one interface and all consume 4 bits per data subcarrier per
OFDM symbol (counting both polarizations), so launch-power sweeps compare
equal net rates:

  lpc-pcts    pairs of QPSK symbols combined as A1 + A2/2 onto every data
              subcarrier of x, conjugate twin on y
  pctw-16qam  16-QAM on x, conjugate twin on y
  pcsc        conjugate-pair coding across adjacent subcarriers, each
              polarization carrying independent data
  pdm-4qam    plain QPSK, independent on both polarizations
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .core import BitStream

ROLE_NULL = 0
ROLE_DATA = 1
ROLE_PILOT = 2

ROLE_NAMES = {ROLE_NULL: "null", ROLE_DATA: "data", ROLE_PILOT: "pilot"}


@dataclass(frozen=True)
class SymbolGrid:
    """Frequency-domain OFDM payload for one polarization.

    symbols: (n_ofdm_symbols, n_subcarriers) complex matrix in FFT bin order.
    role:    per-subcarrier tag, identical for every OFDM symbol.
    """

    symbols: np.ndarray
    role: np.ndarray
    n_data: int

    def __post_init__(self):
        symbols = np.atleast_2d(np.asarray(self.symbols, dtype=np.complex128))
        role = np.asarray(self.role, dtype=np.uint8)
        if symbols.shape[1] != role.size:
            raise ValueError("role map length must match subcarrier count")
        if int(np.sum(role == ROLE_DATA)) != self.n_data:
            raise ValueError("n_data disagrees with role map")
        if np.any(symbols[:, role == ROLE_NULL] != 0):
            raise ValueError("null subcarriers must be exactly zero")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "role", role)

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[0]

    def with_symbols(self, symbols: np.ndarray) -> "SymbolGrid":
        return SymbolGrid(symbols, self.role, self.n_data)


@dataclass(frozen=True)
class Constellation:
    """Index-ordered symbol alphabet with its bit labeling.

    points are stored pre-normalization; mean_power declares their average
    |point|^2 so encoders can rescale to unit mean power.
    """

    name: str
    points: np.ndarray
    bits_per_symbol: int
    labels: np.ndarray  # (n_points, bits_per_symbol), labels[i] maps to points[i]
    mean_power: float

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.complex128)
        labels = np.asarray(self.labels, dtype=np.uint8)
        if points.size != 2 ** self.bits_per_symbol:
            raise ValueError("alphabet size must be 2^bits_per_symbol")
        if labels.shape != (points.size, self.bits_per_symbol):
            raise ValueError("label table shape mismatch")
        if abs(np.mean(np.abs(points) ** 2) - self.mean_power) > 1e-12 * self.mean_power:
            raise ValueError("declared mean_power disagrees with points")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def scale(self) -> float:
        """Divide points by this for unit mean power."""
        return float(np.sqrt(self.mean_power))

    def min_distance(self) -> float:
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(np.min(d[~np.eye(self.points.size, dtype=bool)]))


def _label_table(bits_per_symbol: int) -> np.ndarray:
    n = 2 ** bits_per_symbol
    idx = np.arange(n, dtype=np.uint32)
    return ((idx[:, None] >> np.arange(bits_per_symbol - 1, -1, -1)) & 1).astype(np.uint8)


# Gray tables are fixed here; the bit maps are a declared convention.
_QPSK_POINTS = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j])  # index = b0*2 + b1
_QAM16_I = np.array([-3.0, -1.0, 3.0, 1.0])  # index = b0*2 + b1
_QAM16_Q = np.array([3.0, 1.0, -3.0, -1.0])  # index = b2*2 + b3


def qpsk_constellation() -> Constellation:
    return Constellation("qpsk", _QPSK_POINTS, 2, _label_table(2), 2.0)


def qam16_constellation() -> Constellation:
    idx = np.arange(16)
    points = _QAM16_I[idx >> 2] + 1j * _QAM16_Q[idx & 3]
    return Constellation("qam16", points, 4, _label_table(4), 10.0)


def lpc_alphabet(ratio: float = 0.5) -> Constellation:
    """16-point alphabet {a + ratio*b : a, b QPSK}.

    ratio = 1/2 gives the uniform grid {+-0.5, +-1.5}^2 pre-normalization,
    which maximizes the minimum pairwise distance over ratio in (0, 1).
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must be inside (0, 1)")
    idx = np.arange(16)
    points = _QPSK_POINTS[idx >> 2] + ratio * _QPSK_POINTS[idx & 3]
    return Constellation(f"lpc-r{ratio:g}", points, 4, _label_table(4), 2 + 2 * ratio ** 2)


def _as_bits(bits) -> np.ndarray:
    if isinstance(bits, BitStream):
        return bits.bits
    return np.asarray(bits, dtype=np.uint8)


def _bits_to_indices(bits: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    b = bits.reshape(-1, bits_per_symbol).astype(np.uint32)
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1, dtype=np.uint32)
    return b @ weights


def qpsk_map(bits) -> np.ndarray:
    """Bit pairs to {+1+i, -1+i, -1-i, +1-i} (pre-normalization Gray map)."""
    b = _as_bits(bits)
    if b.size % 2:
        raise ValueError("bit count must be divisible by 2")
    return _QPSK_POINTS[_bits_to_indices(b, 2)]


def qam16_map(bits) -> np.ndarray:
    """Bit quads to the Gray-labeled {+-1, +-3}^2 grid (pre-normalization)."""
    b = _as_bits(bits)
    if b.size % 4:
        raise ValueError("bit count must be divisible by 4")
    idx = _bits_to_indices(b, 4)
    return _QAM16_I[idx >> 2] + 1j * _QAM16_Q[idx & 3]


def ml_detect(r: np.ndarray, alphabet: Constellation) -> np.ndarray:
    """Index of the nearest alphabet point; ties resolve to the lowest index."""
    r = np.asarray(r)
    d = np.abs(r.reshape(-1, 1) - alphabet.points[None, :])
    return np.argmin(d, axis=1).reshape(r.shape)


def lut_decode(indices: np.ndarray, alphabet: Constellation) -> np.ndarray:
    """Alphabet indices back to their bit labels, concatenated."""
    idx = np.asarray(indices, dtype=np.int64)
    if np.any(idx < 0) or np.any(idx >= alphabet.points.size):
        raise ValueError("codeword index out of range")
    return alphabet.labels[idx.reshape(-1)].reshape(-1)


def _require_qpsk(a: np.ndarray):
    d = np.min(np.abs(a.reshape(-1, 1) - _QPSK_POINTS[None, :]), axis=1)
    if np.any(d > 1e-9):
        raise ValueError("input symbols must come from the QPSK alphabet")


def lpc_encode(a: np.ndarray, normalize: bool = True):
    """Combine neighbouring QPSK symbols, Sx(k) = A(2k-1) + A(2k)/2, Sy = Sx*.

    a has an even number of symbols along its last axis; output is half as wide.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.shape[-1] % 2:
        raise ValueError("symbol count must be even")
    _require_qpsk(a)
    sx = a[..., 0::2] + 0.5 * a[..., 1::2]
    if normalize:
        sx = sx / np.sqrt(2.5)
    return sx, np.conj(sx)


def coherent_superpose(bx: np.ndarray, by: np.ndarray):
    """Receiver combining Rx = (Bx + By*)/2, Ry = (Bx* + By)/2; Ry = Rx*."""
    rx = 0.5 * (bx + np.conj(by))
    return rx, np.conj(rx)


def pctw_encode(s: np.ndarray):
    """Conjugate twin: x carries the input, y its element-wise conjugate."""
    s = np.asarray(s, dtype=np.complex128)
    return s, np.conj(s)


def pcsc_encode(a: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Conjugate-pair coding across adjacent subcarriers, one polarization.

    S(2k-1) = (A(2k-1) + A(2k))/sqrt(2), S(2k) = (A*(2k-1) - A*(2k))/sqrt(2).
    The transform is unitary, so mean power is preserved.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.shape[-1] % 2:
        raise ValueError("symbol count must be even")
    s = np.empty_like(a)
    s[..., 0::2] = (a[..., 0::2] + a[..., 1::2]) / np.sqrt(2)
    s[..., 1::2] = (np.conj(a[..., 0::2]) - np.conj(a[..., 1::2])) / np.sqrt(2)
    if normalize:
        s = s / np.sqrt(2)  # QPSK inputs have mean power 2
    return s


def pcsc_decode(r: np.ndarray) -> np.ndarray:
    """Inverse of pcsc_encode (up to the QPSK power normalization)."""
    r = np.asarray(r, dtype=np.complex128)
    if r.shape[-1] % 2:
        raise ValueError("symbol count must be even")
    a = np.empty_like(r)
    a[..., 0::2] = (r[..., 0::2] + np.conj(r[..., 1::2])) / np.sqrt(2)
    a[..., 1::2] = (r[..., 0::2] - np.conj(r[..., 1::2])) / np.sqrt(2)
    return a


class CodingScheme(ABC):
    """Bit-level codec for one OFDM symbol row of data subcarriers.

    encode maps a flat bit array onto unit-mean-power data matrices for both
    polarizations; decode inverts it from the equalized data matrices.
    """

    name: str
    conjugate_twin: bool
    bits_per_pair = 8  # per subcarrier pair, both polarizations together

    def bits_per_symbol(self, n_data: int) -> int:
        return 4 * n_data

    def _shape(self, bits, n_data: int) -> np.ndarray:
        b = _as_bits(bits)
        per = self.bits_per_symbol(n_data)
        if n_data < 1 or (self.name in ("lpc-pcts", "pcsc") and n_data % 2):
            raise ValueError(f"{self.name}: n_data must be even")
        if b.size == 0 or b.size % per:
            raise ValueError(f"bit count must be a nonzero multiple of {per}")
        return b.reshape(-1, per)

    @abstractmethod
    def encode(self, bits, n_data: int):
        """bits -> (data_x, data_y), each (n_symbols, n_data), unit mean power."""

    @abstractmethod
    def decode(self, bx: np.ndarray, by: np.ndarray) -> np.ndarray:
        """Equalized data matrices -> flat bit array."""


class LpcPctsScheme(CodingScheme):
    name = "lpc-pcts"
    conjugate_twin = True

    def __init__(self, ratio: float = 0.5):
        self.alphabet = lpc_alphabet(ratio)
        self._ratio = ratio

    def encode(self, bits, n_data: int):
        b = self._shape(bits, n_data)
        a = qpsk_map(b.reshape(-1)).reshape(-1, 2 * n_data)
        sx = (a[:, 0::2] + self._ratio * a[:, 1::2]) / self.alphabet.scale
        return sx, np.conj(sx)

    def decode(self, bx, by):
        rx, _ = coherent_superpose(bx, by)
        idx = ml_detect(rx * self.alphabet.scale, self.alphabet)
        return lut_decode(idx, self.alphabet)


class Pctw16QamScheme(CodingScheme):
    name = "pctw-16qam"
    conjugate_twin = True

    def __init__(self):
        self.alphabet = qam16_constellation()

    def encode(self, bits, n_data: int):
        b = self._shape(bits, n_data)
        s = qam16_map(b.reshape(-1)).reshape(-1, n_data) / self.alphabet.scale
        return pctw_encode(s)

    def decode(self, bx, by):
        rx, _ = coherent_superpose(bx, by)
        idx = ml_detect(rx * self.alphabet.scale, self.alphabet)
        return lut_decode(idx, self.alphabet)


class PcscScheme(CodingScheme):
    name = "pcsc"
    conjugate_twin = False

    def __init__(self):
        self.alphabet = qpsk_constellation()

    def encode(self, bits, n_data: int):
        b = self._shape(bits, n_data)
        half = b.shape[1] // 2
        ax = qpsk_map(b[:, :half].reshape(-1)).reshape(-1, n_data)
        ay = qpsk_map(b[:, half:].reshape(-1)).reshape(-1, n_data)
        return pcsc_encode(ax), pcsc_encode(ay)

    def decode(self, bx, by):
        out = []
        for r in (bx, by):
            a = pcsc_decode(r)  # undoes the unitary pairing, still unit power
            idx = ml_detect(a * np.sqrt(2), self.alphabet)
            out.append(lut_decode(idx, self.alphabet))
        # per OFDM symbol the x-pol bits precede the y-pol bits
        n_symbols = bx.shape[0]
        return np.concatenate(
            [out[0].reshape(n_symbols, -1), out[1].reshape(n_symbols, -1)], axis=1
        ).reshape(-1)


class Pdm4QamScheme(CodingScheme):
    name = "pdm-4qam"
    conjugate_twin = False

    def __init__(self):
        self.alphabet = qpsk_constellation()

    def encode(self, bits, n_data: int):
        b = self._shape(bits, n_data)
        half = b.shape[1] // 2
        sx = qpsk_map(b[:, :half].reshape(-1)).reshape(-1, n_data) / self.alphabet.scale
        sy = qpsk_map(b[:, half:].reshape(-1)).reshape(-1, n_data) / self.alphabet.scale
        return sx, sy

    def decode(self, bx, by):
        n_symbols = bx.shape[0]
        bits_x = lut_decode(ml_detect(bx * self.alphabet.scale, self.alphabet), self.alphabet)
        bits_y = lut_decode(ml_detect(by * self.alphabet.scale, self.alphabet), self.alphabet)
        return np.concatenate(
            [bits_x.reshape(n_symbols, -1), bits_y.reshape(n_symbols, -1)], axis=1
        ).reshape(-1)


SCHEMES = ("lpc-pcts", "pcsc", "pctw-16qam", "pdm-4qam")


def get_scheme(name: str) -> CodingScheme:
    table = {
        "lpc-pcts": LpcPctsScheme,
        "pcsc": PcscScheme,
        "pctw-16qam": Pctw16QamScheme,
        "pdm-4qam": Pdm4QamScheme,
    }
    if name not in table:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(table)}")
    return table[name]()


def export_constellation_table(const: Constellation, path) -> None:
    """Reference table for fixtures: one "bits index re im" line per point."""
    with open(path, "w") as fh:
        fh.write(f"# constellation {const.name}, mean power {const.mean_power!r}\n")
        for i, (pt, lab) in enumerate(zip(const.points, const.labels)):
            fh.write(f"{''.join(str(b) for b in lab)} {i} {pt.real!r} {pt.imag!r}\n")
