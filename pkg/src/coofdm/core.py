"""Foundational types: dual-polarization waveforms, bit streams, seeded RNG.

All fields are double-precision complex; long-haul split-step accumulates
phase that single precision cannot hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DualPolWaveform:
    """Sampled complex baseband field on two polarizations."""

    x: np.ndarray
    y: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.complex128)
        y = np.asarray(self.y, dtype=np.complex128)
        if x.ndim != 1 or y.ndim != 1:
            raise ValueError("polarization fields must be 1-d sample vectors")
        if x.size == 0 or x.size != y.size:
            raise ValueError("x and y must have identical nonzero length")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self) -> int:
        return self.x.size

    @property
    def total_power(self) -> float:
        """Mean of |x|^2 + |y|^2 over the capture (both polarizations)."""
        p = float(np.mean(np.abs(self.x) ** 2 + np.abs(self.y) ** 2))
        if not np.isfinite(p):
            raise FloatingPointError("waveform power is not finite")
        return p

    def scaled(self, factor: complex) -> "DualPolWaveform":
        return DualPolWaveform(self.x * factor, self.y * factor, self.sample_rate)


@dataclass(frozen=True)
class BitStream:
    """Binary payload plus the seed that generated it."""

    bits: np.ndarray
    seed: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.size and not np.all((bits == 0) | (bits == 1)):
            raise ValueError("bit values restricted to {0, 1}")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return int(self.bits.size)


class RandomSource:
    """Counter-based generator (Philox) so runs with distinct seeds are
    independent and a fixed seed reproduces the exact sample sequence."""

    def __init__(self, seed: int, _seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self._seq = np.random.SeedSequence(self.seed) if _seq is None else _seq
        self.generator = np.random.Generator(np.random.Philox(self._seq))

    def spawn(self, n: int) -> list["RandomSource"]:
        """Derive n independent child sources; deterministic in the parent seed."""
        return [RandomSource(self.seed, _seq=s) for s in self._seq.spawn(n)]


def prbs_generate(seed: int, n: int) -> BitStream:
    """Pseudo-random binary sequence of length n.

    Realized as a seeded uniform bit draw rather than an LFSR polynomial;
    the generating polynomial is not part of the contract.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = RandomSource(seed)
    bits = rng.generator.integers(0, 2, size=n, dtype=np.uint8)
    return BitStream(bits=bits, seed=seed)


def gaussian_noise(rng: RandomSource, n: int, variance_per_component: float) -> np.ndarray:
    """n complex samples; re/im independent, zero mean, given variance each."""
    if variance_per_component < 0:
        raise ValueError("variance_per_component must be non-negative")
    if variance_per_component == 0:
        return np.zeros(n, dtype=np.complex128)
    sigma = np.sqrt(variance_per_component)
    re = rng.generator.normal(0.0, sigma, size=n)
    im = rng.generator.normal(0.0, sigma, size=n)
    return re + 1j * im


def _format_pol(v: np.ndarray) -> str:
    # repr of Python floats round-trips exactly
    return " ".join(f"{float(s.real)!r},{float(s.imag)!r}" for s in v)


def _parse_pol(line: str) -> np.ndarray:
    pairs = line.split()
    out = np.empty(len(pairs), dtype=np.complex128)
    for i, p in enumerate(pairs):
        re, im = p.split(",")
        out[i] = complex(float(re), float(im))
    return out


def save_waveform(wave: DualPolWaveform, path) -> None:
    """Plain-text dump: header, then one "re,im re,im ..." line per polarization."""
    with open(path, "w") as fh:
        fh.write("# dualpol-waveform v1\n")
        fh.write(f"# sample_rate={wave.sample_rate!r}\n")
        fh.write(f"# length={wave.n_samples}\n")
        fh.write(_format_pol(wave.x) + "\n")
        fh.write(_format_pol(wave.y) + "\n")


def load_waveform(path) -> DualPolWaveform:
    sample_rate = None
    length = None
    pols = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "sample_rate=" in line:
                    sample_rate = float(line.split("=", 1)[1])
                elif "length=" in line:
                    length = int(line.split("=", 1)[1])
                continue
            pols.append(_parse_pol(line))
    if sample_rate is None or len(pols) != 2:
        raise ValueError(f"{path}: not a dualpol-waveform dump")
    wave = DualPolWaveform(pols[0], pols[1], sample_rate)
    if length is not None and wave.n_samples != length:
        raise ValueError(f"{path}: header length {length} != {wave.n_samples} samples")
    return wave
