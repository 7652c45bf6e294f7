"""Receiver DSP: bulk CD removal by overlap-save frequency-domain
equalization, training-based one-tap channel estimation, and pilot-based
common-phase-error correction.

Edges of the capture are extended circularly; the whole simulated link is
FFT-periodic, so wrap extension is the consistent boundary treatment.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import LinkConfig, dispersion_transfer
from .coding import ROLE_NULL, ROLE_PILOT, SymbolGrid
from .core import DualPolWaveform


@dataclass(frozen=True)
class EqualizerConfig:
    block_size: int = 16384
    overlap: int = 4096
    residual_cd_fraction: float | None = None  # None: 1 - pre_edc_fraction

    def __post_init__(self):
        if self.block_size < 2 or self.block_size & (self.block_size - 1):
            raise ValueError("block_size must be a power of two")
        if not 0 < self.overlap < self.block_size:
            raise ValueError("overlap must lie inside the block")
        if self.overlap % 2:
            raise ValueError("overlap must be even (split across both edges)")


def dispersion_memory_samples(beta2: float, length: float, bandwidth: float,
                              sample_rate: float) -> int:
    """Temporal spread of the CD impulse response, in samples."""
    return int(np.ceil(2 * np.pi * abs(beta2) * length * bandwidth * sample_rate))


def _tapered_cd_filter(nb: int, sample_rate: float, accumulated: float,
                       passband: float) -> np.ndarray:
    """All-pass CD filter whose group delay is rolled off to zero across the
    guard band above `passband` (one-sided, rad/s).

    The raw sampled filter has a group-delay discontinuity at the Nyquist
    wrap, giving its impulse response slow algebraic tails that leak across
    overlap-save block edges. Flattening the delay smoothly over unoccupied
    frequencies removes the discontinuity; the passband phase is untouched.
    Only valid when the signal truly has no guard-band energy.
    """
    w = 2 * np.pi * np.fft.fftfreq(nb, 1.0 / sample_rate)
    nyquist = np.pi * sample_rate
    if passband >= nyquist:
        return dispersion_transfer(nb, sample_rate, accumulated)
    u = np.clip((np.abs(w) - passband) / (nyquist - passband), 0.0, 1.0)
    smooth = 6 * u ** 5 - 15 * u ** 4 + 10 * u ** 3
    tau = accumulated * w * (1.0 - smooth)
    # phase = integral of group delay; trapezoid is exact on the linear part
    order = np.argsort(w)
    ws, ts = w[order], tau[order]
    phi_sorted = np.concatenate(
        [[0.0], np.cumsum(0.5 * (ts[1:] + ts[:-1]) * np.diff(ws))])
    phi_sorted -= phi_sorted[np.searchsorted(ws, 0.0)]
    phi = np.empty(nb)
    phi[order] = phi_sorted
    return np.exp(1j * phi)


def cd_compensate(wave: DualPolWaveform, link: LinkConfig, eq: EqualizerConfig,
                  occupied_bandwidth: float | None = None,
                  guard_taper: bool = False) -> DualPolWaveform:
    """Remove the link CD not handled at the transmitter, blockwise.

    occupied_bandwidth (two-sided, Hz) tightens the dispersion-memory check;
    by default the full sampling bandwidth is assumed. guard_taper additionally
    smooths the filter over the guard band, which suppresses block-edge
    leakage but is only correct for strictly band-limited input.
    """
    frac = eq.residual_cd_fraction
    if frac is None:
        frac = 1.0 - link.pre_edc_fraction
    l_comp = frac * link.total_length
    if l_comp == 0:
        return wave

    bw = occupied_bandwidth if occupied_bandwidth is not None else wave.sample_rate
    memory = dispersion_memory_samples(link.fiber.beta2, l_comp, bw, wave.sample_rate)
    if memory > eq.overlap:
        warnings.warn(
            f"equalizer overlap {eq.overlap} is below the dispersion memory "
            f"{memory}; block edges will be inaccurate"
        )

    nb = eq.block_size
    ov = eq.overlap
    useful = nb - ov
    half = ov // 2
    accumulated = -link.fiber.beta2 * l_comp
    if guard_taper and occupied_bandwidth is not None:
        h = _tapered_cd_filter(nb, wave.sample_rate, accumulated,
                               np.pi * occupied_bandwidth)
    else:
        h = dispersion_transfer(nb, wave.sample_rate, accumulated)
    n = wave.n_samples

    def pol(v):
        out = np.empty(n, dtype=np.complex128)
        for start in range(0, n, useful):
            idx = (start - half + np.arange(nb)) % n
            block = np.fft.ifft(np.fft.fft(v[idx]) * h)
            keep = min(useful, n - start)
            out[start:start + keep] = block[half:half + keep]
        return out

    return DualPolWaveform(pol(wave.x), pol(wave.y), wave.sample_rate)


@dataclass(frozen=True)
class ChannelEstimate:
    """One complex tap per subcarrier per polarization."""

    taps_x: np.ndarray
    taps_y: np.ndarray
    staleness: int = 0

    def __post_init__(self):
        tx = np.asarray(self.taps_x, dtype=np.complex128)
        ty = np.asarray(self.taps_y, dtype=np.complex128)
        if tx.shape != ty.shape or tx.ndim != 1:
            raise ValueError("tap vectors must be equal-length")
        if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(ty))):
            raise ValueError("channel taps must be finite")
        object.__setattr__(self, "taps_x", tx)
        object.__setattr__(self, "taps_y", ty)


def estimate_channel(rx_x: SymbolGrid, rx_y: SymbolGrid,
                     known_x: SymbolGrid, known_y: SymbolGrid) -> ChannelEstimate:
    """Per-subcarrier least-squares taps over the training rows.

    tap = sum(rx * conj(known)) / sum(|known|^2) per bin; bins never excited
    by training keep a unit tap.
    """

    def pol(rx, known):
        if rx.symbols.shape != known.symbols.shape:
            raise ValueError("received and reference grids must match in shape")
        if rx.symbols.shape[0] < 1:
            raise ValueError("at least one training symbol required")
        active = known.role != ROLE_NULL
        if np.any(known.symbols[:, active] == 0):
            raise ValueError("zero-magnitude training reference on an active subcarrier")
        num = np.sum(rx.symbols * np.conj(known.symbols), axis=0)
        den = np.sum(np.abs(known.symbols) ** 2, axis=0)
        taps = np.ones(known.symbols.shape[1], dtype=np.complex128)
        taps[active] = num[active] / den[active]
        if np.any(taps[active] == 0) or not np.all(np.isfinite(taps)):
            raise ValueError("degenerate channel estimate")
        return taps

    return ChannelEstimate(pol(rx_x, known_x), pol(rx_y, known_y))


def apply_channel_estimate(grid: SymbolGrid, taps: np.ndarray) -> SymbolGrid:
    out = grid.symbols / taps[None, :]
    out[:, grid.role == ROLE_NULL] = 0
    return grid.with_symbols(out)


def cpe_estimate(grid: SymbolGrid, pilot_values: np.ndarray) -> np.ndarray:
    """Per-OFDM-symbol common phase from the pilot tones, unwrapped across
    symbols by nearest-branch continuation.

    pilot_values are ordered by ascending frequency (the layout convention),
    not by FFT bin index.
    """
    bins = np.where(grid.role == ROLE_PILOT)[0]
    freq = np.fft.fftfreq(grid.role.size)
    bins = bins[np.argsort(freq[bins])]
    pilot_values = np.asarray(pilot_values, dtype=np.complex128)
    if bins.size == 0 or pilot_values.size != bins.size:
        raise ValueError("one known value per pilot subcarrier required")
    rx = grid.symbols[:, bins]
    if np.all(np.abs(rx) == 0):
        raise ValueError("zero pilot energy")
    raw = np.angle(np.sum(rx * np.conj(pilot_values)[None, :], axis=1))
    phi = np.empty_like(raw)
    prev = 0.0
    for i, p in enumerate(raw):
        # slow drift may cross the +-pi branch cut between symbols
        phi[i] = prev + np.angle(np.exp(1j * (p - prev)))
        prev = phi[i]
    return phi


def cpe_apply(grid: SymbolGrid, phi: np.ndarray) -> SymbolGrid:
    return grid.with_symbols(grid.symbols * np.exp(-1j * phi)[:, None])


def cpe_correct(grid: SymbolGrid, pilot_values: np.ndarray) -> SymbolGrid:
    return cpe_apply(grid, cpe_estimate(grid, pilot_values))


def cpe_correct_pair(grid_x: SymbolGrid, grid_y: SymbolGrid,
                     pilots_x: np.ndarray, pilots_y: np.ndarray,
                     tied: bool = False):
    """Independent per-polarization CPE by default; tied mode assumes the
    conjugate polarization rotates with the opposite sign."""
    phi_x = cpe_estimate(grid_x, pilots_x)
    phi_y = cpe_estimate(grid_y, pilots_y)
    if tied:
        phi = 0.5 * (phi_x - phi_y)
        return cpe_apply(grid_x, phi), cpe_apply(grid_y, -phi)
    return cpe_apply(grid_x, phi_x), cpe_apply(grid_y, phi_y)
