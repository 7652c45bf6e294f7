"""OFDM framing: subcarrier layout, transforms, cyclic prefix, pilots, training.

The occupied band (data + pilots) is split symmetrically around DC, DC itself
unused; everything outside stays zero for oversampling. Transforms use the
unitary convention so grid energy equals time-domain energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import ROLE_DATA, ROLE_NULL, ROLE_PILOT, SymbolGrid
from .core import DualPolWaveform


@dataclass(frozen=True)
class OfdmParams:
    fft_size: int = 4096
    n_data: int = 3300
    n_pilots: int = 4
    cp_fraction: float = 0.03
    sample_rate: float = 64e9
    training_period: int = 100  # total symbols per block, training included
    n_training: int = 2

    def __post_init__(self):
        occupied = self.n_data + self.n_pilots
        if occupied > self.fft_size - 1:
            raise ValueError("occupied band exceeds FFT size (DC stays unused)")
        if occupied % 2:
            raise ValueError("occupied band must split evenly around DC")
        if not 0 <= self.cp_fraction < 1:
            raise ValueError("cp_fraction out of range")
        if self.n_training >= self.training_period:
            raise ValueError("training symbols must fit inside the period")

    @property
    def cp_samples(self) -> int:
        return round(self.cp_fraction * self.fft_size)

    @property
    def symbol_samples(self) -> int:
        return self.fft_size + self.cp_samples

    @property
    def subcarrier_spacing(self) -> float:
        return self.sample_rate / self.fft_size


@dataclass(frozen=True)
class FrameLayout:
    """FFT-bin indices of each subcarrier role, ascending in frequency."""

    occupied_bins: np.ndarray
    data_bins: np.ndarray
    pilot_bins: np.ndarray
    role: np.ndarray


def frame_layout(params: OfdmParams) -> FrameLayout:
    n = params.fft_size
    half = (params.n_data + params.n_pilots) // 2
    occupied = np.r_[np.arange(n - half, n), np.arange(1, half + 1)]
    # pilots at fixed fractions of the occupied band
    pilot_pos = np.round((params.n_data + params.n_pilots)
                         * np.arange(1, 2 * params.n_pilots, 2)
                         / (2 * params.n_pilots)).astype(int)
    pilot_bins = occupied[pilot_pos]
    data_mask = np.ones(occupied.size, dtype=bool)
    data_mask[pilot_pos] = False
    data_bins = occupied[data_mask]
    role = np.full(n, ROLE_NULL, dtype=np.uint8)
    role[data_bins] = ROLE_DATA
    role[pilot_bins] = ROLE_PILOT
    return FrameLayout(occupied, data_bins, pilot_bins, role)


def make_data_grid(data: np.ndarray, params: OfdmParams) -> SymbolGrid:
    """Place (n_symbols, n_data) payload symbols on their bins; pilots stay zero."""
    data = np.atleast_2d(np.asarray(data, dtype=np.complex128))
    if data.shape[1] != params.n_data:
        raise ValueError(f"expected {params.n_data} data symbols per row")
    layout = frame_layout(params)
    symbols = np.zeros((data.shape[0], params.fft_size), dtype=np.complex128)
    symbols[:, layout.data_bins] = data
    grid = SymbolGrid(symbols, layout.role, params.n_data)
    return grid


def extract_data(grid: SymbolGrid, params: OfdmParams) -> np.ndarray:
    layout = frame_layout(params)
    return grid.symbols[:, layout.data_bins]


def training_row_mask(n_rows: int, params: OfdmParams) -> np.ndarray:
    """True for training rows: n_training at the head of every period block."""
    pos = np.arange(n_rows) % params.training_period
    return pos < params.n_training


def insert_pilots_and_training(
    grid: SymbolGrid,
    params: OfdmParams,
    pilot_values: np.ndarray,
    training_rows: np.ndarray,
) -> SymbolGrid:
    """Interleave training symbol rows and write pilot tones on every row.

    training_rows is (n_training, fft_size); its block repeats ahead of each
    training_period - n_training payload rows. Pilot values repeat every row.
    """
    layout = frame_layout(params)
    pilot_values = np.asarray(pilot_values, dtype=np.complex128)
    if pilot_values.size != params.n_pilots:
        raise ValueError("one pilot value per pilot subcarrier required")
    training_rows = np.atleast_2d(np.asarray(training_rows, dtype=np.complex128))
    if training_rows.shape != (params.n_training, params.fft_size):
        raise ValueError("training block shape mismatch")
    if np.any(training_rows[:, layout.role == ROLE_NULL] != 0):
        raise ValueError("training rows must keep null subcarriers zero")

    payload_per_block = params.training_period - params.n_training
    n_payload = grid.n_symbols
    n_blocks = -(-n_payload // payload_per_block)
    rows = []
    for b in range(n_blocks):
        rows.append(training_rows)
        rows.append(grid.symbols[b * payload_per_block:(b + 1) * payload_per_block])
    symbols = np.vstack(rows)
    symbols[:, layout.pilot_bins] = pilot_values[None, :]
    return SymbolGrid(symbols, layout.role, params.n_data)


def ofdm_modulate(grid_x: SymbolGrid, grid_y: SymbolGrid, params: OfdmParams) -> DualPolWaveform:
    """Unitary inverse transform per symbol, cyclic prefix prepended."""
    if grid_x.symbols.shape != grid_y.symbols.shape:
        raise ValueError("polarization grids must have identical shape")
    if grid_x.symbols.shape[1] != params.fft_size:
        raise ValueError("grid width must equal fft_size")

    def pol(symbols):
        body = np.fft.ifft(symbols, axis=1, norm="ortho")
        cp = body[:, -params.cp_samples:] if params.cp_samples else body[:, :0]
        return np.hstack([cp, body]).reshape(-1)

    return DualPolWaveform(pol(grid_x.symbols), pol(grid_y.symbols), params.sample_rate)


def ofdm_demodulate(wave: DualPolWaveform, params: OfdmParams):
    """Strip cyclic prefixes and forward-transform; returns one grid per polarization."""
    step = params.symbol_samples
    if wave.n_samples % step:
        raise ValueError(f"waveform length {wave.n_samples} not a multiple of {step}")
    layout = frame_layout(params)

    def pol(v):
        body = v.reshape(-1, step)[:, params.cp_samples:]
        return np.fft.fft(body, axis=1, norm="ortho")

    sx, sy = pol(wave.x), pol(wave.y)
    # anything outside the occupied band is oversampling guard, not payload
    sx[:, layout.role == ROLE_NULL] = 0
    sy[:, layout.role == ROLE_NULL] = 0
    return (
        SymbolGrid(sx, layout.role, params.n_data),
        SymbolGrid(sy, layout.role, params.n_data),
    )


def net_bit_rate(params: OfdmParams, bits_per_data_subcarrier: int = 4) -> float:
    """Payload rate after CP and training overhead, bit/s."""
    training_eff = 1 - params.n_training / params.training_period
    return (
        params.sample_rate
        * (params.n_data / params.fft_size)
        * bits_per_data_subcarrier
        / (1 + params.cp_fraction)
        * training_eff
    )


def export_layout_manifest(params: OfdmParams, path) -> None:
    """Subcarrier role map as text, one "bin role" line per occupied bin."""
    from .coding import ROLE_NAMES

    layout = frame_layout(params)
    with open(path, "w") as fh:
        fh.write(f"# fft_size={params.fft_size} cp_samples={params.cp_samples} "
                 f"sample_rate={params.sample_rate!r}\n")
        for b in layout.occupied_bins:
            fh.write(f"{b} {ROLE_NAMES[layout.role[b]]}\n")
