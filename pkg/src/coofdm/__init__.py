"""Coherent optical OFDM link simulator with conjugate-twin subcarrier coding."""

__version__ = "0.1.0"

from .core import BitStream, DualPolWaveform, RandomSource  # noqa: F401
