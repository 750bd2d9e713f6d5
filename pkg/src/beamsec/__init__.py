"""Beam-pair physical-layer secrecy simulator for mmWave links."""

__version__ = "0.1.0"
