"""Entropy-based word confidence for greedy CTC and RNN-T decoding."""

__version__ = "0.1.0"
