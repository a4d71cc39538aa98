"""Entropy and delay-embedding features for EEG seizure detection."""

__version__ = "0.1.0"
