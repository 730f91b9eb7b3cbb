"""Slotted multiple-access simulator for a network-coding tree algorithm (NCTA) and its baselines."""

__version__ = "0.1.0"
