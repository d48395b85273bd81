"""Cycle-level WS/OS accelerator simulator and memory side-channel structure recovery."""

__version__ = "0.1.0"
