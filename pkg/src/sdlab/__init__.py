"""Deprivation-test laboratory: awareness dynamics, chaos diagnostics, simulated
subjects, a cognitive battery and the deprivation protocol with twin control."""

__version__ = "0.1.0"
