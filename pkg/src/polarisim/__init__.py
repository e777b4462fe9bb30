"""Coupled-cavity vibrational polariton simulator.

Solves the patterned-cavity mode problem, builds the two-cavity
Tavis-Cummings + Lindblad model with a one-way inter-cavity photon
transfer channel, and generates linear spectra, third-order 2D IR
spectra, coherence-selective time scans, and synthetic hyperspectral
images.
"""

__version__ = "0.1.0"
