"""Numerical checks of detector thermalization in KMS states.

Modules: geometry (worldlines, frames, Fermi normal coordinates), correlators
(pulled-back two-point kernels), fourier (spectral transforms), detector
(transition probabilities), thermometry (temperature estimates and KMS
checks), config and cli (scenario runner).
"""

__version__ = "0.1.0"
