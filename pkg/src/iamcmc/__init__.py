"""Identification-aware MCMC: teleport kernels over observationally
equivalent parameter sets, local baselines, tempered SMC, exact finite-state
spectral analysis, and diagnostics."""

from . import diagnostics, equivalence, kernels, smc, spectral, targets

__all__ = ["diagnostics", "equivalence", "kernels", "smc", "spectral", "targets"]
__version__ = "0.1.0"
