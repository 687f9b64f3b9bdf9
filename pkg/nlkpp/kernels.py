"""
Interaction Kernels for the nonlocal Fisher-KPP toolkit
-------------------------------------------------------

This module is the entry point for the kernel layer. The implementations are
split into separate modules:

1. KernelInterfaces.py - Kernel base class, HypothesisReport, check_hypothesis
2. KernelFamilies.py - Gaussian, TopHat, PhiBeta, DiracPair, Tabulated and the registry

Everything is re-exported here so callers need a single import.
"""

from KernelFamilies import KERNEL_FAMILIES, DiracPair, Gaussian, PhiBeta, Tabulated, TopHat, make_kernel
from KernelInterfaces import TOL_FOURIER, HypothesisReport, Kernel, check_hypothesis

__all__ = [
    "Kernel",
    "HypothesisReport",
    "check_hypothesis",
    "TOL_FOURIER",
    "Gaussian",
    "TopHat",
    "PhiBeta",
    "DiracPair",
    "Tabulated",
    "KERNEL_FAMILIES",
    "make_kernel",
]
