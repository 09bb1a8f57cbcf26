"""Workbench for extending distributions across singular loci, causal configurations
of Minkowski points, wavefront-set cones and Wick power counting."""

from .causal import PointConfig, causal_factorize, cover_witness, glue_consistency, partition_weights
from .cones import CovectorConfig, digamma_member, gamma_to_member
from .distributions import DistributionKernel, fourier_decay_probe, pair, scaling_degree_estimate
from .extension import (
    CutoffFamily,
    build_w_operator,
    extend_at_surface,
    extend_unique,
    extend_with_w,
    transversal_scaling_degree,
)
from .fibration import SurfaceFibration
from .quadrature import QuadConfig
from .testfunctions import make_bump
from .wick import classify_interaction, wick_expand

__version__ = "0.1.0"

__all__ = [
    "PointConfig", "causal_factorize", "cover_witness", "glue_consistency", "partition_weights",
    "CovectorConfig", "digamma_member", "gamma_to_member",
    "DistributionKernel", "fourier_decay_probe", "pair", "scaling_degree_estimate",
    "CutoffFamily", "build_w_operator", "extend_at_surface", "extend_unique", "extend_with_w",
    "transversal_scaling_degree", "SurfaceFibration", "QuadConfig", "make_bump",
    "classify_interaction", "wick_expand",
]
