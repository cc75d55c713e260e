"""Finite coalescing Brownian flows with masses, their adapted bases, and conditioning experiments."""
from .basis import AdaptedBasis, adapted_basis, reference_basis, tau_sum_check
from .core import Clustering, MassPartition, Tolerances, TOL, UsageError, glue, inner_m, norm_m, project_onto_clusters
from .flow import (
    CoalescenceEvent,
    DrivingPaths,
    FlowPath,
    GridSpec,
    check_coalex,
    cluster_mass,
    coalescence_times,
    count_clusters,
    simulate_driving,
    solve_flow,
)
from .remainder import RemainderPath, extract_noise, rebuild_wiener, remainder_map

__version__ = "0.1.0"
