"""Stability analysis, exact simulation, and switching design for switched linear systems."""

__version__ = "0.1.0"

from .certify import (Certificate, HybridCertificate, certify_continuous, certify_discrete,
                      certify_hybrid, certify_s_condition)
from .design import (DwellPlan, StabilizerPlan, damping_time, dwell_time_design, stabilize,
                     stabilizer_schedule)
from .linalg import envelope_bound, induced_norm, matrix_exp, spectral_summary
from .model import (ContinuousSignal, DiscreteSignal, HybridSignal, HybridSystem, SwitchedSystem,
                    active_index, hybrid_segments, segments_up_to, validate)
from .simulate import (Trajectory, simulate_continuous, simulate_discrete, simulate_hybrid,
                       verify_bound)
from .stats import accumulate, accumulate_discrete, asymptotics, discrete_asymptotics

__all__ = [
    "Certificate", "HybridCertificate", "certify_continuous", "certify_discrete",
    "certify_hybrid", "certify_s_condition",
    "DwellPlan", "StabilizerPlan", "damping_time", "dwell_time_design", "stabilize",
    "stabilizer_schedule",
    "envelope_bound", "induced_norm", "matrix_exp", "spectral_summary",
    "ContinuousSignal", "DiscreteSignal", "HybridSignal", "HybridSystem", "SwitchedSystem",
    "active_index", "hybrid_segments", "segments_up_to", "validate",
    "Trajectory", "simulate_continuous", "simulate_discrete", "simulate_hybrid", "verify_bound",
    "accumulate", "accumulate_discrete", "asymptotics", "discrete_asymptotics",
]
