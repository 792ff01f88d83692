"""Slowly oscillating periodic solutions of x'(t) = f(x(t-1)).

Piecewise-linear negative feedback, a delay-aligned method-of-steps solver,
the return map on the cone of nondecreasing segments, and the planar
reduction that produces period-4 solutions.
"""

from .dde import (DEFAULT_HORIZON, DEFAULT_N, NumericalError, Segment, SolutionTrace,
                  dense_value, find_zeros, integrate, level_crossings, segment_at,
                  value_at)
from .feedback import (FeedbackConstructionError, FeedbackFn, HppParams, HprimeParams,
                       Stability, build_hpp_feedback, build_multiscale,
                       build_plateau_feedback, check_condition2, check_hprime,
                       integral_abs, multiscale_params, stability_class,
                       validate_params)
from .kaplan_yorke import (ConservationError, KYSolution, PlanarTrace, TauResult,
                           find_all_ky_amplitudes, find_ky_amplitude, hamiltonian,
                           integrate_planar, ky_period4_trace, scan_tau_brackets, tau,
                           verify_tau_limits)
from .return_map import (BoundaryWitness, ConvergedToZero, NonConvergence, SOPResult,
                         VSetParams, apply_P, edge_track, find_multiple_sops,
                         iterate_to_fixed_point, locate_unstable_sop, membership_V,
                         verify_contraction_U, verify_V_invariance)

__version__ = "0.1.0"
