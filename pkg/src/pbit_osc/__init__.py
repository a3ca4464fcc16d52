"""Simulation and finite-time theory of period-2 oscillations in tick-random p-bit annealing."""

from .dynamics import SimParams, Trajectory, energy, exact_chain, run, tick
from .graph import (CouplingMatrix, DegenerateGraphError, Graph, GraphError, ToyKind,
                    build_couplings, field_scale, generate_toy, load_gset,
                    local_field_variance, parse_gset, serialize_gset)
from .harness import (ComparisonRow, SweepConfig, compare, emit_csv, run_sweep,
                      sensitivity_report)
from .observables import (ObservableReport, ThresholdEstimate, autocorrelation_c1, classify,
                          cut_value, detect_sim_threshold, second_difference_amplitude)
from .theory import (BoundaryCurve, ModeInfo, TheoryParams, Variant, alpha_eff, boundary_curve,
                     critical_c, effective_jacobian_spectrum, extreme_modes,
                     finite_time_norm_growth, growth_factor, is_observable, jacobian,
                     mean_field_step)

__version__ = "0.1.0"
