"""Simulator for two phase qubits joined by a current-biased tuneable coupler."""

from .device import (PHI0, BiasAtOrBeyondCritical, DeviceParams, NotReachable, bias_for_coupling,
                     coupling_strength, effective_inductance, figure_params, junction_inductance,
                     off_bias, paper_params, reset_study_params,
                     zero_coupling_bias)
from .dynamics import (ControlSnapshot, ControlTrace, MeasurementModel, StepTooCoarse,
                       TwoQubitState, build_hamiltonian, measure_probabilities, propagate,
                       sample_shots, zz_weight)
from .experiments import (ExperimentResult, Simulation, run_coupling_curve, run_crosstalk_scan,
                          run_min_coupling_study, run_spectroscopy, run_swap_chevron)
from .hysteresis import (BranchPoint, ResetConfig, beta, enumerate_branches, follow_branch,
                         simulate_reset)
from .sequences import (Channel, PulseSequence, Segment, build_crosstalk_sequence,
                        build_spectroscopy_sequence, build_swap_sequence, compensation_offsets)

__version__ = "0.1.0"
