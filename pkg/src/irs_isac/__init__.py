"""Joint transmit and IRS reflective beamforming for CRB-optimal sensing with SINR guarantees."""
from ._validation import ValidationError
from .beamforming import (AoConfig, AoSolution, DegenerateBeam, InfeasibleError, SolverError,
                          alternating_optimize, benchmark_separate, benchmark_transmit_only,
                          rank_one_reconstruct, reflective_step, solve_transmit, transmit_step)
from .channels import ChannelSet, Geometry, PropagationParams, gen_channels, path_loss
from .estimators import (JointBeamformer, LeastSquaresTargetEstimator, SeparateBeamformer,
                         TransmitOnlyBeamformer)
from .harness import ExperimentConfig, SweepRecord, load_config, run_sweep, summarize
from .linalg import NearSingular, NotPositiveDefinite, NumericalFailure, herm_eig, solve_psd, trace_inv
from .sdp import HermitianSdp, SdpProblem, SdpSolution, Status, solve
from .sensing import EchoBatch, TargetResponse, empirical_mse, ls_estimate, simulate_echo
from .system import (ReflectCoeffs, SystemParams, TransmitDesign, combined_channel, crb,
                     reflect_quadratics, sinr, total_power)

__version__ = "0.1.0"
