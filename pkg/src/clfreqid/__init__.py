"""Non-parametric frequency-domain closed-loop identification with small-noise variance analysis."""

from .estimators import (PlantEstimate, direct, etfe, geometric_average, indirect, joint_io,
                         joint_io_two_experiments)
from .lti import (ClosedLoopSystem, PoleOnCircleError, TransferFunction, UnstableLoopError,
                  closed_loop_char_poly, evaluate, is_stable, loop_response, benchmark_system)
from .mc import McConfig, McResult, compare_profiles, run_mc
from .signals import ExcitationSignal, Spectrum, dft, grid, idft, periodic_extend, prbs
from .sim import ExperimentRecord, NoiseConfig, run_experiment, run_paired_experiments
from .variance import (NoiseCovariances, VarianceProfile, asymptotic_variance, fejer_covariance,
                       filtered_autocovariance, no_leakage_variance, noise_covariances,
                       ordering_predicate)

__version__ = "0.1.0"
