"""Structured covariance estimation for space-time adaptive processing."""

from .core import (EigenSystem, eig_hermitian, reconstruct, sample_covariance,
                   steering_matrix, steering_vector, toeplitz_average, toeplitz_deviation)
from .estimators import (CovarianceEstimate, eigencanceler, fml, inverse_of, itam, looc,
                         rcml, rcml_lb, smi, wax_kailath)
from .eastr import build_toeplitz_constraints, eastr, project_eigenvalues
from .cncml import cncml, solve_cncml
from .expected_likelihood import (LikelihoodRatioReference, calibrate_lr0, get_reference,
                                  lambert_w, likelihood_ratio_log, select_condition_number_el,
                                  select_rank_el, select_rank_noise_el)
from .simulation import (JammerScenario, Jammer, SyntheticClutterScenario, get_preset,
                         inject_targets, sample_training, truth_covariance)
from .evaluation import (BenchmarkResult, calibrate_threshold, detector_statistic,
                         normalized_sinr_db, probability_of_detection, run_benchmark, trd)

__version__ = "0.1.0"
