"""Infinite-width network kernels, exact GP inference, slice-sampled
softmax classification, confidence heuristics, and a calibration
evaluation harness under synthetic distributional shift."""

from .kernels import (KernelConfig, KernelMatrix, base_kernel, nngp_matrix,
                      ntk_matrix, rbf_matrix, kernel_diag, gram,
                      cholesky_with_jitter)
from .regression import (GaussianPosterior, GprModel, NtkDynamics, fit,
                         predict, gaussian_nll, ntk_predict)
from .classification import (EssConfig, LatentState, softmax_log_likelihood,
                             ess_step, sample_posterior)
from .confidence import (HeuristicConfig, CategoricalPrediction,
                         exact_confidence, pairwise_confidence,
                         softmax_confidence, confidences_from_posteriors,
                         fit_temperature)
from .metrics import (CalibrationReport, ReliabilityBin, ece, brier,
                      categorical_nll, entropy_and_confidence,
                      reliability_bins, quartile_summary, build_report)
from .data import (Dataset, load_csv, split, standardize, corrupt,
                   gaussian_blobs)
from .gridsearch import GridSpec, grid_search, nngp_regression_grid, rbf_grid
from .records import RunRecord
from .experiment import ExperimentSpec, run_experiment

__version__ = "0.1.0"
