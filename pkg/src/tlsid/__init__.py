"""Parameter estimation for driven and free two-level quantum systems."""

from .adaptive import ld_schedule, refine_loop, van_der_corput
from .fisher import CrbGap, FisherMatrix, crb_gap, fisher_matrix, projection_fisher_matrix
from .harness import ErrorStats, ExperimentConfig, bias_histogram, emit_results, load_results, run_comparison
from .likelihood import FitResult, log_likelihood, strategy3
from .model import ModelKind, SystemParams, benchmark_params, ideal_signal
from .noise import MeasurementTrace, NoiseSpec, simulate_trace, uniform_schedule
from .spectral import closed_form_peak, fourier_estimate, strategy1, strategy2

__version__ = "0.1.0"

__all__ = [
    "CrbGap", "ErrorStats", "ExperimentConfig", "FisherMatrix", "FitResult", "MeasurementTrace",
    "ModelKind", "NoiseSpec", "SystemParams", "benchmark_params", "bias_histogram", "closed_form_peak",
    "crb_gap", "emit_results", "fisher_matrix", "fourier_estimate", "ideal_signal", "ld_schedule",
    "load_results", "log_likelihood", "projection_fisher_matrix", "refine_loop", "run_comparison",
    "simulate_trace", "strategy1", "strategy2", "strategy3", "uniform_schedule", "van_der_corput",
]
