"""Sequential change detection with universal codes and empirical pre-change estimates."""

__version__ = "0.1.0"

from .alphabet_dist import (Alphabet, Categorical, SymbolStream, entropy, kl_divergence,
                            log_prob_sequence, make_rng, sample_iid)
from .detectors import (Detector, DetectorConfig, StopReport, aux_stop, brute_force_statistic,
                        page_step, universal_step, validate_config)
from .empirical import (EmpiricalEstimate, beta_bound, check_deviation, estimate_empirical,
                        fn_statistic, lambda_window)
from .universal_code import KTCoder, kraft_sum, kt_length, redundancy

__all__ = [
    "Alphabet", "Categorical", "SymbolStream", "entropy", "kl_divergence", "log_prob_sequence",
    "make_rng", "sample_iid", "Detector", "DetectorConfig", "StopReport", "aux_stop",
    "brute_force_statistic", "page_step", "universal_step", "validate_config",
    "EmpiricalEstimate", "beta_bound", "check_deviation", "estimate_empirical", "fn_statistic",
    "lambda_window", "KTCoder", "kraft_sum", "kt_length", "redundancy",
]
