"""Gaussian random fields on the 2-D lattice: samplers, level schedules, the
logarithmic-average estimator for prefix-rectangle maxima, and numerical
diagnostics for the dependence conditions it relies on.
"""
__version__ = "0.1.0"

from .asclt import (AscltTrajectory, asclt_average, expected_average_iid, indicator_stream,
                    no_exceedance_prob_iid, prefix_max, trajectory)
from .conditions import (BlockParameters, ConditionReport, Rect, berman_sum, berman_sup, block_parameters,
                         dprime_sum, evaluate_conditions, grid_partition, rectangle_independence_gap)
from .covariance import (ChoiModel, CorrelationModel, ExplicitGridModel, IIDModel, SeparableModel,
                         check_decay_condition, check_psd, choi_gamma_1d, choi_gamma_2d, choi_omega,
                         correlation, correlation_matrix, expdecay, load_explicit_grid, model_from_spec,
                         squared_sum_profile)
from .errors import (CalibrationError, ConfigError, DomainError, EmbeddingError, FieldmaxError,
                     InvariantViolation, ModelError, SizeError)
from .fieldsim import (FieldRealization, load_field, make_sampler, replication_seed, sample_cholesky,
                       sample_circulant, sample_covariance, sample_iid, save_field)
from .kernels import bivariate_upper_orthant, normal_comparison_term, std_normal_cdf, std_normal_quantile
from .levels import LevelSchedule, asymptotic_level, boundary_level, lambda_min, level_schedule
