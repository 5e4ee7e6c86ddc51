"""Side-information aided UCB bandits built on control-variate estimators."""
from ._jit import backend
from .estimators import (CvEstimate, DegenerateSideInfo, InsufficientSamples, MultiSampleBuffer,
                         SampleBuffer, SingularSideInfo, beta_hat, confidence_radius, cv_estimate,
                         cv_point_estimate, cv_variance_estimate, multi_beta_hat, multi_cv_point_estimate,
                         optimal_beta, split_estimate, split_transformed_samples, transform_sample)
from .environments import (Environment, GeneralArm, JointGaussianArm, ObservationPair, SinrArm,
                           gaussian_suite, shannon_rate, sinr_suite)
from .harness import (BoundParams, ConfigError, ExperimentConfig, RegretTrace, empirical_regret,
                      parse_config, run_batch, run_single, theoretical_regret_bound)
from .policies import (KINDS, PolicyState, run_policy, ucb1_normal_index, ucbv_index, ucbwsi_index,
                       ucbwsi_split_index)
from .stats_core import (BivariateGaussianSpec, DomainError, RandomSource, StudentT, percentile_v,
                         regularized_incomplete_beta, sample_bivariate_gaussian, t_cdf, t_quantile)

__version__ = "0.1.0"
