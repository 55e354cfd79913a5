"""Simulation and moment integrals for self-intersection local times of fBm."""

from .errors import (ConfigError, DivergenceError, DomainError, EmbeddingError, FactorizationError,
                     FbmlabError, RegimeError, SingularityError)
from .fbm import (ModelParams, Path, TimeGrid, covariance_matrix, fbm_covariance, generate_path,
                  generate_paths, increment_covariance, path_from_bytes, path_to_bytes, path_to_csv)
from .kernels import (KernelValues, TimeQuad, e_integrand, kernel_values, mean_asymptotic,
                      mean_coefficient, mean_local_time, second_moment_integrand, subregion_map)
from .localtime import (EdwardsWeight, LocalTimeEstimate, center, edwards_weight, heat_kernel,
                        local_time_approx, local_times)
from .quadrature import (QuadConfig, QuadResult, compute_E, compute_second_moment,
                         divergence_probe, mean_divergence_curve, rate_curve)
from .montecarlo import ExperimentSpec, McEstimate, edwards_curve, run_experiment, tail_probe

__version__ = "0.1.0"
