"""Weak-coupling system-bath thermal state preparation: channels, generators and scans."""

from .backend import BACKEND
from .bath import (BathConfig, ChannelConfig, channel_single, channel_superop, check_channel,
                   envelope_f, f_hat, joint_propagator)
from .errors import (CapacityError, ConfigError, ContractError, GDLError, IntegrationError,
                     MixingTimeoutError, NonPrimitiveError, NumericError, ParameterError,
                     QuadratureError, SingularityError, StructureError, ValidationError)
from .experiments import (FixedPointResult, ScanReport, bias_scan, composed_channel,
                          fixed_point, mixing_estimate, slope_fit, step_error_scan)
from .generator import (GeneratorParts, QuadSpec, SpectralDensities, assemble_generator,
                        g_correlation, jump_operator, kms_defect, spectral_densities,
                        tanh_bohr_transform)
from .kms import (GapReport, SimilaritySplit, d_beta_distance, lamb_defect,
                  mixing_time_bound, similarity_transform, spectral_gap)
from .model import (SystemModel, bohr_project, build_system, gibbs_state, heisenberg,
                    system_from_hamiltonian)
from .operators import (apply_superop, kms_inner, op_power, partial_trace_bath,
                        superop_from_map, trace_distance)
from .timelaw import (CorrectionOperators, SignedMeasure, TimeDistribution, correction_E,
                      delta_residual, mu_hat, nu_hat, nu_time_grid)

__version__ = "0.1.0"
