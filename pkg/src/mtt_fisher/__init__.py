"""Multi-target tracking observation models: likelihoods, Fisher
information estimates, information-loss results and MLE experiments."""

from .errors import (
    ConfigError,
    DataError,
    ModelViolationError,
    MttFisherError,
    NumericalCollapseError,
    ParameterDomainError,
    ResourceLimitError,
    RestrictedParameterError,
)
from .estimates import FisherEstimate, InformationLossReport
from .likelihood import (
    MultiTargetState,
    ObservationFrame,
    batch_log_perturbed_likelihood,
    brute_force_log_likelihood,
    log_joint_known_association,
    log_multi_likelihood,
    log_multi_likelihood_k1,
    log_perturbed_likelihood,
    marginal_log_likelihood_sequence,
)
from .models import (
    ClutterModel,
    GaussianClutterDensity,
    GroundTruth,
    ModelParams,
    MttModel,
    SingleTargetModel,
    UniformClutterDensity,
    WindowedGaussianModel,
    log_f,
    log_g,
    score_g,
    single_target_fisher,
)
from .permassoc import (
    UNBOUNDED,
    ConstrainedPermutation,
    DetectionMask,
    PerturbationSpec,
    count_constrained,
    detection_mask_law,
    enumerate_constrained,
    hamming_distance,
    sample_uniform_constrained,
    subfactorial,
)
from .rngstream import rng_stream
from .simulate import SimulatedFrame, simulate_sequence, simulate_static

__version__ = "0.1.0"
