"""gridfreq: frequency estimation for three-phase power signals.

Single-node estimators built on an augmented complex extended Kalman filter,
a bridge-node diffusion protocol for networks of estimators, matching
theoretical error recursions, and a config-driven experiment runner.
"""

__version__ = "0.1.0"

from .augmented import (
    AugmentedMatrix,
    AugmentedVector,
    StructureError,
    augment,
    augmented_moments,
    enforce_structure,
)
from .signals import (
    ConstantFreq,
    RampFreq,
    Scenario,
    ScenarioError,
    ScenarioSegment,
    clarke,
    clarke_arrays,
    generate,
    generate_arrays,
    inverse_clarke,
    pos_neg_decompose,
    sequence_amplitudes,
    sequence_components,
)
from .estimators import (
    FilterDegenerateError,
    FilterState,
    FreqTrace,
    StateSpaceModel,
    acekf_step,
    lss_model,
    nss_model,
    run_filter,
    run_filter_batch,
    shared_increment_model,
    wlss_model,
)
from .network import (
    BridgeAssignment,
    DiffusionWeights,
    DistributedConfigError,
    DistributedRun,
    Topology,
    conventional_weights,
    reference_network,
    run_distributed,
    run_distributed_mc,
    select_bridges,
    uniform_weights,
)
from .analysis import (
    MseReport,
    SpectrumResult,
    empirical_mse,
    empirical_mse_mc,
    error_spectrum,
    initial_network_state,
    mean_error_step,
    mse_step,
)

__all__ = [
    "AugmentedMatrix",
    "AugmentedVector",
    "BridgeAssignment",
    "ConstantFreq",
    "DiffusionWeights",
    "DistributedConfigError",
    "DistributedRun",
    "FilterDegenerateError",
    "FilterState",
    "FreqTrace",
    "MseReport",
    "RampFreq",
    "Scenario",
    "ScenarioError",
    "ScenarioSegment",
    "SpectrumResult",
    "StateSpaceModel",
    "StructureError",
    "Topology",
    "acekf_step",
    "augment",
    "augmented_moments",
    "clarke",
    "clarke_arrays",
    "conventional_weights",
    "empirical_mse",
    "empirical_mse_mc",
    "enforce_structure",
    "error_spectrum",
    "generate",
    "generate_arrays",
    "initial_network_state",
    "inverse_clarke",
    "lss_model",
    "mean_error_step",
    "mse_step",
    "nss_model",
    "pos_neg_decompose",
    "reference_network",
    "run_distributed",
    "run_distributed_mc",
    "run_filter",
    "run_filter_batch",
    "select_bridges",
    "sequence_amplitudes",
    "sequence_components",
    "shared_increment_model",
    "uniform_weights",
    "wlss_model",
    "__version__",
]
