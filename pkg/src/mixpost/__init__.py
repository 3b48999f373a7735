"""Discrete mixing measures, exact Wasserstein distances, merge-truncate-merge
post-processing, and a Dirichlet-process Gaussian-mixture sampler."""

from .dpmm import (
    ChainConfig,
    DpmmModel,
    DpmmState,
    gibbs_scan,
    initial_state,
    run_chain,
    split_merge_move,
)
from .errors import (
    DimensionError,
    DomainError,
    EmptyMeasureError,
    KernelError,
    MixpostError,
)
from .experiments import (
    CaseData,
    ExperimentCase,
    FrequencyTable,
    MfmPrior,
    apply_mtm_sweep,
    generate_case_data,
    mfm_forward_sample,
    posterior_mode_bound,
    replicate,
)
from .measures import (
    BoxDomain,
    GaussianKernel,
    LaplaceKernel,
    MixingMeasure,
    canonicalize,
    dirac,
    laplace_density,
    measures_equal,
    mixture_density,
)
from .mtm import (
    MtmConfig,
    MtmResult,
    merge_success_bound,
    mtm,
    mtm_guard_conditions,
    omega_n,
    recovery_constant,
    srswor_order,
)
from .wasserstein import TransportPlan, WassersteinResult, bottleneck_match, wasserstein

__all__ = [
    "BoxDomain",
    "CaseData",
    "ChainConfig",
    "DimensionError",
    "DomainError",
    "DpmmModel",
    "DpmmState",
    "EmptyMeasureError",
    "ExperimentCase",
    "FrequencyTable",
    "GaussianKernel",
    "KernelError",
    "LaplaceKernel",
    "MfmPrior",
    "MixingMeasure",
    "MixpostError",
    "MtmConfig",
    "MtmResult",
    "TransportPlan",
    "WassersteinResult",
    "apply_mtm_sweep",
    "bottleneck_match",
    "canonicalize",
    "dirac",
    "generate_case_data",
    "gibbs_scan",
    "initial_state",
    "laplace_density",
    "measures_equal",
    "merge_success_bound",
    "mfm_forward_sample",
    "mixture_density",
    "mtm",
    "mtm_guard_conditions",
    "omega_n",
    "posterior_mode_bound",
    "recovery_constant",
    "replicate",
    "run_chain",
    "split_merge_move",
    "srswor_order",
    "wasserstein",
]
