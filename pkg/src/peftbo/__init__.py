"""Multi-objective Bayesian optimization over PEFT configuration spaces.

The engine searches a combinatorial space of parameter-efficient fine-tuning
configurations (per-layer insertion bits plus three module sizes) and returns
the set of non-dominated trade-offs between task score and trainable-parameter
cost. See the README for the library tour and the CLI.
"""

from .acquisition import AcquisitionSpec, NehviEvaluator, local_search, nehvi
from .errors import (
    AcquisitionExhausted,
    BenchmarkError,
    BenchmarkMissError,
    DimensionError,
    EncodingError,
    EvaluationError,
    InvalidConfigurationError,
    NumericalError,
    PeftBoError,
    RunInterrupted,
    StateError,
)
from .gp import (
    GPModelState,
    KernelHyperparams,
    condition,
    fit,
    log_marginal_likelihood,
    log_marginal_likelihood_grad,
    log_posterior,
    log_shrinkage_prior,
    predict,
    sample_posterior,
)
from .modules import (
    BottleneckWeights,
    LayerWeights,
    PrefixWeights,
    build_weights,
    count_weights,
    parallel_forward,
    prefix_extend,
    sapa_forward,
    serial_forward,
)
from .objectives import (
    Observation,
    SyntheticBackend,
    SyntheticLandscapeSpec,
    TabularBackend,
    TabularBenchmark,
    WorkerBackend,
    evaluate,
    load_tabular,
    synthetic_mean_score,
    synthetic_score,
)
from .pareto import (
    FrontEntry,
    ObjectiveVector,
    ParetoFront,
    dominates,
    hypervolume,
    nadir,
    non_dominated,
    write_front,
)
from .search import (
    RunConfig,
    RunState,
    front_of,
    hypervolume_trajectory,
    random_search,
    resume,
    run,
)
from .space import (
    Configuration,
    SearchSpaceSpec,
    bert_base_space,
    cardinality,
    decode,
    encode,
    enumerate_all,
    halving_size_grid,
    neighbors,
    param_count,
    param_fraction,
    random_sample,
    roberta_large_space,
)

__version__ = "0.1.0"
