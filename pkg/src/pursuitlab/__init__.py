"""pursuitlab: subspace thresholding pursuit and friends.

A small laboratory for greedy sparse recovery: the recovery algorithms,
seeded problem generation, basis pursuit, RIP-based theory, and a
deterministic benchmark harness.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .harness import (
    CriticalSparsityReport,
    ExperimentPlan,
    RateCurve,
    export_results,
    find_critical_sparsity,
    run_rate_curve,
)
from .l1 import L1Config, basis_pursuit
from .linalg import correlate, hard_threshold, restricted_least_squares, top_k_indices
from .problems import (
    MeasurementInstance,
    RngStream,
    SparseSignal,
    build_instance,
    gaussian_matrix,
    load_instance,
    make_instance,
    save_instance,
    sparse_signal,
)
from .pursuit import (
    ALGORITHMS,
    AlgorithmSpec,
    RecoveryResult,
    StoppingCriteria,
    iht_identify,
    parse_algorithm_list,
    run_algorithm,
    stp_iterate,
    stpv2_effective_width,
)
from .theory import (
    ConvergenceConstants,
    RicReport,
    check_lemma,
    delta_max,
    exact_ric,
    iteration_bound,
    mu_admissible_range,
    rho,
    tau,
)
