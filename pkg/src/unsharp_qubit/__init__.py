"""Estimating an unknown pure qubit from repeated unsharp polarization measurements.

The library simulates sequences of Gaussian-smeared polarization
measurements along random directions, accumulates the sequence back-action
as a Kraus chain, forms the record-only state estimate, and benchmarks its
fidelity against the one-measurement optimum 2/3.  A matching
time-continuous conditional master equation plus closed-form purity and
fidelity curves covers the constant-rate measurement limit.
"""

__version__ = "0.1.0"

from .bloch import (
    FULLY_MIXED,
    DensityMatrix,
    GeneralOperator,
    MeasurementAxis,
    SpectralDecomposition,
    fidelity,
    pauli_product,
    purity,
    random_axis,
    random_pure_state,
    spectral_decompose,
)
from .continuous import (
    NoiseIncrement,
    TimeMapping,
    TrajectoryState,
    bloch_sde_step,
    draw_noise,
    drift_purity,
    mean_fidelity_closed_form,
    record_increment,
    simulate_purity_ensemble,
    simulate_trajectory,
    sme_step,
    time_from_steps,
)
from .ensemble import (
    KINDS,
    EnsembleError,
    EnsembleStatistics,
    ExperimentSpec,
    run_ensemble,
)
from .montecarlo import derive_stream, summarize
from .povm import (
    CONTINUUM_PRECISION_FLOOR,
    DOMINANT_EIGENSTATE,
    RANDOM_EIGENSTATE,
    STRATEGIES,
    ContinuumAdvisory,
    GaussianEffect,
    MeasurementSettings,
    OutcomeDistribution,
    QuadratureSpec,
    completeness_defect,
    make_effect,
    outcome_density,
    outcome_distribution,
    posterior_update,
    purify_estimate,
    sample_outcome,
    single_estimate,
)
from .sequential import (
    FidelityStatistic,
    KrausChain,
    SequenceResult,
    chain_append,
    fidelity_direct,
    fidelity_hypothetical_fixed,
    fidelity_purity,
    hypothetical_purity_paths,
    hypothetical_run,
    replay_hypothetical,
    run_sequence,
    sequence_estimate,
    spectral_match,
)

__all__ = [name for name in dir() if not name.startswith("_")]
