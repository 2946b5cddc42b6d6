"""Device-independent dimension witnesses of the I_N family.

Construction and evaluation of the witnesses, exact classical maxima,
multistart conjugate-gradient quantum/classical bounds, photon-counting
simulation with Poisson statistics, and fidelity-scaling analysis.
"""

__version__ = "0.1.0"

from .errors import (
    DataFileError,
    DomainError,
    EstimationError,
    ResourceLimitError,
    StaleTableError,
)
from .oracle import DeterministicStrategy, exact_classical_max, strategy_correlators
from .optimize import (
    BoundEstimate,
    OptimizerConfig,
    config_hash,
    gradient,
    maximize,
    objective,
    refine,
)
from .scaling import (
    FidelityInterval,
    interval,
    load_bound_table,
    max_certifiable_dimension,
    save_bound_table,
    separable,
)
from .simulate import CountRecord, NoiseModel, estimate_witness, measure_fidelity, simulate_counts
from .states import (
    AngleEnsemble,
    AngleVector,
    ClassicalDiagonalEnsemble,
    RealStateVector,
    angles_to_state,
    classical_correlators,
    complete_basis,
    load_classical_reference,
    load_reference_angles,
    quantum_correlators,
)
from .witness import (
    CertificationVerdict,
    CorrelatorTable,
    WitnessSpec,
    algebraic_max,
    certify,
    classical_bound,
    evaluate,
    evaluate_signed,
    make_witness,
)
