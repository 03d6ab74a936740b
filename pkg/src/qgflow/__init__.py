"""Pseudo-spectral barotropic quasi-geostrophic dynamics under rapidly
oscillating forcing, with averaging, stability and attractor experiments."""

__version__ = "0.1.0"

from .spectral import (  # noqa: F401
    Grid,
    GridMismatchError,
    PhysicalField,
    SpectralField,
    basis_mode,
    ddx,
    ddy,
    domain_integral,
    inner_product,
    inverse_laplacian,
    jacobian,
    laplacian,
    random_field,
    sobolev_norm,
    to_physical,
    to_spectral,
    zero_field,
)
from .model import (  # noqa: F401
    BlowUpError,
    ModelParams,
    StepResolutionError,
    StepperConfig,
    Trajectory,
    apply_linear,
    integrate,
    spectral_gap_condition,
    tendency,
)
from .forcing import (  # noqa: F401
    AverageReport,
    ForcingSpec,
    ForcingTerm,
    average,
    evaluate,
    frequency_basis,
    load_forcing,
    time_average_error,
)
from .averaging import (  # noqa: F401
    ComparisonConfig,
    ComparisonReport,
    CorrectorDecayReport,
    bounded_corrector,
    compare_finite_interval,
    corrector_decay,
)
from .stationary import (  # noqa: F401
    DecayReport,
    SpectrumReport,
    StationaryState,
    attractor_distance,
    coercivity_shift,
    decay_experiment,
    forcing_smallness,
    linearization_matrix,
    response_frequencies,
    solve_stationary,
    spectrum,
    track_bounded_solution,
)
from .snapshots import load_field, save_field  # noqa: F401
