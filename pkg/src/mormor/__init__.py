"""Model order reduction toolkit: weak POD-Greedy and EIM-POD-Greedy."""

from .eim import (
    EimInterpolant,
    FunctionFamily,
    classical_eim_2d,
    eim_estimator,
    eim_pod_greedy,
    interpolate,
    lebesgue_bound,
)
from .errors import ConfigError, ContractViolation, SolverError
from .fem import (
    AssembledOperators,
    Mesh,
    assemble,
    build_mesh,
    estimator_delta,
    riesz_dual_norm,
    solve_full,
    solve_reduced,
)
from .greedy import (
    GreedyConfig,
    GreedyReport,
    ReducedBasis,
    exact_sigma,
    pod_greedy,
    width_proxy,
)
from .models import diffusion_model, inverse_distance_family, sequence_model
from .pod import CorrelationSpectrum, correlation_apply, pod_modes, spectrum_total
from .spacetime import (
    InnerProduct,
    TimeGrid,
    Trajectory,
    gram_schmidt,
    project_trajectory,
    vt_inner,
    vt_norm,
)

__version__ = "0.1.0"
