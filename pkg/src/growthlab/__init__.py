"""growthlab: simulation and verification laboratory for driven lattice
surface growth.

Surfaces evolve by a local rule applied to each site's nearest-neighbor
stencil together with one fresh Gaussian variate per site and step.  The
package provides five built-in rules (independent columns, constrained
growth, sticky deposition, directed path maximum, smoothed path sum), an
ensemble engine with exact dependence-cone windows, the backward-walk
representation of noise derivatives, brute-force path oracles, and
estimators for normalized variance and neighbor-gap decay with their
concentration bounds.
"""

__version__ = "0.1.0"

from ._kernels import backend_name
from .driving import (
    AxiomReport,
    DrivingFunction,
    NoiseTransform,
    centered_cdf_transform,
    check_axioms,
    gaussian_cdf_transform,
    identity_transform,
    make_ballistic,
    make_lpp,
    make_polymer,
    make_random_deposition,
    make_rsos,
)
from .engine import (
    AlternatingRsos,
    ConstraintViolationError,
    EnsembleResult,
    FieldWindow,
    SimulationPlan,
    SimulationResult,
    Trajectory,
    evolve_step,
    flat_window,
    run_ensemble,
    simulate,
    simulate_rsos_alternating,
    simulate_rsos_simultaneous,
)
from .estimators import (
    AlphaEstimate,
    BetaEstimate,
    check_beta_le_alpha,
    estimate_alpha,
    estimate_beta,
    mgf_check,
    superconcentration_trend,
    tail_exceedance,
)
from .lattice import Neighborhood, SiteCoord, neighborhood
from .noise import NoiseField
from .stats import EnsembleStats
from .walk import (
    WalkDistribution,
    derivative_via_fd,
    derivative_via_walk,
    influence_norm,
    walk_distribution,
)

__all__ = [name for name in dir() if not name.startswith("_")]
