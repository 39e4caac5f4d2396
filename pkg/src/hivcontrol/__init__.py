"""Four-compartment HIV/AIDS transmission model: simulation, threshold and
stability analysis, and optimal intervention scheduling."""

from hivcontrol.analysis import (
    MARGINAL_BAND,
    EquilibriumReport,
    ReproductionBreakdown,
    StabilityReport,
    basic_reproduction_number,
    dfe_stability,
    disease_free_equilibrium,
    endemic_equilibrium,
    endemic_stability,
    jacobian_at_dfe,
    jacobian_at_endemic,
    next_generation_spectral_radius,
)
from hivcontrol.integrate import (
    NonFiniteError,
    TimeGrid,
    Trajectory,
    grid_interpolate,
    integrate_adjoint_backward,
    integrate_forward,
    read_trajectory_csv,
    write_trajectory_csv,
)
from hivcontrol.model import (
    ControlVector,
    ModelParams,
    State,
    force_of_infection,
    population_floor,
    rhs_controlled,
    rhs_uncontrolled,
)
from hivcontrol.optctrl import (
    AdjointState,
    MissingControlsError,
    ObjectiveWeights,
    OptimalSolution,
    SweepOptions,
    adjoint_rhs,
    characterize_controls,
    forward_backward_sweep,
    hamiltonian,
    objective,
)

__version__ = "0.1.0"

__all__ = [
    "MARGINAL_BAND",
    "AdjointState",
    "ControlVector",
    "EquilibriumReport",
    "MissingControlsError",
    "ModelParams",
    "NonFiniteError",
    "ObjectiveWeights",
    "OptimalSolution",
    "ReproductionBreakdown",
    "StabilityReport",
    "State",
    "SweepOptions",
    "TimeGrid",
    "Trajectory",
    "adjoint_rhs",
    "basic_reproduction_number",
    "characterize_controls",
    "dfe_stability",
    "disease_free_equilibrium",
    "endemic_equilibrium",
    "endemic_stability",
    "force_of_infection",
    "forward_backward_sweep",
    "grid_interpolate",
    "hamiltonian",
    "integrate_adjoint_backward",
    "integrate_forward",
    "jacobian_at_dfe",
    "jacobian_at_endemic",
    "next_generation_spectral_radius",
    "objective",
    "population_floor",
    "read_trajectory_csv",
    "rhs_controlled",
    "rhs_uncontrolled",
    "write_trajectory_csv",
]
