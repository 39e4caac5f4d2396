"""Optimal intervention scheduling via the maximum principle.

The cost to be minimized is

    J = integral_0^T ( a*I1 + b1*u1^2 + b2*u2^2 + b3*u3^2 ) dt,

i.e. the burden of unaware infectives plus quadratic intervention costs.
The costate (adjoint) variables price each compartment; the pointwise
Hamiltonian minimizer gives the controls in closed form, clamped to
[0, 1].  The solver alternates forward state integration, backward
adjoint integration from the zero terminal condition, and a relaxed
control update until states, adjoints and controls all stop moving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hivcontrol.integrate import (
    TimeGrid,
    Trajectory,
    grid_interpolate,
    integrate_adjoint_backward,
    integrate_forward,
)
from hivcontrol.model import (
    ControlVector,
    ModelParams,
    State,
    force_of_infection,
    population_floor,
    rhs_controlled,
)

__all__ = [
    "AdjointState",
    "MissingControlsError",
    "ObjectiveWeights",
    "OptimalSolution",
    "SweepOptions",
    "adjoint_rhs",
    "characterize_controls",
    "forward_backward_sweep",
    "hamiltonian",
    "objective",
]


class MissingControlsError(ValueError):
    """The trajectory carries no control schedule to integrate over."""


@dataclass(frozen=True)
class AdjointState:
    """Costate values: marginal future cost of one extra individual."""

    lam_S: float
    lam_I1: float
    lam_I2: float
    lam_A: float

    def as_array(self) -> np.ndarray:
        return np.array([self.lam_S, self.lam_I1, self.lam_I2, self.lam_A], dtype=float)

    @classmethod
    def from_array(cls, lam) -> "AdjointState":
        return cls(float(lam[0]), float(lam[1]), float(lam[2]), float(lam[3]))


@dataclass(frozen=True)
class ObjectiveWeights:
    """Infection cost weight ``a`` and control cost weights ``b1..b3``."""

    a: float
    b1: float
    b2: float
    b3: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a >= 0.0):
            raise ValueError("weight a must be finite and >= 0")
        for name in ("b1", "b2", "b3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"weight {name} must be finite and > 0 (it divides the control update)")


@dataclass(frozen=True)
class SweepOptions:
    """Iteration settings for the forward-backward sweep.

    ``relaxation`` is the weight given to the freshly characterized
    controls when blending with the previous iterate.  ``fixed_u*`` pin
    a control to a constant for the whole horizon (the pinned value is
    never updated), which expresses strategies that forgo a measure.
    """

    relaxation: float = 0.5
    tolerance: float = 1e-3
    max_iterations: int = 200
    fixed_u1: float | None = None
    fixed_u2: float | None = None
    fixed_u3: float | None = None

    def __post_init__(self):
        if not (0.0 < self.relaxation <= 1.0):
            raise ValueError("relaxation must lie in (0, 1]")
        if not (self.tolerance > 0.0):
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def pins(self) -> tuple[float | None, float | None, float | None]:
        return (self.fixed_u1, self.fixed_u2, self.fixed_u3)


@dataclass
class OptimalSolution:
    """Converged (or best-effort) sweep output."""

    trajectory: Trajectory
    objective: float
    iterations: int
    converged: bool
    residuals: list[float]


def hamiltonian(
    state: State,
    adjoint: AdjointState,
    u: ControlVector,
    params: ModelParams,
    weights: ObjectiveWeights,
) -> float:
    """Running cost plus costate-weighted flow: the quantity the optimal
    control minimizes pointwise over the admissible box."""
    running = (
        weights.a * state.I1
        + weights.b1 * u.u1**2
        + weights.b2 * u.u2**2
        + weights.b3 * u.u3**2
    )
    return running + float(adjoint.as_array() @ rhs_controlled(state, params, u))


def adjoint_rhs(
    state: State,
    adjoint: AdjointState,
    u: ControlVector,
    params: ModelParams,
    weights: ObjectiveWeights,
) -> np.ndarray:
    """Costate time derivative, the negated state gradient of the Hamiltonian.

    The infection term beta_m*S couples every compartment through the
    shared denominator N, which produces the beta_m*S/N dilution
    corrections below.  Below the population floor all infection
    sensitivities vanish.
    """
    n = state.N
    bm = force_of_infection(state, params, u.u1)
    if n > population_floor(params):
        k = 1.0 - u.u1
        s_sens = bm - bm * state.S / n
        k1 = (k * params.beta1 * params.c1 * state.S - bm * state.S) / n
        k2 = (k * params.beta2 * params.c2 * state.S - bm * state.S) / n
        k3 = (k * params.beta3 * params.c3 * state.S - bm * state.S) / n
    else:
        s_sens = k1 = k2 = k3 = 0.0
    screening = u.u2 * params.theta
    treatment = u.u3 * params.pi
    gap = adjoint.lam_S - adjoint.lam_I1
    d_s = s_sens * gap + params.mu * adjoint.lam_S
    d_i1 = (
        k1 * gap
        + adjoint.lam_I1 * (screening + params.mu + params.delta)
        - screening * adjoint.lam_I2
        - params.delta * adjoint.lam_A
        - weights.a
    )
    d_i2 = (
        k2 * gap
        + adjoint.lam_I2 * (params.delta + params.mu + treatment)
        - adjoint.lam_A * (params.delta + treatment)
    )
    d_a = k3 * gap + adjoint.lam_A * (params.alpha + params.mu)
    return np.array([d_s, d_i1, d_i2, d_a])


def characterize_controls(
    state: State,
    adjoint: AdjointState,
    params: ModelParams,
    weights: ObjectiveWeights,
) -> ControlVector:
    """Pointwise Hamiltonian minimizer over the box [0, 1]^3.

    Each control balances its marginal benefit (a costate gap times the
    flow it suppresses or redirects) against its quadratic cost, then is
    clamped to the admissible interval.
    """
    n = state.N
    if n > population_floor(params):
        w = (
            params.beta1 * params.c1 * state.I1
            + params.beta2 * params.c2 * state.I2
            + params.beta3 * params.c3 * state.A
        )
        u1 = w * state.S * (adjoint.lam_I1 - adjoint.lam_S) / (2.0 * weights.b1 * n)
    else:
        u1 = 0.0
    u2 = params.theta * state.I1 * (adjoint.lam_I1 - adjoint.lam_I2) / (2.0 * weights.b2)
    u3 = params.pi * state.I2 * (adjoint.lam_I2 - adjoint.lam_A) / (2.0 * weights.b3)
    return ControlVector(u1, u2, u3)


def objective(trajectory: Trajectory, weights: ObjectiveWeights) -> float:
    """Composite trapezoidal approximation of J on the trajectory grid."""
    if trajectory.controls is None:
        raise MissingControlsError("objective needs a trajectory with controls")
    i1 = trajectory.states[:, 1]
    u = trajectory.controls
    integrand = (
        weights.a * i1
        + weights.b1 * u[:, 0] ** 2
        + weights.b2 * u[:, 1] ** 2
        + weights.b3 * u[:, 2] ** 2
    )
    h = trajectory.grid.h
    return float(h * (0.5 * integrand[0] + integrand[1:-1].sum() + 0.5 * integrand[-1]))


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    # sup-norm change relative to the new iterate, floored to stay
    # meaningful for identically-zero quantities
    scale = max(float(np.abs(new).max(initial=0.0)), 1e-8)
    return float(np.abs(new - old).max(initial=0.0)) / scale


def _apply_pins(u_nodes: np.ndarray, pins) -> None:
    for column, pin in enumerate(pins):
        if pin is not None:
            u_nodes[:, column] = min(1.0, max(0.0, pin))


def forward_backward_sweep(
    params: ModelParams,
    weights: ObjectiveWeights,
    initial: State,
    grid: TimeGrid,
    opts: SweepOptions = SweepOptions(),
) -> OptimalSolution:
    """Solve the two-point optimality system by fixed-point iteration.

    Each iteration (1) integrates the state forward under the current
    control schedule, (2) integrates the adjoints backward from the zero
    terminal condition along the frozen states, (3) characterizes fresh
    controls at every node, and (4) blends them into the schedule with
    the relaxation factor.  Iteration stops once the relative sup-norm
    change of states, adjoints and controls all drop to ``tolerance``;
    hitting ``max_iterations`` first yields ``converged=False`` and the
    lowest-residual iterate seen.

    The initial guess is the all-zero schedule, so the first forward
    pass reproduces the fully uncontrolled dynamics.
    """
    initial.validate()
    pins = opts.pins()
    n_nodes = grid.n_steps + 1
    u = np.zeros((n_nodes, 3))
    _apply_pins(u, pins)

    def forward(u_nodes: np.ndarray) -> Trajectory:
        def field(y, t):
            uv = grid_interpolate(u_nodes, grid, t)
            return rhs_controlled(State.from_array(y), params, ControlVector.from_array(uv))

        traj = integrate_forward(field, initial.as_array(), grid)
        traj.controls = u_nodes.copy()
        return traj

    def backward(traj: Trajectory) -> np.ndarray:
        def field(lam, t, s_row, u_row):
            return adjoint_rhs(
                State.from_array(s_row),
                AdjointState.from_array(lam),
                ControlVector.from_array(u_row),
                params,
                weights,
            )

        return integrate_adjoint_backward(field, np.zeros(4), grid, traj)

    def characterized(states: np.ndarray, adjoints: np.ndarray) -> np.ndarray:
        fresh = np.empty((n_nodes, 3))
        for k in range(n_nodes):
            cv = characterize_controls(
                State.from_array(states[k]),
                AdjointState.from_array(adjoints[k]),
                params,
                weights,
            )
            fresh[k] = (cv.u1, cv.u2, cv.u3)
        return fresh

    residuals: list[float] = []
    converged = False
    prev_states = prev_adjoints = None
    best_u = u.copy()
    best_residual = math.inf
    iterations = 0

    for iterations in range(1, opts.max_iterations + 1):
        traj = forward(u)
        adjoints = backward(traj)
        fresh = characterized(traj.states, adjoints)
        u_next = opts.relaxation * fresh + (1.0 - opts.relaxation) * u
        _apply_pins(u_next, pins)

        if prev_states is not None:
            residual = max(
                _relative_change(traj.states, prev_states),
                _relative_change(adjoints, prev_adjoints),
                _relative_change(u_next, u),
            )
            residuals.append(residual)
            if residual < best_residual:
                best_residual = residual
                best_u = u_next.copy()
            if residual <= opts.tolerance:
                converged = True
                u = u_next
                break
        prev_states, prev_adjoints = traj.states, adjoints
        u = u_next

    if not converged:
        u = best_u

    # final consistent solve so states, adjoints and controls all belong
    # to the returned schedule (transversality is exact by construction)
    traj = forward(u)
    traj.adjoints = backward(traj)
    return OptimalSolution(
        trajectory=traj,
        objective=objective(traj, weights),
        iterations=iterations,
        converged=converged,
        residuals=residuals,
    )
