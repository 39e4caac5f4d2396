"""Compartment model of HIV/AIDS transmission with three interventions.

The population is split into susceptibles ``S``, infectives unaware of
their status ``I1``, aware infectives ``I2`` and AIDS cases ``A``, with
total ``N = S + I1 + I2 + A``.  Susceptibles acquire infection at the
per-capita rate

    beta_m = (1 - u1) * (beta1*c1*I1 + beta2*c2*I2 + beta3*c3*A) / N

and the compartments evolve as

    dS/dt  = q0 - beta_m*S - mu*S
    dI1/dt = beta_m*S - (u2*theta + mu + delta)*I1
    dI2/dt = u2*theta*I1 - (delta + mu + u3*pi)*I2
    dA/dt  = delta*I1 + delta*I2 + u3*pi*I2 - (alpha + mu)*A

where ``u1`` scales condom use, ``u2`` screening of unaware infectives
and ``u3`` treatment of aware infectives, each confined to [0, 1].
Setting ``u2 = u3 = 1`` recovers the plain (uncontrolled) dynamics, in
which screening and treatment run at their nominal rates ``theta`` and
``pi``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ControlVector",
    "ModelParams",
    "State",
    "force_of_infection",
    "population_floor",
    "rhs_controlled",
    "rhs_uncontrolled",
]

_POSITIVE_FIELDS = ("q0", "beta1", "c1", "c2", "c3", "theta", "pi", "delta", "alpha", "mu")
_NONNEGATIVE_FIELDS = ("beta2", "beta3")


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological constants.

    q0      recruitment into the susceptible class (individuals/time)
    beta1-3 per-contact transmission probabilities for contacts with
            unaware infectives, aware infectives and AIDS cases
    c1-3    contact rates with the three infected classes (1/time)
    theta   screening rate of unaware infectives (1/time)
    pi      treatment-driven progression rate out of I2 (1/time)
    delta   untreated progression rate to AIDS (1/time)
    alpha   AIDS-related death rate (1/time)
    mu      natural death rate (1/time)

    All values are plain reals; units are documented, not enforced.
    """

    q0: float
    beta1: float
    beta2: float
    beta3: float
    c1: float
    c2: float
    c3: float
    theta: float
    pi: float
    delta: float
    alpha: float
    mu: float

    def __post_init__(self):
        for name in _POSITIVE_FIELDS:
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0.0:
                raise ValueError(f"parameter {name} must be finite and > 0, got {v!r}")
        for name in _NONNEGATIVE_FIELDS:
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"parameter {name} must be finite and >= 0, got {v!r}")
        if not (self.beta3 <= self.beta2 <= self.beta1):
            # Advisory only: awareness is expected to reduce risky contact,
            # but none of the threshold or stability results depend on it.
            warnings.warn(
                "transmission probabilities usually satisfy beta3 <= beta2 <= beta1",
                stacklevel=2,
            )


@dataclass(frozen=True)
class State:
    """Compartment occupancies (individuals). Valid states are nonnegative."""

    S: float
    I1: float
    I2: float
    A: float

    @property
    def N(self) -> float:
        return self.S + self.I1 + self.I2 + self.A

    def as_array(self) -> np.ndarray:
        return np.array([self.S, self.I1, self.I2, self.A], dtype=float)

    @classmethod
    def from_array(cls, y) -> "State":
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]))

    def validate(self) -> "State":
        """Raise ValueError unless every compartment is finite and >= 0."""
        for name, v in (("S", self.S), ("I1", self.I1), ("I2", self.I2), ("A", self.A)):
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"compartment {name} must be finite and >= 0, got {v!r}")
        return self


@dataclass(frozen=True)
class ControlVector:
    """Intervention intensities (u1, u2, u3), each clamped into [0, 1]."""

    u1: float
    u2: float
    u3: float

    def __post_init__(self):
        for name in ("u1", "u2", "u3"):
            v = float(getattr(self, name))
            if math.isnan(v):
                raise ValueError(f"control {name} is NaN")
            object.__setattr__(self, name, min(1.0, max(0.0, v)))

    def as_array(self) -> np.ndarray:
        return np.array([self.u1, self.u2, self.u3], dtype=float)

    @classmethod
    def from_array(cls, u) -> "ControlVector":
        return cls(float(u[0]), float(u[1]), float(u[2]))


def population_floor(params: ModelParams) -> float:
    """Population size below which the infection terms are treated as zero."""
    return 1e-12 * params.q0 / params.mu


def force_of_infection(state: State, params: ModelParams, u1: float = 0.0) -> float:
    """Per-susceptible infection rate beta_m.

    The prevalence-weighted contact pressure divided by the total
    population, reduced by the condom-use factor (1 - u1).  An (almost)
    extinct population has no infectives, so the continuous extension at
    N -> 0 is zero; that value is returned below the population floor.
    """
    n = state.N
    if n <= population_floor(params):
        return 0.0
    w = (
        params.beta1 * params.c1 * state.I1
        + params.beta2 * params.c2 * state.I2
        + params.beta3 * params.c3 * state.A
    )
    return (1.0 - u1) * w / n


def rhs_controlled(state: State, params: ModelParams, u: ControlVector) -> np.ndarray:
    """Time derivative (dS, dI1, dI2, dA) of the controlled system."""
    infections = force_of_infection(state, params, u.u1) * state.S
    screening = u.u2 * params.theta
    treatment = u.u3 * params.pi
    d_s = params.q0 - infections - params.mu * state.S
    d_i1 = infections - (screening + params.mu + params.delta) * state.I1
    d_i2 = screening * state.I1 - (params.delta + params.mu + treatment) * state.I2
    d_a = (
        params.delta * state.I1
        + params.delta * state.I2
        + treatment * state.I2
        - (params.alpha + params.mu) * state.A
    )
    return np.array([d_s, d_i1, d_i2, d_a])


def rhs_uncontrolled(state: State, params: ModelParams, u1: float = 0.0) -> np.ndarray:
    """Time derivative of the uncontrolled system (screening and treatment
    at nominal rates), with condom use u1 kept as an optional parameter."""
    return rhs_controlled(state, params, ControlVector(u1, 1.0, 1.0))
