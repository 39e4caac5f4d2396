"""Threshold, equilibrium and local-stability analysis of the model.

Everything here is closed-form in the parameters.  Shorthand used
throughout for the exit rates of the three infected compartments:

    B = theta + delta + mu      (out of I1)
    C = delta + mu + pi         (out of I2)
    E = alpha + mu              (out of A)
    D = delta + pi              (I2 -> A flow rate)

Eigenvalue verdicts from a dense solver back every coefficient-based
criterion; a max real part within ``MARGINAL_BAND`` of zero is reported
as ``marginal`` so that floating-point ties cannot flip a verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hivcontrol.model import ModelParams, State

__all__ = [
    "MARGINAL_BAND",
    "EquilibriumReport",
    "ReproductionBreakdown",
    "StabilityReport",
    "basic_reproduction_number",
    "dfe_stability",
    "disease_free_equilibrium",
    "endemic_equilibrium",
    "endemic_stability",
    "jacobian_at_dfe",
    "jacobian_at_endemic",
    "next_generation_spectral_radius",
]

MARGINAL_BAND = 1e-9


def _exit_rates(params: ModelParams):
    b = params.theta + params.delta + params.mu
    c = params.delta + params.mu + params.pi
    e = params.alpha + params.mu
    return b, c, e


@dataclass(frozen=True)
class ReproductionBreakdown:
    """The four secondary-infection routes and their sum r0.

    zeta1: direct transmission from unaware infectives.
    zeta2: transmission from aware infectives reached through screening.
    zeta3: transmission from AIDS cases reached via I2.
    zeta4: transmission from AIDS cases reached directly from I1.
    """

    zeta1: float
    zeta2: float
    zeta3: float
    zeta4: float
    r0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "r0", self.zeta1 + self.zeta2 + self.zeta3 + self.zeta4)


@dataclass(frozen=True)
class EquilibriumReport:
    """A steady state, with the quadratic-reduction data for endemic ones.

    ``beta_m_star`` is the equilibrium force of infection, the root of
    b1*x + b0 = 0; it exists (positive) exactly when r0 > 1.
    """

    kind: str  # "disease-free" | "endemic"
    state: State
    beta_m_star: float | None = None
    b0: float | None = None
    b1: float | None = None
    n_star: float | None = None


@dataclass(frozen=True)
class StabilityReport:
    equilibrium: EquilibriumReport
    poly_coeffs: tuple[float, ...]
    criterion_verdict: str  # "stable" | "unstable"
    eigenvalues: np.ndarray
    eigen_verdict: str  # "stable" | "unstable" | "marginal"
    sign_changes: int | None = None  # endemic reports only


def basic_reproduction_number(params: ModelParams, u1: float = 0.0) -> ReproductionBreakdown:
    """Expected secondary infections of one infective in a susceptible pool.

    Sum of the four transmission routes weighted by the expected time
    spent in each infected compartment.  Linear in (1 - u1): full condom
    coverage annihilates every route.
    """
    b, c, e = _exit_rates(params)
    k = 1.0 - u1
    zeta1 = k * params.beta1 * params.c1 / b
    zeta2 = k * params.beta2 * params.c2 * params.theta / (b * c)
    zeta3 = k * params.beta3 * params.c3 * params.theta * (params.delta + params.pi) / (b * c * e)
    zeta4 = k * params.beta3 * params.c3 * params.delta / (b * e)
    return ReproductionBreakdown(zeta1, zeta2, zeta3, zeta4)


def next_generation_spectral_radius(params: ModelParams, u1: float = 0.0) -> float:
    """r0 as the spectral radius of F V^-1 over the infected compartments.

    F carries the new-infection terms (first row only), V the linear
    transition terms between I1, I2 and A.  Serves as an independent
    cross-check of :func:`basic_reproduction_number`.
    """
    b, c, e = _exit_rates(params)
    k = 1.0 - u1
    f = np.zeros((3, 3))
    f[0] = [k * params.beta1 * params.c1, k * params.beta2 * params.c2, k * params.beta3 * params.c3]
    v = np.array(
        [
            [b, 0.0, 0.0],
            [-params.theta, c, 0.0],
            [-params.delta, -(params.delta + params.pi), e],
        ]
    )
    ngm = f @ np.linalg.inv(v)
    return float(np.max(np.abs(np.linalg.eigvals(ngm))))


def disease_free_equilibrium(params: ModelParams) -> EquilibriumReport:
    """The infection-free steady state (q0/mu, 0, 0, 0)."""
    return EquilibriumReport("disease-free", State(params.q0 / params.mu, 0.0, 0.0, 0.0))


def endemic_equilibrium(params: ModelParams, u1: float = 0.0) -> EquilibriumReport | None:
    """The positive steady state, or None when r0 <= 1.

    The equilibrium force of infection solves the linear reduction
    b1*x + b0 = 0 with b1 > 0 and sign(b0) = sign(1 - r0); the state
    follows in closed form.
    """
    r = basic_reproduction_number(params, u1)
    b, c, e = _exit_rates(params)
    d = params.delta + params.pi
    b1 = (params.delta + params.alpha + params.mu) * b + params.pi * (
        params.alpha + params.delta + params.mu + params.theta
    )
    b0 = e * c * b * (1.0 - r.r0)
    if r.r0 <= 1.0:
        return None
    beta_m = -b0 / b1
    s = params.q0 / (beta_m + params.mu)
    i1 = beta_m * s / b
    i2 = params.theta * i1 / c
    a = (params.delta * i1 + d * i2) / e
    n = (params.q0 - params.alpha * a) / params.mu
    return EquilibriumReport("endemic", State(s, i1, i2, a), beta_m, b0, b1, n)


def jacobian_at_dfe(params: ModelParams, u1: float = 0.0) -> np.ndarray:
    """4x4 Jacobian of the uncontrolled vector field at the DFE."""
    b, c, e = _exit_rates(params)
    k = 1.0 - u1
    l1 = k * params.beta1 * params.c1
    l2 = k * params.beta2 * params.c2
    l3 = k * params.beta3 * params.c3
    return np.array(
        [
            [-params.mu, -l1, -l2, -l3],
            [0.0, l1 - b, l2, l3],
            [0.0, params.theta, -c, 0.0],
            [0.0, params.delta, params.delta + params.pi, -e],
        ]
    )


def jacobian_at_endemic(params: ModelParams, u1: float = 0.0) -> np.ndarray | None:
    """4x4 Jacobian at the endemic state, or None when r0 <= 1."""
    eq = endemic_equilibrium(params, u1)
    if eq is None:
        return None
    return _endemic_jacobian(params, u1, eq)


def _endemic_linearization(params: ModelParams, u1: float, eq: EquilibriumReport):
    """Entries of the endemic Jacobian.

    g  sensitivity of the infection flow to S (through the N-dilution),
    f1..f3  per-class infection gains at the equilibrium contact mix,
    j1  dilution correction common to the I1, I2 and A columns.
    """
    st = eq.state
    n = st.N
    k = 1.0 - u1
    w = k * (
        params.beta1 * params.c1 * st.I1
        + params.beta2 * params.c2 * st.I2
        + params.beta3 * params.c3 * st.A
    )
    g = (n - st.S) * w / n**2
    j1 = w * st.S / n**2
    f1 = k * params.beta1 * params.c1 * st.S / n
    f2 = k * params.beta2 * params.c2 * st.S / n
    f3 = k * params.beta3 * params.c3 * st.S / n
    return g, j1, f1, f2, f3


def _endemic_jacobian(params: ModelParams, u1: float, eq: EquilibriumReport) -> np.ndarray:
    b, c, e = _exit_rates(params)
    d = params.delta + params.pi
    g, j1, f1, f2, f3 = _endemic_linearization(params, u1, eq)
    return np.array(
        [
            [-g - params.mu, -f1 + j1, -f2 + j1, -f3 + j1],
            [g, f1 - j1 - b, f2 - j1, f3 - j1],
            [0.0, params.theta, -c, 0.0],
            [0.0, params.delta, d, -e],
        ]
    )


def _classify_eigenvalues(eigenvalues: np.ndarray) -> str:
    max_re = float(np.max(eigenvalues.real))
    if max_re > MARGINAL_BAND:
        return "unstable"
    if max_re < -MARGINAL_BAND:
        return "stable"
    return "marginal"


def dfe_stability(params: ModelParams, u1: float = 0.0) -> StabilityReport:
    """Local stability of the DFE.

    The S direction contributes the eigenvalue -mu; the remaining cubic
    in the infected directions has coefficients a1, a2, a3 below, and the
    Routh-Hurwitz conditions a1 > 0, a3 > 0, a1*a2 - a3 > 0 decide the
    criterion verdict.  The eigenvalue verdict comes from the full 4x4
    Jacobian.
    """
    r = basic_reproduction_number(params, u1)
    b, c, e = _exit_rates(params)
    a1 = e + c + b * (1.0 - r.zeta1)
    a2 = e * c + c * b * (1.0 - r.zeta1 - r.zeta2) + e * b * (1.0 - r.zeta1 - r.zeta4)
    a3 = b * c * e * (1.0 - r.r0)
    criterion = "stable" if (a1 > 0.0 and a3 > 0.0 and a1 * a2 - a3 > 0.0) else "unstable"
    eigenvalues = np.linalg.eigvals(jacobian_at_dfe(params, u1))
    return StabilityReport(
        equilibrium=disease_free_equilibrium(params),
        poly_coeffs=(a1, a2, a3),
        criterion_verdict=criterion,
        eigenvalues=eigenvalues,
        eigen_verdict=_classify_eigenvalues(eigenvalues),
    )


def _sign_changes(coeffs) -> int:
    """Sign changes across the sequence, skipping exact zeros."""
    signs = [1 if x > 0 else -1 for x in coeffs if x != 0.0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def endemic_stability(params: ModelParams, u1: float = 0.0) -> StabilityReport | None:
    """Local stability of the endemic state, or None when r0 <= 1.

    Computes the quartic characteristic coefficients p1..p4 in closed
    form, counts sign changes over (1, p1, p2, p3, p4) to bound the
    number of positive real roots, and classifies eigenvalues of the
    4x4 Jacobian independently.  Three inequalities that must hold at
    any endemic state (f1 < B, C*f1 + theta*f2 < B*C,
    E*f1 + delta*f3 < B*E) are verified and violations raised, since
    they can only fail through an implementation error.
    """
    eq = endemic_equilibrium(params, u1)
    if eq is None:
        return None
    b, c, e = _exit_rates(params)
    d = params.delta + params.pi
    mu = params.mu
    theta = params.theta
    delta = params.delta
    g, j1, f1, f2, f3 = _endemic_linearization(params, u1, eq)

    if not (f1 < b and c * f1 + theta * f2 < b * c and e * f1 + delta * f3 < b * e):
        raise RuntimeError("endemic linearization violates its structural inequalities")

    p1 = b + c + g + mu + e - f1 + j1
    p2 = (
        mu * (b - f1)
        + c * mu
        + c * e
        + mu * e
        + (b * c - c * f1 - theta * f2)
        + (b * e - delta * f3 - e * f1)
        + (c + b + e) * (j1 + g)
    )
    p3 = (
        mu * (b * c - c * f1 - theta * f2)
        + c * mu * e
        + (c * e + mu * (b + c + params.alpha) + c * delta + theta * d + theta * e) * j1
        + (b * c * e - c * e * f1 - theta * d * f3 - theta * e * f2 - c * delta * f3)
        + mu * (b * e - delta * f3 - e * f1)
        + (b * c + b * e + c * e) * g
    )
    p4 = (
        b * c * g * e
        + (b * c * mu * e - c * mu * e * f1 - theta * mu * d * f3 - theta * mu * e * f2 - c * mu * delta * f3)
        + (c * mu * delta + c * mu * e + theta * mu * d + theta * mu * e) * j1
    )

    changes = _sign_changes((1.0, p1, p2, p3, p4))
    criterion = "stable" if changes == 0 else "unstable"
    eigenvalues = np.linalg.eigvals(_endemic_jacobian(params, u1, eq))
    return StabilityReport(
        equilibrium=eq,
        poly_coeffs=(p1, p2, p3, p4),
        criterion_verdict=criterion,
        eigenvalues=eigenvalues,
        eigen_verdict=_classify_eigenvalues(eigenvalues),
        sign_changes=changes,
    )
