"""Fixed-step fourth-order Runge-Kutta integration on a shared time grid.

States march forward from t0; adjoints march backward from t_final.
Both passes visit exactly the nodes t0 + k*h, so values frozen on the
grid can be re-used (and linearly interpolated at the half-step stage
points) without drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonFiniteError",
    "TimeGrid",
    "Trajectory",
    "grid_interpolate",
    "integrate_adjoint_backward",
    "integrate_forward",
    "read_trajectory_csv",
    "write_trajectory_csv",
]

_FMT = "{:.10g}"  # 10 significant digits in every CSV cell


class NonFiniteError(RuntimeError):
    """An integration stage produced NaN or infinity (step size too large)."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with nodes t0 + k*h, k = 0..n_steps."""

    t0: float
    t_final: float
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.t_final)):
            raise ValueError("grid endpoints must be finite")
        if self.t_final <= self.t0:
            raise ValueError("t_final must exceed t0")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def h(self) -> float:
        return (self.t_final - self.t0) / self.n_steps

    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_steps + 1)


@dataclass
class Trajectory:
    """Grid-aligned samples: states, and optionally controls and adjoints.

    All blocks have one row per grid node.  ``clamped_mass`` accumulates
    the total population removed when tiny negative discretization
    undershoots were clamped back to zero.
    """

    grid: TimeGrid
    states: np.ndarray
    controls: np.ndarray | None = None
    adjoints: np.ndarray | None = None
    clamped_mass: float = 0.0

    def __post_init__(self):
        rows = self.grid.n_steps + 1
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[0] != rows:
            raise ValueError(f"states must have {rows} rows, got {self.states.shape[0]}")
        for name in ("controls", "adjoints"):
            block = getattr(self, name)
            if block is not None:
                block = np.asarray(block, dtype=float)
                if block.shape[0] != rows:
                    raise ValueError(f"{name} must have {rows} rows, got {block.shape[0]}")
                setattr(self, name, block)


def _require_finite(*stages):
    for k in stages:
        if not np.isfinite(k).all():
            raise NonFiniteError("integration stage is not finite; reduce the step size")


def integrate_forward(vector_field, initial, grid: TimeGrid) -> Trajectory:
    """Classical RK4 over the grid.

    Parameters
    ----------
    vector_field : callable
        ``vector_field(y, t) -> dy/dt`` for array-valued ``y``.
    initial : array_like
        Nonnegative state at ``grid.t0``.
    grid : TimeGrid

    Returns
    -------
    Trajectory
        States at every node.  Any negative component produced by
        discretization error is clamped to zero and the removed mass
        accumulated in ``clamped_mass``.
    """
    y = np.array(initial, dtype=float).reshape(-1)
    if not np.isfinite(y).all() or y.min() < 0.0:
        raise ValueError("initial state must be finite and nonnegative")
    h = grid.h
    out = np.empty((grid.n_steps + 1, y.size))
    out[0] = y
    clamped = 0.0
    for k in range(grid.n_steps):
        t = grid.t0 + k * h
        k1 = np.asarray(vector_field(y, t), dtype=float)
        k2 = np.asarray(vector_field(y + 0.5 * h * k1, t + 0.5 * h), dtype=float)
        k3 = np.asarray(vector_field(y + 0.5 * h * k2, t + 0.5 * h), dtype=float)
        k4 = np.asarray(vector_field(y + h * k3, t + h), dtype=float)
        _require_finite(k1, k2, k3, k4)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        negative = y < 0.0
        if negative.any():
            clamped += float(-y[negative].sum())
            y = np.where(negative, 0.0, y)
        out[k + 1] = y
    _require_finite(out)
    return Trajectory(grid, out, clamped_mass=clamped)


def grid_interpolate(values: np.ndarray, grid: TimeGrid, t: float) -> np.ndarray:
    """Sample grid-aligned rows at time t.

    Exact row lookup at nodes (no interpolation drift), linear
    interpolation between adjacent rows elsewhere.
    """
    x = (t - grid.t0) / grid.h
    nearest = int(round(x))
    if abs(x - nearest) < 1e-9 and 0 <= nearest <= grid.n_steps:
        return values[nearest]
    lo = min(max(int(math.floor(x)), 0), grid.n_steps - 1)
    frac = x - lo
    return (1.0 - frac) * values[lo] + frac * values[lo + 1]


def integrate_adjoint_backward(adjoint_field, terminal, grid: TimeGrid, frozen: Trajectory) -> np.ndarray:
    """RK4 marched from t_final down to t0 in steps of -h.

    Parameters
    ----------
    adjoint_field : callable
        ``adjoint_field(lam, t, state, control) -> dlam/dt``.  ``state``
        and ``control`` are rows of ``frozen`` sampled at ``t`` (control
        is None when the trajectory carries none).
    terminal : array_like
        Adjoint value at ``grid.t_final``.
    grid : TimeGrid
        Must be the grid ``frozen`` was produced on.
    frozen : Trajectory
        States (and optionally controls) the adjoint equations are
        evaluated along; half-step values are linearly interpolated.

    Returns
    -------
    numpy.ndarray
        Adjoint rows for every node, index-aligned with the grid; the
        last row is exactly ``terminal``.
    """
    if frozen.grid != grid:
        raise ValueError("frozen trajectory was produced on a different grid")
    lam = np.array(terminal, dtype=float).reshape(-1)
    if not np.isfinite(lam).all():
        raise ValueError("terminal adjoint must be finite")
    h = grid.h

    def sample(t):
        s = grid_interpolate(frozen.states, grid, t)
        u = None if frozen.controls is None else grid_interpolate(frozen.controls, grid, t)
        return s, u

    out = np.empty((grid.n_steps + 1, lam.size))
    out[grid.n_steps] = lam
    for k in range(grid.n_steps, 0, -1):
        t_hi = grid.t0 + k * h
        t_mid = t_hi - 0.5 * h
        t_lo = grid.t0 + (k - 1) * h
        s_hi, u_hi = frozen.states[k], (None if frozen.controls is None else frozen.controls[k])
        s_mid, u_mid = sample(t_mid)
        s_lo, u_lo = frozen.states[k - 1], (None if frozen.controls is None else frozen.controls[k - 1])
        k1 = np.asarray(adjoint_field(lam, t_hi, s_hi, u_hi), dtype=float)
        k2 = np.asarray(adjoint_field(lam - 0.5 * h * k1, t_mid, s_mid, u_mid), dtype=float)
        k3 = np.asarray(adjoint_field(lam - 0.5 * h * k2, t_mid, s_mid, u_mid), dtype=float)
        k4 = np.asarray(adjoint_field(lam - h * k3, t_lo, s_lo, u_lo), dtype=float)
        _require_finite(k1, k2, k3, k4)
        lam = lam - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k - 1] = lam
    _require_finite(out)
    return out


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    """Write one row per grid node: t,S,I1,I2,A[,u1,u2,u3][,lam_*]."""
    if trajectory.states.shape[1] != 4:
        raise ValueError("trajectory CSV layout requires four compartments")
    header = ["t", "S", "I1", "I2", "A"]
    blocks = [trajectory.grid.times()[:, None], trajectory.states]
    if trajectory.controls is not None:
        header += ["u1", "u2", "u3"]
        blocks.append(trajectory.controls)
    if trajectory.adjoints is not None:
        header += ["lam_S", "lam_I1", "lam_I2", "lam_A"]
        blocks.append(trajectory.adjoints)
    data = np.hstack(blocks)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(_FMT.format(v) for v in row) + "\n")


def read_trajectory_csv(path) -> Trajectory:
    """Parse a trajectory CSV written by :func:`write_trajectory_csv`."""
    with open(path, "r", newline="") as fh:
        header = fh.readline().strip().split(",")
        data = np.array([[float(cell) for cell in line.split(",")] for line in fh if line.strip()])
    expected_heads = (
        ["t", "S", "I1", "I2", "A"],
        ["t", "S", "I1", "I2", "A", "u1", "u2", "u3"],
        ["t", "S", "I1", "I2", "A", "lam_S", "lam_I1", "lam_I2", "lam_A"],
        ["t", "S", "I1", "I2", "A", "u1", "u2", "u3", "lam_S", "lam_I1", "lam_I2", "lam_A"],
    )
    if header not in expected_heads:
        raise ValueError(f"unrecognized trajectory CSV header: {header}")
    times = data[:, 0]
    grid = TimeGrid(float(times[0]), float(times[-1]), len(times) - 1)
    states = data[:, 1:5]
    controls = data[:, 5:8] if "u1" in header else None
    adjoints = data[:, -4:] if "lam_S" in header else None
    return Trajectory(grid, states, controls=controls, adjoints=adjoints)
