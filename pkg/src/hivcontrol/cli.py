"""Scenario-driven command line front end.

Subcommands: simulate (uncontrolled dynamics), analyze (threshold,
equilibria, stability), optimize (uncontrolled baseline plus the
forward-backward sweep) and sweep (one-parameter scans).  Scenarios are
flat INI files; outputs are CSV files, key=value report blocks on
stdout, and best-effort SVG plots that never affect the exit code.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 sweep did not converge (artifacts are still written).
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from hivcontrol.analysis import (
    basic_reproduction_number,
    dfe_stability,
    disease_free_equilibrium,
    endemic_equilibrium,
    endemic_stability,
)
from hivcontrol.integrate import (
    NonFiniteError,
    TimeGrid,
    Trajectory,
    integrate_forward,
    write_trajectory_csv,
)
from hivcontrol.model import ControlVector, ModelParams, State, rhs_controlled
from hivcontrol.optctrl import ObjectiveWeights, SweepOptions, forward_backward_sweep

__all__ = ["ConfigError", "Scenario", "load_scenario", "main", "scenario_path"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_NOT_CONVERGED = 4

_FMT = "{:.10g}"
_PARAM_KEYS = [f.name for f in fields(ModelParams)]


class ConfigError(ValueError):
    """A scenario file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class Scenario:
    params: ModelParams
    initial: State | None = None
    grid: TimeGrid | None = None
    u1_fixed: float | None = None
    weights: ObjectiveWeights | None = None
    sweep_opts: SweepOptions | None = None
    out_dir: str | None = None
    make_plots: bool = True


def scenario_path(name: str) -> Path:
    """Filesystem path of a bundled scenario file, e.g. 'table1_dfe.ini'."""
    path = resources.files("hivcontrol").joinpath("scenarios", name)
    return Path(str(path))


def _parse_float(section, key, raw) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from exc
    if math.isnan(value):
        raise ConfigError(f"[{section}] {key}: NaN is not accepted")
    return value


def _section_floats(cp, section, required, optional=()) -> dict:
    if not cp.has_section(section):
        raise ConfigError(f"missing [{section}] section")
    got = {}
    for key in required:
        if not cp.has_option(section, key):
            raise ConfigError(f"[{section}] is missing key {key!r}")
        got[key] = _parse_float(section, key, cp.get(section, key))
    for key in optional:
        if cp.has_option(section, key):
            got[key] = _parse_float(section, key, cp.get(section, key))
    known = set(required) | set(optional)
    unknown = [k for k in cp.options(section) if k not in known]
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys: {', '.join(sorted(unknown))}")
    return got


def load_scenario(path) -> Scenario:
    """Parse an INI scenario file into typed pieces."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#", ";"))
    try:
        with open(path, "r") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc

    known_sections = {"params", "initial", "grid", "weights", "sweep", "outputs"}
    unknown = set(cp.sections()) - known_sections
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")

    raw_params = _section_floats(cp, "params", _PARAM_KEYS, optional=("u1",))
    u1_fixed = raw_params.pop("u1", None)
    if u1_fixed is not None and not (0.0 <= u1_fixed <= 1.0):
        raise ConfigError("[params] u1 must lie in [0, 1]")
    try:
        params = ModelParams(**raw_params)
    except ValueError as exc:
        raise ConfigError(f"[params]: {exc}") from exc

    initial = grid = weights = sweep_opts = None
    if cp.has_section("initial"):
        raw = _section_floats(cp, "initial", ("s", "i1", "i2", "a"))
        try:
            initial = State(raw["s"], raw["i1"], raw["i2"], raw["a"]).validate()
        except ValueError as exc:
            raise ConfigError(f"[initial]: {exc}") from exc
    if cp.has_section("grid"):
        raw = _section_floats(cp, "grid", ("t_final", "n_steps"), optional=("t0",))
        n_steps = raw["n_steps"]
        if n_steps != int(n_steps):
            raise ConfigError("[grid] n_steps must be an integer")
        try:
            grid = TimeGrid(raw.get("t0", 0.0), raw["t_final"], int(n_steps))
        except ValueError as exc:
            raise ConfigError(f"[grid]: {exc}") from exc
    if cp.has_section("weights"):
        raw = _section_floats(cp, "weights", ("a", "b1", "b2", "b3"))
        try:
            weights = ObjectiveWeights(**raw)
        except ValueError as exc:
            raise ConfigError(f"[weights]: {exc}") from exc
    if cp.has_section("sweep"):
        raw = _section_floats(
            cp,
            "sweep",
            (),
            optional=("relaxation", "tolerance", "max_iterations", "fixed_u1", "fixed_u2", "fixed_u3"),
        )
        if "max_iterations" in raw:
            if raw["max_iterations"] != int(raw["max_iterations"]):
                raise ConfigError("[sweep] max_iterations must be an integer")
            raw["max_iterations"] = int(raw["max_iterations"])
        try:
            sweep_opts = SweepOptions(**raw)
        except ValueError as exc:
            raise ConfigError(f"[sweep]: {exc}") from exc

    out_dir = None
    make_plots = True
    if cp.has_section("outputs"):
        if cp.has_option("outputs", "dir"):
            out_dir = cp.get("outputs", "dir")
        if cp.has_option("outputs", "plots"):
            try:
                make_plots = cp.getboolean("outputs", "plots")
            except ValueError as exc:
                raise ConfigError("[outputs] plots must be a boolean") from exc
        unknown = [k for k in cp.options("outputs") if k not in ("dir", "plots")]
        if unknown:
            raise ConfigError(f"[outputs] has unknown keys: {', '.join(sorted(unknown))}")

    return Scenario(
        params=params,
        initial=initial,
        grid=grid,
        u1_fixed=u1_fixed,
        weights=weights,
        sweep_opts=sweep_opts,
        out_dir=out_dir,
        make_plots=make_plots,
    )


def _resolve_out_dir(cli_out, scenario: Scenario) -> Path:
    out = cli_out or scenario.out_dir or os.environ.get("TOOL_OUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require(scenario: Scenario, command: str, **pieces) -> None:
    missing = [name for name, value in pieces.items() if value is None]
    if missing:
        raise ConfigError(f"{command} needs section(s): {', '.join(missing)}")


def _fmt(value) -> str:
    return _FMT.format(value) if isinstance(value, float) else str(value)


def _emit_kv(pairs) -> None:
    for key, value in pairs:
        print(f"{key}={_fmt(value)}")


def _plot_lines(path, x, series, xlabel, title) -> None:
    """Best-effort SVG line chart; failures only warn."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        n = len(series)
        if n == 4:
            fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
            for ax, (label, values) in zip(axes.flat, series):
                ax.plot(x, values)
                ax.set_ylabel(label)
                ax.grid(alpha=0.3)
            for ax in axes[-1]:
                ax.set_xlabel(xlabel)
            fig.suptitle(title)
        else:
            fig, ax = plt.subplots(figsize=(8, 4.5))
            for label, values in series:
                ax.plot(x, values, label=label)
            ax.set_xlabel(xlabel)
            ax.grid(alpha=0.3)
            ax.legend()
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    except Exception as exc:  # plotting must never gate the pipeline
        print(f"warning: plot {path} skipped: {exc}", file=sys.stderr)


def _uncontrolled_trajectory(scenario: Scenario) -> Trajectory:
    u1 = scenario.u1_fixed or 0.0
    u = ControlVector(u1, 1.0, 1.0)

    def field(y, t):
        return rhs_controlled(State.from_array(y), scenario.params, u)

    traj = integrate_forward(field, scenario.initial.as_array(), scenario.grid)
    return traj


def _nearest_equilibrium(final: np.ndarray, params: ModelParams, u1: float):
    candidates = [("disease-free", disease_free_equilibrium(params).state)]
    endemic = endemic_equilibrium(params, u1)
    if endemic is not None:
        candidates.append(("endemic", endemic.state))
    return min(
        ((float(np.linalg.norm(final - st.as_array())), kind) for kind, st in candidates),
    )


def run_simulate(scenario: Scenario, out_dir: Path) -> int:
    _require(scenario, "simulate", initial=scenario.initial, grid=scenario.grid)
    traj = _uncontrolled_trajectory(scenario)
    csv_path = out_dir / "trajectory.csv"
    write_trajectory_csv(traj, csv_path)
    if scenario.make_plots:
        times = scenario.grid.times()
        series = list(zip(("S", "I1", "I2", "A"), traj.states.T))
        _plot_lines(out_dir / "compartments.svg", times, series, "t", "compartment dynamics")
    final = traj.states[-1]
    distance, kind = _nearest_equilibrium(final, scenario.params, scenario.u1_fixed or 0.0)
    print(f"wrote {csv_path}")
    print(
        "final state: "
        f"S={_fmt(final[0])} I1={_fmt(final[1])} I2={_fmt(final[2])} A={_fmt(final[3])}"
    )
    print(f"nearest equilibrium: {kind} (distance {_fmt(distance)})")
    print(f"clamped mass: {_fmt(traj.clamped_mass)}")
    return EXIT_OK


def run_analyze(scenario: Scenario) -> int:
    params = scenario.params
    u1 = scenario.u1_fixed or 0.0
    breakdown = basic_reproduction_number(params, u1)
    dfe = dfe_stability(params, u1)
    endemic = endemic_stability(params, u1)

    print(f"reproduction number: r0 = {_fmt(breakdown.r0)}  (u1 = {_fmt(u1)})")
    print(
        "  route contributions: "
        + " + ".join(_fmt(z) for z in (breakdown.zeta1, breakdown.zeta2, breakdown.zeta3, breakdown.zeta4))
    )
    st = dfe.equilibrium.state
    print(f"disease-free equilibrium: ({_fmt(st.S)}, 0, 0, 0)")
    print(f"  criterion verdict: {dfe.criterion_verdict}, eigenvalue verdict: {dfe.eigen_verdict}")
    if endemic is None:
        print("endemic equilibrium: absent (r0 <= 1)")
    else:
        st = endemic.equilibrium.state
        print(
            "endemic equilibrium: "
            f"({_fmt(st.S)}, {_fmt(st.I1)}, {_fmt(st.I2)}, {_fmt(st.A)})"
        )
        print(
            f"  criterion verdict: {endemic.criterion_verdict} "
            f"({endemic.sign_changes} coefficient sign changes), "
            f"eigenvalue verdict: {endemic.eigen_verdict}"
        )
    print()

    pairs = [
        ("r0", breakdown.r0),
        ("zeta1", breakdown.zeta1),
        ("zeta2", breakdown.zeta2),
        ("zeta3", breakdown.zeta3),
        ("zeta4", breakdown.zeta4),
        ("dfe", dfe.criterion_verdict),
        ("dfe_eigen", dfe.eigen_verdict),
        ("dfe_a1", dfe.poly_coeffs[0]),
        ("dfe_a2", dfe.poly_coeffs[1]),
        ("dfe_a3", dfe.poly_coeffs[2]),
        ("dfe_s", dfe.equilibrium.state.S),
        ("endemic", "absent" if endemic is None else "present"),
    ]
    if endemic is not None:
        eq = endemic.equilibrium
        pairs += [
            ("endemic_stability", endemic.criterion_verdict),
            ("endemic_eigen", endemic.eigen_verdict),
            ("endemic_sign_changes", endemic.sign_changes),
        ]
        pairs += [(f"p{i}", coeff) for i, coeff in enumerate(endemic.poly_coeffs, start=1)]
        pairs += [
            ("s_star", eq.state.S),
            ("i1_star", eq.state.I1),
            ("i2_star", eq.state.I2),
            ("a_star", eq.state.A),
            ("n_star", eq.n_star),
            ("beta_m_star", eq.beta_m_star),
            ("b0", eq.b0),
            ("b1", eq.b1),
        ]
    _emit_kv(pairs)
    return EXIT_OK


def run_optimize(scenario: Scenario, out_dir: Path) -> int:
    _require(
        scenario,
        "optimize",
        initial=scenario.initial,
        grid=scenario.grid,
        weights=scenario.weights,
    )
    opts = scenario.sweep_opts or SweepOptions()
    baseline = _uncontrolled_trajectory(scenario)
    solution = forward_backward_sweep(
        scenario.params, scenario.weights, scenario.initial, scenario.grid, opts
    )

    write_trajectory_csv(baseline, out_dir / "uncontrolled.csv")
    write_trajectory_csv(solution.trajectory, out_dir / "controlled.csv")
    if scenario.make_plots:
        times = scenario.grid.times()
        series = list(zip(("u1", "u2", "u3"), solution.trajectory.controls.T))
        _plot_lines(out_dir / "controls.svg", times, series, "t", "control profile")

    final_controlled = solution.trajectory.states[-1, 1]
    final_uncontrolled = baseline.states[-1, 1]
    print(f"wrote {out_dir / 'uncontrolled.csv'} and {out_dir / 'controlled.csv'}")
    _emit_kv(
        [
            ("objective", solution.objective),
            ("iterations", solution.iterations),
            ("converged", "true" if solution.converged else "false"),
            ("final_residual", solution.residuals[-1] if solution.residuals else math.inf),
            ("final_i1_controlled", final_controlled),
            ("final_i1_uncontrolled", final_uncontrolled),
        ]
    )
    if not solution.converged:
        print("warning: sweep did not converge within max_iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _sweep_samples(scenario: Scenario, axis: str, lo: float, hi: float, count: int):
    base_u1 = scenario.u1_fixed or 0.0
    for value in np.linspace(lo, hi, count):
        value = float(value)
        if axis == "u1":
            if not (0.0 <= value <= 1.0):
                raise ConfigError("u1 sweep values must lie in [0, 1]")
            yield value, scenario.params, value
        else:
            try:
                varied = replace(scenario.params, **{axis: value})
            except ValueError as exc:
                raise ConfigError(f"sweep value {axis}={value} rejected: {exc}") from exc
            yield value, varied, base_u1


def run_sweep(scenario: Scenario, out_dir: Path, axis: str, lo: float, hi: float, count: int) -> int:
    if axis != "u1" and axis not in _PARAM_KEYS:
        raise ConfigError(f"unknown sweep axis {axis!r} (model parameter name or u1)")
    if count < 1:
        raise ConfigError("count must be >= 1")
    header = "value,r0,dfe_stability,endemic,endemic_stability,s_star,i1_star,i2_star,a_star"
    rows = []
    for value, params, u1 in _sweep_samples(scenario, axis, lo, hi, count):
        r0 = basic_reproduction_number(params, u1).r0
        dfe = dfe_stability(params, u1)
        endemic = endemic_stability(params, u1)
        if endemic is None:
            rows.append(f"{_fmt(value)},{_fmt(r0)},{dfe.criterion_verdict},absent,,,,,")
        else:
            st = endemic.equilibrium.state
            rows.append(
                f"{_fmt(value)},{_fmt(r0)},{dfe.criterion_verdict},present,"
                f"{endemic.criterion_verdict},{_fmt(st.S)},{_fmt(st.I1)},{_fmt(st.I2)},{_fmt(st.A)}"
            )
    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(header + "\n")
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {csv_path} ({count} samples of {axis})")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hivcontrol",
        description="simulate, analyze and optimally control the four-compartment HIV/AIDS model",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("simulate", "integrate the uncontrolled dynamics and write the trajectory"),
        ("analyze", "report reproduction number, equilibria and stability"),
        ("optimize", "run the forward-backward sweep against the uncontrolled baseline"),
        ("sweep", "scan one parameter and tabulate threshold/stability output"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="scenario INI file")
        cmd.add_argument("--out", default=None, help="output directory (default: $TOOL_OUT_DIR or .)")
        if name == "sweep":
            cmd.add_argument("--axis", required=True, help="model parameter name or u1")
            cmd.add_argument("--range", required=True, metavar="LO:HI", help="sweep interval")
            cmd.add_argument("--count", required=True, type=int, help="number of samples")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.config)
        out_dir = _resolve_out_dir(args.out, scenario)
        if args.command == "simulate":
            return run_simulate(scenario, out_dir)
        if args.command == "analyze":
            return run_analyze(scenario)
        if args.command == "optimize":
            return run_optimize(scenario, out_dir)
        try:
            lo, hi = (float(part) for part in args.range.split(":", 1))
        except ValueError as exc:
            raise ConfigError(f"--range must be LO:HI, got {args.range!r}") from exc
        return run_sweep(scenario, out_dir, args.axis, lo, hi, args.count)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
