"""Time-marching driver behind the ``run`` subcommand."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebroid import anchor
from .config import ScenarioConfig, build_scenario
from .dynamics import (
    FlowState,
    Trajectory,
    cfl_number,
    consistency_residual,
    diagnostics,
    n_steps,
    pushforward_check_1d,
    step_rk4_info,
)
from .state import validate
from .storage import DiagnosticsWriter, write_snapshot

#: per-step drift of sum_i w_i rho_i before renormalization
SUM_DRIFT_TOL = 1e-10
#: L2 norm of div(sum_i w_i rho_i u_i) after re-projection
DIV_TOL = 1e-8
#: mass change per unit time
MASS_TOL = 1e-11
#: coset/velocity consistency
CONSISTENCY_TOL = 1e-8
#: 1D pushforward mismatch
PUSHFORWARD_TOL = 1e-4


@dataclass
class RunSummary:
    steps: int = 0
    t_final: float = 0.0
    energy_rel_drift: float = 0.0
    max_sum_drift: float = 0.0
    max_div: float = 0.0
    mass_drift: float = 0.0
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "t_final": self.t_final,
            "energy_rel_drift": self.energy_rel_drift,
            "max_sum_drift": self.max_sum_drift,
            "max_div": self.max_div,
            "mass_drift": self.mass_drift,
            "checks": self.checks,
            "passed": self.passed,
        }


def _check(value: float, tol: float | None) -> dict:
    value = float(value)
    return {"value": value, "tol": tol, "passed": bool(np.isfinite(value) and (tol is None or value <= tol))}


def run_simulation(cfg: ScenarioConfig, out_dir=None, log=print, snapshots: bool = True) -> RunSummary:
    """March a scenario to ``cfg.T`` writing diagnostics (and snapshots) every ``cfg.stride`` steps."""
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    state = build_scenario(cfg)
    initial = state
    summary = RunSummary()
    if cfg.checks.get("consistency", False):
        ra, rr = consistency_residual(state)
        summary.checks["consistency"] = _check(max(ra, rr), CONSISTENCY_TOL)

    steps = n_steps(cfg.T, cfg.dt)
    traj = Trajectory(state, track_vorticity=cfg.dim == 2)
    H0 = state.energy()
    masses0 = state.rho.quad.masses
    with DiagnosticsWriter(out / "diagnostics.csv", state.n) as diag:
        diag.write(diagnostics(traj.state, traj.kelvin_errors()))
        if snapshots:
            write_snapshot(traj.state, out / "snap_000000.mpf")
        for k in range(1, steps + 1):
            traj.step(cfg.dt)
            if k % cfg.stride == 0:
                diag.write(diagnostics(traj.state, traj.kelvin_errors()))
                if snapshots:
                    write_snapshot(traj.state, out / f"snap_{k:06d}.mpf")
                log(f"t={traj.state.t:.6g}  H={traj.state.energy():.12g}")

    final = traj.state
    summary.steps = steps
    summary.t_final = float(final.t)
    summary.energy_rel_drift = abs(final.energy() - H0) / H0 if H0 > 0 else abs(final.energy())
    summary.max_sum_drift = traj.max_sum_drift
    summary.max_div = traj.max_div
    summary.mass_drift = float(np.max(np.abs(final.rho.masses() - masses0)))
    summary.checks["sum_drift_per_step"] = _check(traj.max_sum_drift, SUM_DRIFT_TOL)
    summary.checks["div_after_projection"] = _check(traj.max_div, DIV_TOL)
    summary.checks["mass"] = _check(summary.mass_drift, MASS_TOL * max(1.0, cfg.T))
    summary.checks["final_state_valid"] = _check(0.0 if validate(final.u).passed else 1.0, 0.0)
    if cfg.checks.get("kelvin", False) and cfg.dim == 2:
        summary.checks["kelvin"] = _check(float(np.max(traj.kelvin_errors())), None)
    if cfg.checks.get("pushforward", False) and cfg.dim == 1:
        rep = pushforward_check_1d(initial, cfg.T, cfg.dt)
        summary.checks["pushforward"] = _check(float(np.max(rep.mismatch)), PUSHFORWARD_TOL)

    (out / "summary.json").write_text(json.dumps(summary.as_dict(), indent=2))
    return summary


def invariant_suite(state: FlowState, dt: float = 1e-3) -> dict:
    """Static and one-step invariants of a state; used by the ``check`` subcommand."""
    checks = {}
    rep = validate(state.u)
    for c in rep.checks:
        checks[f"validate.{c.name}"] = {"value": c.residual, "tol": c.tol, "passed": c.passed}
    if not rep.passed:
        return checks
    ra, rr = consistency_residual(state)
    checks["consistency"] = _check(max(ra, rr), CONSISTENCY_TOL)
    tangent = validate(anchor(state.u, state.rho))
    for c in tangent.checks:
        checks[f"anchor.{c.name}"] = {"value": c.residual, "tol": c.tol, "passed": c.passed}
    cfl = cfl_number(state, dt)
    if cfl > 0.5:
        dt = dt * 0.5 / cfl
    new, info = step_rk4_info(state, dt)
    checks["step.sum_drift"] = _check(info.sum_drift, SUM_DRIFT_TOL)
    checks["step.div_after_projection"] = _check(info.div_after, DIV_TOL)
    dm = float(np.max(np.abs(new.rho.masses() - state.rho.masses())))
    checks["step.mass"] = _check(dm, MASS_TOL)
    H0 = state.energy()
    dH = abs(new.energy() - H0) / H0 if H0 > 0 else abs(new.energy())
    checks["step.energy"] = _check(dH, 1e-10)
    return checks
