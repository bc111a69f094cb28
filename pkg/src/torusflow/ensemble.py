"""Monte Carlo estimation of the conditional circulation and Weber
statements for the viscous circulation-preserving model.

The structure exploited throughout: the auxiliary B-channels never enter
the field equation, so one field solve per W-realization serves every
member; members differ only in the B-increments driving their
back-to-labels transport.  Conditioning on the W sigma-algebra is realized
by fixing the W seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import SteepeningError, ValidationError
from .grid import PointEvaluator, SpectralField, l2_norm
from .integrators import FieldTrajectory, run
from .lagrangian import MaterialLoop, solve_back_to_labels
from .models import ModelSpec
from .noise import BrownianDriver


@dataclass
class ConditionalEstimate:
    """Monte Carlo estimate of a conditional expectation at one time."""

    target: float
    mc_mean: float
    mc_stderr: float
    M: int
    failures: int
    w_seed: int
    b_seed: int
    member_values: np.ndarray
    stderr_reliable: bool = True

    def gap(self) -> float:
        return abs(self.mc_mean - self.target)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "mc_mean": self.mc_mean,
            "mc_stderr": self.mc_stderr,
            "M": self.M,
            "failures": self.failures,
            "seeds": {"w": self.w_seed, "b_base": self.b_seed},
            "stderr_reliable": self.stderr_reliable,
        }


def pullback_loop_integral(u0: SpectralField, a_T: SpectralField, loop: MaterialLoop) -> float:
    """Loop integral of (grad A)^T u0(A) over the *fixed* loop, A = x + a."""
    grid = u0.grid
    ev = PointEvaluator(grid, loop.points)
    a_pts = ev.eval_field(a_T)            # (P, d)
    ga_pts = ev.eval_gradient(a_T)        # (P, i, j) = d_j a_i
    u0_at_A = PointEvaluator(grid, loop.points + a_pts).eval_field(u0)
    gA = np.eye(grid.d)[None] + ga_pts
    w = np.einsum("mij,mi->mj", gA, u0_at_A)
    return float(np.mean(np.sum(w * loop.tangents(), axis=1)))


def _member_displacement(u_traj: FieldTrajectory, member: int):
    driver_m = u_traj.driver.for_member(member)
    return solve_back_to_labels(u_traj, driver=driver_m, save_stride=u_traj.n_steps)


def _collect_members(u_traj: FieldTrajectory, M: int, worker_fn, workers: int = 0,
                     max_failure_fraction: float = 0.10):
    """Run per-member computations; exclude failed members with a count.

    Failed members are excluded rather than resampled so the estimate is not
    biased toward tame auxiliary-noise paths.  Results are reduced in member
    order regardless of completion order.
    """
    values = [None] * M
    failures = 0

    def task(m):
        try:
            return worker_fn(m)
        except SteepeningError:
            return None

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(task, range(M)))
    else:
        out = [task(m) for m in range(M)]
    for m, v in enumerate(out):
        if v is None:
            failures += 1
        values[m] = v
    if failures > max_failure_fraction * M:
        raise ValidationError(
            f"{failures}/{M} ensemble members failed the steepening guard; aborting estimate")
    kept = [v for v in values if v is not None]
    return kept, failures


def conditional_kelvin(model: ModelSpec, u0: SpectralField, loop: MaterialLoop,
                       T: float, dt: float, w_seed: int, b_seed: int, M: int,
                       scheme: str = "strat_heun", workers: int = 0,
                       u_traj: FieldTrajectory | None = None) -> ConditionalEstimate:
    """Conditional circulation check at time T.

    target: circulation of u_T around the fixed loop; mc estimate: mean over
    members of the image-loop integral of u_0 under each member's
    back-to-labels map (equal to the circulation of u_0 around A_T(loop) by
    change of variables).  Reuses ``u_traj`` when supplied (it must come
    from the same (model, u0, dt, w_seed) configuration).
    """
    n_steps = int(round(T / dt))
    if u_traj is None:
        driver = BrownianDriver(dt, n_steps, model.basis.k_w, model.basis.k_b,
                                w_seed=w_seed, b_seed=b_seed)
        u_traj = run(model, u0, T, dt, driver, scheme)
    from .diagnostics import circulation

    target = circulation(u_traj.final, loop)
    u0_proj = u_traj.at(0)

    def member_value(m):
        disp = _member_displacement(u_traj, m)
        return pullback_loop_integral(u0_proj, disp.final, loop)

    kept, failures = _collect_members(u_traj, M, member_value, workers)
    vals = np.array(kept)
    mean = float(np.mean(vals))
    reliable = vals.size >= 2
    stderr = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if reliable else 0.0
    return ConditionalEstimate(target, mean, stderr, M, failures, w_seed,
                               u_traj.driver.b_seed, vals, stderr_reliable=reliable)


def conditional_weber(model: ModelSpec, u0: SpectralField, T: float, dt: float,
                      w_seed: int, b_seed: int, M: int, scheme: str = "strat_heun",
                      workers: int = 0,
                      u_traj: FieldTrajectory | None = None) -> dict:
    """Field-level conditional Weber reconstruction at time T.

    Averages the member reconstructions P[(grad A_T)^T u_0(A_T)] on the grid
    and reports the relative L2 distance to u_T.
    """
    from .diagnostics import weber_velocity_from_displacement

    n_steps = int(round(T / dt))
    if u_traj is None:
        driver = BrownianDriver(dt, n_steps, model.basis.k_w, model.basis.k_b,
                                w_seed=w_seed, b_seed=b_seed)
        u_traj = run(model, u0, T, dt, driver, scheme)
    u0_proj = u_traj.at(0)

    def member_field(m):
        disp = _member_displacement(u_traj, m)
        return weber_velocity_from_displacement(u0_proj, disp.final).coeffs

    kept, failures = _collect_members(u_traj, M, member_field, workers)
    mean_coeffs = np.mean(np.array(kept), axis=0)
    recon = SpectralField.from_coeffs(u_traj.grid, mean_coeffs)
    u_T = u_traj.final
    dist = l2_norm(recon - u_T) / max(l2_norm(u_T), 1e-300)
    return {
        "distance": dist,
        "reconstruction": recon,
        "failures": failures,
        "M": M,
        "u_final": u_T,
    }


def stderr_scaling(member_values: np.ndarray, sizes) -> dict:
    """stderr over nested member subsets plus the fitted log-log slope."""
    from .diagnostics import loglog_slope

    sizes = [int(s) for s in sizes]
    if any(s > member_values.size for s in sizes):
        raise ValidationError("subset size exceeds available members")
    errs = [float(np.std(member_values[:s], ddof=1) / np.sqrt(s)) for s in sizes]
    return {"sizes": sizes, "stderr": errs, "slope": loglog_slope(sizes, errs)}


def run_sweep(point_labels, point_values, kind: str = "dt-halving") -> dict:
    """Least-squares log-log slope over sweep points (>= 3 required)."""
    from .diagnostics import loglog_slope

    if len(point_labels) < 3:
        raise ValidationError("a sweep needs at least 3 points")
    return {
        "kind": kind,
        "points": [float(x) for x in point_labels],
        "values": [float(v) for v in point_values],
        "slope": loglog_slope(point_labels, point_values),
    }
