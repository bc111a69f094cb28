"""Stochastic Lagrangian machinery: loops, particle flows, deformation
gradients, Jacobian bookkeeping and the back-to-labels transport solve.

Particle positions are kept *unwrapped* (real coordinates, not reduced mod
2*pi) so loops stay continuous and windings are preserved; field evaluation
is periodic so wrapping is never needed.

Flavors: 'strat' advances the Stratonovich flow with a predictor-corrector
(Heun) step matching the field scheme; 'ito' advances the Ito flow with
Euler-Maruyama.  Deformation gradients are always integrated in Ito form;
for 'strat' the noise-induced drift of the equivalent Ito flow is included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LoopResolutionError, PreconditionError, ValidationError
from .grid import PointEvaluator, SpectralField, spectral_differentiate
from .integrators import FieldTrajectory
from .lie import _masked_fft, advect_values
from .noise import BrownianDriver

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# Material loops
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaterialLoop:
    """Closed discretized curve; point P wraps to point 0.

    ``winding`` holds the integer homology class per axis, so tangents of
    torus-winding loops (whose coordinates are not periodic in the loop
    parameter) stay spectrally accurate.
    """

    points: np.ndarray  # (P, d), unwrapped
    winding: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 3:
            raise ValidationError("a loop needs at least 3 points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "winding", tuple(int(w) for w in self.winding))
        if len(self.winding) != pts.shape[1]:
            raise ValidationError("winding length must match dimension")

    @property
    def P(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def _periodic_part(self) -> np.ndarray:
        s = np.arange(self.P) / self.P
        return self.points - TWO_PI * s[:, None] * np.asarray(self.winding)

    def tangents(self) -> np.ndarray:
        """dGamma/ds at the nodes by spectral differentiation in s."""
        per = self._periodic_part()
        m = np.fft.fftfreq(self.P, d=1.0 / self.P)
        if self.P % 2 == 0:
            m = m.copy()
            m[self.P // 2] = 0.0
        dper = np.real(np.fft.ifft(TWO_PI * 1j * m[:, None] * np.fft.fft(per, axis=0), axis=0))
        return dper + TWO_PI * np.asarray(self.winding)

    def spacing_ratio(self) -> float:
        """max adjacent gap / mean gap (closure segment included)."""
        seg = np.diff(np.vstack([self.points, self.points[:1] + TWO_PI * np.asarray(self.winding)]),
                      axis=0)
        gaps = np.linalg.norm(seg, axis=1)
        return float(gaps.max() / gaps.mean())

    def check_spacing(self, max_ratio: float = 4.0):
        r = self.spacing_ratio()
        if r > max_ratio:
            raise LoopResolutionError(
                f"loop spacing ratio {r:.2f} exceeds {max_ratio}; refine the loop")

    def refine(self, factor: int = 2) -> "MaterialLoop":
        """Trigonometric upsampling of the loop parametrization."""
        per = self._periodic_part()
        c = np.fft.fft(per, axis=0)
        P2 = self.P * factor
        c2 = np.zeros((P2, self.d), dtype=np.complex128)
        h = self.P // 2
        c2[:h] = c[:h]
        c2[-h:] = c[-h:]
        pts = np.real(np.fft.ifft(c2 * factor, axis=0))
        s2 = np.arange(P2) / P2
        pts = pts + TWO_PI * s2[:, None] * np.asarray(self.winding)
        return MaterialLoop(pts, self.winding)

    def reversed(self) -> "MaterialLoop":
        pts = np.roll(self.points[::-1], 1, axis=0)
        pts[1:] -= TWO_PI * np.asarray(self.winding)  # keep unwrapped continuity
        return MaterialLoop(pts, tuple(-w for w in self.winding))

    def with_points(self, pts: np.ndarray) -> "MaterialLoop":
        return MaterialLoop(pts, self.winding)

    def signed_area(self) -> float:
        """Signed enclosed area of a contractible 2d loop (spectral Green)."""
        if self.d != 2:
            raise ValidationError("signed_area is 2d-only")
        if any(self.winding):
            raise ValidationError("signed_area requires a contractible loop")
        t = self.tangents()
        return float(np.mean(self.points[:, 0] * t[:, 1]))


def make_loop(kind: str, P: int = 256, center=None, radius: float = 1.0,
              level: float = np.pi, axis: int = 0, points=None,
              d: int = 2) -> MaterialLoop:
    """Construct a standard loop.

    kind 'circle': radius < pi around ``center`` (2d; in 3d the circle lies
    in the plane normal to the last axis at height center[2]).
    kind 'axis_line': homologically nontrivial line along ``axis`` with the
    transverse coordinates pinned at ``level``.
    kind 'custom': explicit closed point list (validated non-degenerate).
    """
    s = np.arange(P) / P
    if kind == "circle":
        if not 0.0 < radius < np.pi:
            raise ValidationError("circle radius must lie in (0, pi)")
        if center is None:
            center = (np.pi,) * d
        center = np.asarray(center, dtype=np.float64)
        d = center.size
        ang = TWO_PI * s
        pts = np.tile(center, (P, 1))
        pts[:, 0] += radius * np.cos(ang)
        pts[:, 1] += radius * np.sin(ang)
        return MaterialLoop(pts, (0,) * d)
    if kind == "axis_line":
        if axis >= d:
            raise ValidationError("axis out of range")
        pts = np.full((P, d), float(level))
        pts[:, axis] = TWO_PI * s
        winding = tuple(1 if a == axis else 0 for a in range(d))
        return MaterialLoop(pts, winding)
    if kind == "custom":
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 3:
            raise ValidationError("custom loop needs at least 3 points")
        centered = pts - pts.mean(axis=0)
        svals = np.linalg.svd(centered, compute_uv=False)
        if svals.size < 2 or svals[1] <= 1e-12 * max(svals[0], 1.0):
            raise ValidationError("custom points are collinear: not a closed rectifiable loop")
        return MaterialLoop(pts, (0,) * pts.shape[1])
    raise ValidationError(f"unknown loop kind {kind!r}")


# ---------------------------------------------------------------------------
# Particle flows
# ---------------------------------------------------------------------------

@dataclass
class FlowEnsemble:
    """Particle states along a stochastic flow, saved every step.

    positions: (n_times, M, d); defgrad: (n_times, M, d, d) or None;
    jac_exponent: (n_times, M) accumulated log-Jacobian integrals or None.
    """

    times: np.ndarray
    positions: np.ndarray
    flavor: str
    defgrad: np.ndarray | None = None
    jac_exponent: np.ndarray | None = None

    @property
    def M(self) -> int:
        return self.positions.shape[1]

    def positions_at(self, index: int) -> np.ndarray:
        return self.positions[index]

    @property
    def final_positions(self) -> np.ndarray:
        return self.positions[-1]


def _stack_values(fields) -> list:
    return [f.values for f in fields]


class _FlowEngine:
    """Shared stepping core for particle advection.

    b_snapshots: drift field per time node (length n_steps + 1) or None;
    xi/eta: noise member fields (need not be solenoidal here - the Jacobian
    diagnostics probe compressible flows on purpose).
    """

    def __init__(self, grid, b_snapshots, xi_fields, eta_fields, nu, dt, driver,
                 flavor, with_defgrad=False, track_jacobian=False):
        if flavor not in ("strat", "ito"):
            raise ValidationError(f"unknown flow flavor {flavor!r}")
        self.grid = grid
        self.b = b_snapshots
        self.xi = list(xi_fields)
        self.eta = list(eta_fields)
        self.nu = float(nu)
        self.dt = float(dt)
        self.driver = driver
        self.flavor = flavor
        self.with_defgrad = with_defgrad or track_jacobian
        self.track_jacobian = track_jacobian
        self.root_2nu = np.sqrt(2.0 * self.nu)
        if driver.k_w < len(self.xi):
            raise ValidationError("driver W channels fewer than xi members")
        if self.root_2nu > 0 and driver.k_b < len(self.eta):
            raise ValidationError("driver B channels fewer than eta members")

        if self.flavor == "strat":
            self.induced = _induced_drift_field(grid, self.xi)
            if self.root_2nu > 0 and self.eta:
                eta_ind = _induced_drift_field(grid, self.eta)
                self.induced = SpectralField.from_coeffs(
                    grid, self.induced.coeffs * 1.0 + (2.0 * self.nu) * eta_ind.coeffs)
        else:
            self.induced = None
        if self.track_jacobian:
            self._prepare_jacobian_fields()

    def _prepare_jacobian_fields(self):
        grid = self.grid
        self.div_xi = [spectral_differentiate(x, "divergence") for x in self.xi]
        trace_sq = SpectralField.zeros(grid, rank=0)
        for x in self.xi:
            gx = spectral_differentiate_tensor(x)
            vals = np.einsum("ij...,ji...->...", gx, gx)
            trace_sq = trace_sq + _masked_fft(grid, vals, 0)
        self.xi_trace_sq = trace_sq
        self.div_b = None if self.b is None else [
            spectral_differentiate(f, "divergence") for f in self.b]

    # -- single-time evaluations -----------------------------------------
    def _drift_at(self, ev: PointEvaluator, n: int) -> np.ndarray:
        if self.b is None:
            out = np.zeros_like(ev.points)
        else:
            out = ev.eval_field(self.b[n])
        if self.induced is not None:
            out = out + ev.eval_field(self.induced)
        return out

    def _noise_sum(self, ev: PointEvaluator, dW: np.ndarray, dB: np.ndarray) -> np.ndarray:
        out = np.zeros_like(ev.points)
        for k, x in enumerate(self.xi):
            out += dW[k] * ev.eval_field(x)
        if self.root_2nu > 0:
            for k, e in enumerate(self.eta):
                out += self.root_2nu * dB[k] * ev.eval_field(e)
        return out

    def _defgrad_generator(self, ev: PointEvaluator, n: int, dW, dB) -> np.ndarray:
        """Per-particle matrix L with dF = L F over one Ito step."""
        m = ev.points.shape[0]
        L = np.zeros((m, self.grid.d, self.grid.d))
        if self.b is not None:
            L += self.dt * ev.eval_gradient(self.b[n])
        if self.induced is not None:
            L += self.dt * ev.eval_gradient(self.induced)
        for k, x in enumerate(self.xi):
            L += dW[k] * ev.eval_gradient(x)
        if self.root_2nu > 0:
            for k, e in enumerate(self.eta):
                L += self.root_2nu * dB[k] * ev.eval_gradient(e)
        return L

    # -- main loop ---------------------------------------------------------
    def run(self, points: np.ndarray, n_steps: int) -> FlowEnsemble:
        X = np.array(points, dtype=np.float64)
        m = X.shape[0]
        pos_hist = [X.copy()]
        F = np.tile(np.eye(self.grid.d), (m, 1, 1)) if self.with_defgrad else None
        F_hist = [F.copy()] if F is not None else None
        acc = np.zeros(m) if self.track_jacobian else None
        acc_hist = [acc.copy()] if acc is not None else None

        for n in range(n_steps):
            dW, dB = self.driver.sample_increments(n)
            ev = PointEvaluator(self.grid, X)
            if self.flavor == "ito":
                drift = np.zeros_like(X) if self.b is None else ev.eval_field(self.b[n])
                X_new = X + self.dt * drift + self._noise_sum(ev, dW, dB)
            else:
                d1 = self._drift_strat(ev, n)
                pred = X + self.dt * d1 + self._noise_sum(ev, dW, dB)
                ev2 = PointEvaluator(self.grid, pred)
                d2 = self._drift_strat(ev2, n + 1)
                X_new = X + 0.5 * self.dt * (d1 + d2) \
                    + 0.5 * (self._noise_sum(ev, dW, dB) + self._noise_sum(ev2, dW, dB))
            if F is not None:
                L = self._defgrad_generator(ev, n, dW, dB)
                F = F + np.einsum("mij,mjk->mik", L, F)
                F_hist.append(F.copy())
            if acc is not None:
                acc = acc + self._jacobian_increment(ev, n, dW)
                acc_hist.append(acc.copy())
            X = X_new
            pos_hist.append(X.copy())

        times = self.dt * np.arange(n_steps + 1)
        return FlowEnsemble(
            times=times,
            positions=np.array(pos_hist),
            flavor=self.flavor,
            defgrad=np.array(F_hist) if F_hist is not None else None,
            jac_exponent=np.array(acc_hist) if acc_hist is not None else None,
        )

    def _drift_strat(self, ev: PointEvaluator, n: int) -> np.ndarray:
        n = min(n, len(self.b) - 1) if self.b is not None else n
        out = np.zeros_like(ev.points) if self.b is None else ev.eval_field(self.b[n])
        # the Heun average supplies the particle-level Stratonovich value,
        # so no induced drift enters the position update
        return out

    def _jacobian_increment(self, ev: PointEvaluator, n: int, dW) -> np.ndarray:
        out = np.zeros(ev.points.shape[0])
        if self.div_b is not None:
            idx = min(n, len(self.div_b) - 1)
            out += self.dt * ev.eval_field(self.div_b[idx])
        out -= 0.5 * self.dt * ev.eval_field(self.xi_trace_sq)
        for k in range(len(self.xi)):
            out += dW[k] * ev.eval_field(self.div_xi[k])
        return out


def spectral_differentiate_tensor(v: SpectralField) -> np.ndarray:
    """Physical gradient tensor (d_j v_i) of a vector field."""
    from .grid import gradient_tensor

    return gradient_tensor(v)


def _induced_drift_field(grid, members) -> SpectralField:
    from .grid import gradient_tensor

    total = np.zeros((grid.d,) + grid.shape)
    for f in members:
        total += advect_values(f.values, gradient_tensor(f))
    return _masked_fft(grid, 0.5 * total, 1)


def _check_driver_match(u_traj: FieldTrajectory, driver: BrownianDriver):
    own = u_traj.driver
    if driver is own:
        return
    if (abs(driver.dt - own.dt) > 1e-15 or driver.k_w != own.k_w
            or driver.w_seed != own.w_seed or driver.n_steps < u_traj.n_steps):
        raise ValidationError("driver does not reproduce the trajectory's W increments")


def advect(u_traj: FieldTrajectory, points: np.ndarray, flavor: str = "strat",
           driver: BrownianDriver | None = None, with_defgrad: bool = False,
           track_jacobian: bool = False, include_b_noise: bool = False) -> FlowEnsemble:
    """Advect particles under the trajectory's flow with matched increments.

    The W increments must be the ones that drove the field.  The pathwise
    circulation statements live on the transport-noise-only flow, so the
    auxiliary sqrt(2 nu) B-channel noise is excluded unless
    ``include_b_noise`` is set (pass a member-keyed driver for that case).
    """
    u_traj.require_every_step()
    driver = driver if driver is not None else u_traj.driver
    _check_driver_match(u_traj, driver)
    model = u_traj.model
    b_snapshots = u_traj.snapshots if model.advecting else None
    eta = model.basis.eta if (include_b_noise and model.nu > 0) else ()
    nu = model.nu if include_b_noise else 0.0
    engine = _FlowEngine(u_traj.grid, b_snapshots, model.basis.xi, eta, nu,
                         u_traj.dt, driver, flavor, with_defgrad, track_jacobian)
    return engine.run(np.atleast_2d(points), u_traj.n_steps)


def advect_loop(u_traj: FieldTrajectory, loop: MaterialLoop, flavor: str = "strat",
                driver: BrownianDriver | None = None) -> "LoopTrajectory":
    ens = advect(u_traj, loop.points, flavor, driver)
    return LoopTrajectory(loop, ens)


@dataclass
class LoopTrajectory:
    """A material loop advected along a flow; loop_at(i) rebuilds the loop."""

    initial: MaterialLoop
    ensemble: FlowEnsemble

    @property
    def times(self) -> np.ndarray:
        return self.ensemble.times

    def loop_at(self, index: int) -> MaterialLoop:
        return self.initial.with_points(self.ensemble.positions[index])

    @property
    def flavor(self) -> str:
        return self.ensemble.flavor


def evolve_deformation(u_traj: FieldTrajectory, points: np.ndarray,
                       flavor: str = "strat",
                       driver: BrownianDriver | None = None) -> FlowEnsemble:
    """Positions plus deformation gradients along the flow (identity at t=0)."""
    return advect(u_traj, points, flavor, driver, with_defgrad=True)


def jacobian_formula_check(b_traj, xi_fields, driver: BrownianDriver, dt: float,
                           n_steps: int, sample_points: np.ndarray) -> dict:
    """Exercise the exact log-Jacobian formula for the Ito flow.

    Integrates the deformation gradient directly and, in parallel,
    accumulates the closed-form exponent

        int (div b - 1/2 sum_k grad(xi_k)^T : grad(xi_k)) ds
        + sum_k int div xi_k dW_k,

    both along the same Ito path; compressible b and xi are allowed.
    Returns the per-time max relative mismatch between det(grad X) and the
    exponential of the accumulated exponent.
    """
    if isinstance(b_traj, FieldTrajectory):
        grid = b_traj.grid
        snapshots = b_traj.snapshots
    elif isinstance(b_traj, SpectralField):
        grid = b_traj.grid
        snapshots = [b_traj] * (n_steps + 1)
    elif b_traj is None:
        if not xi_fields:
            raise ValidationError("need at least a drift or one noise member")
        grid = xi_fields[0].grid
        snapshots = None
    else:
        raise ValidationError("b_traj must be a FieldTrajectory, SpectralField or None")
    engine = _FlowEngine(grid, snapshots, xi_fields, (), 0.0, dt, driver,
                         "ito", with_defgrad=True, track_jacobian=True)
    ens = engine.run(np.atleast_2d(sample_points), n_steps)
    dets = np.linalg.det(ens.defgrad)
    formula = np.exp(ens.jac_exponent)
    rel = np.abs(dets - formula) / np.abs(formula)
    return {
        "ensemble": ens,
        "max_rel_mismatch": float(rel.max()),
        "final_rel_mismatch": float(rel[-1].max()),
        "determinants": dets,
        "formula_values": formula,
    }


# ---------------------------------------------------------------------------
# Back-to-labels displacement transport
# ---------------------------------------------------------------------------

@dataclass
class DisplacementTrajectory:
    """Displacement a_t with labels A_t(x) = x + a_t(x); a_0 = 0."""

    times: np.ndarray
    snapshots: list  # vector SpectralFields (not solenoidal)
    dt: float
    save_stride: int

    @property
    def final(self) -> SpectralField:
        return self.snapshots[-1]

    def labels_at_points(self, a: SpectralField, points: np.ndarray) -> np.ndarray:
        ev = PointEvaluator(a.grid, np.atleast_2d(points))
        return np.atleast_2d(points) + ev.eval_field(a)


def _displacement_rhs(grid, u_vals, a: SpectralField, xi_fields, eta_fields, root_2nu,
                      dW, dB, dt) -> np.ndarray:
    """One Stratonovich stage increment of the displacement transport."""
    ga = spectral_differentiate_tensor(a)
    inc = -(dt * (advect_values(u_vals, ga) + u_vals)) if u_vals is not None else 0.0
    if u_vals is None:
        inc = np.zeros((grid.d,) + grid.shape)
    for k, x in enumerate(xi_fields):
        inc -= dW[k] * (advect_values(x.values, ga) + x.values)
    if root_2nu > 0:
        for k, e in enumerate(eta_fields):
            inc -= root_2nu * dB[k] * (advect_values(e.values, ga) + e.values)
    return inc


def solve_back_to_labels(u_traj: FieldTrajectory, driver: BrownianDriver | None = None,
                         nu: float | None = None, save_stride: int | None = None,
                         grad_bound: float = 8.0) -> DisplacementTrajectory:
    """Integrate the label-displacement transport SPDE with the Heun scheme.

    The displacement solves (Stratonovich form)

        da + [u . grad a + u] dt + sum_k [xi_k . grad a + xi_k] o dW_k
           + sqrt(2 nu) sum_k [eta_k . grad a + eta_k] o dB_k = 0,

    so A_t = x + a_t inverts the particle flow.  Aborts with
    ``SteepeningError`` when max|grad a| exceeds ``grad_bound``.
    """
    from .errors import SteepeningError

    u_traj.require_every_step()
    driver = driver if driver is not None else u_traj.driver
    _check_driver_match(u_traj, driver)
    model = u_traj.model
    grid = u_traj.grid
    nu = model.nu if nu is None else nu
    root_2nu = np.sqrt(2.0 * nu)
    eta = model.basis.eta if root_2nu > 0 else ()
    if root_2nu > 0 and driver.k_b < len(eta):
        raise ValidationError("driver B channels fewer than eta members")
    xi = model.basis.xi
    stride = save_stride if save_stride is not None else u_traj.save_stride
    n_steps = u_traj.n_steps

    a = SpectralField.zeros(grid, rank=1)
    times = [0.0]
    snaps = [a]
    mask = grid.dealias_mask
    for n in range(n_steps):
        dW, dB = driver.sample_increments(n)
        u_n = u_traj.snapshots[n].values if model.advecting else None
        u_np1 = u_traj.snapshots[n + 1].values if model.advecting else None
        inc1 = _displacement_rhs(grid, u_n, a, xi, eta, root_2nu, dW, dB, u_traj.dt)
        pred = SpectralField.from_coeffs(
            grid, a.coeffs + np.fft.fftn(inc1, axes=grid.spatial_axes(1)) * mask)
        inc2 = _displacement_rhs(grid, u_np1, pred, xi, eta, root_2nu, dW, dB, u_traj.dt)
        both = 0.5 * (inc1 + inc2)
        a = SpectralField.from_coeffs(
            grid, a.coeffs + np.fft.fftn(both, axes=grid.spatial_axes(1)) * mask)
        if not np.all(np.isfinite(a.coeffs)):
            raise SteepeningError(f"label displacement became non-finite at step {n}")
        ga = spectral_differentiate_tensor(a)
        if np.max(np.abs(ga)) > grad_bound:
            raise SteepeningError(
                f"label-field gradient {np.max(np.abs(ga)):.2f} exceeded bound {grad_bound} "
                f"at step {n}")
        if (n + 1) % stride == 0 or n + 1 == n_steps:
            times.append((n + 1) * u_traj.dt)
            snaps.append(a)
    return DisplacementTrajectory(np.array(times), snaps, u_traj.dt, stride)
