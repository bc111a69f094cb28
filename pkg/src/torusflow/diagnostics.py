"""Pathwise measured functionals: circulation, transport decompositions,
energy ledgers, Weber/Cauchy representations, helicities and fluxes.

Quadrature conventions follow the stochastic calculus of each statement:
integrals against dW use midpoint (trapezoidal) evaluation for Stratonovich
statements and left-point evaluation for Ito statements; dt integrals use
the trapezoidal rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import GridMismatchError, PreconditionError, ValidationError
from .grid import (
    PointEvaluator,
    SpectralField,
    TorusGrid,
    gradient_tensor,
    l2_inner,
    l2_norm,
    leray_project,
    spectral_differentiate,
)
from .integrators import FieldTrajectory
from .lagrangian import (
    DisplacementTrajectory,
    FlowEnsemble,
    LoopTrajectory,
    MaterialLoop,
)
from .lie import (
    _masked_fft,
    advect_values,
    grad_transpose_values,
    lie_bracket,
    lie_transpose,
)
from .models import ModelSpec, drift_raw, sigma_raw


@dataclass
class TimeSeries:
    """One scalar diagnostic sampled on a run's save mesh."""

    times: np.ndarray
    values: np.ndarray
    label: str
    run_manifest_digest: str = ""

    def final(self) -> float:
        return float(self.values[-1])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def loglog_slope(xs, ys, floor: float = 1e-300) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.maximum(np.abs(np.asarray(ys, dtype=np.float64)), floor)
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# ---------------------------------------------------------------------------
# Circulation
# ---------------------------------------------------------------------------

def circulation(u: SpectralField, loop: MaterialLoop, max_spacing_ratio: float = 4.0) -> float:
    """Line integral of u around the loop by spectral quadrature in s."""
    if u.rank != 1 or loop.d != u.grid.d:
        raise GridMismatchError("circulation needs a vector field matching the loop dimension")
    loop.check_spacing(max_spacing_ratio)
    vals = PointEvaluator(u.grid, loop.points).eval_field(u)
    return float(np.mean(np.sum(vals * loop.tangents(), axis=1)))


def _loop_integral(field_values_at_pts: np.ndarray, loop: MaterialLoop) -> float:
    return float(np.mean(np.sum(field_values_at_pts * loop.tangents(), axis=1)))


def kelvin_residual(u_traj: FieldTrajectory, loop_traj: LoopTrajectory,
                    digest: str = "") -> TimeSeries:
    """C_t - C_0 along the advected loop."""
    u_traj.require_every_step()
    if len(loop_traj.times) != len(u_traj.times):
        raise ValidationError("loop trajectory and field trajectory use different meshes")
    values = np.empty(len(u_traj.times))
    for i in range(len(u_traj.times)):
        values[i] = circulation(u_traj.at(i), loop_traj.loop_at(i))
    return TimeSeries(u_traj.times.copy(), values - values[0], "kelvin_residual", digest)


# ---------------------------------------------------------------------------
# Circulation-transport decomposition
# ---------------------------------------------------------------------------

def _hessian_contraction(u: SpectralField, xi: SpectralField) -> np.ndarray:
    """(xi ox xi) : (grad ox grad) u in physical space."""
    grid = u.grid
    xi_vals = xi.values
    out = np.zeros((grid.d,) + grid.shape)
    for i in range(grid.d):
        ci = u.coeffs[i]
        for a in range(grid.d):
            for b in range(a, grid.d):
                dd = np.real(np.fft.ifftn(-grid.k[a] * grid.k[b] * ci))
                w = xi_vals[a] * xi_vals[b]
                out[i] += w * dd if a == b else 2.0 * w * dd
    return out


def _decomposition_integrands(model: ModelSpec, u: SpectralField, flavor: str):
    """Integrand fields of the circulation-transport identity at one time.

    Returns (advection_minus_drift, [noise_drift_k], [martingale_k]); all
    terms are defined modulo gradients, which loop integration annihilates.
    """
    grid = model.grid
    basis = model.basis
    gu = gradient_tensor(u)
    f = drift_raw(model, u, "ito", u_grad=gu)
    if model.advecting:
        t_adv = lie_transpose(u, u, xi_grad=gu, u_grad=gu) - f
    else:
        t_adv = SpectralField.zeros(grid, rank=1) - f
    noise_drift = []
    martingale = []
    for k in range(basis.k_w):
        xi, gxi = basis.xi[k], basis.xi_gradients[k]
        sig = sigma_raw(model, u, k, u_grad=gu)
        lt = lie_transpose(xi, u, xi_grad=gxi, u_grad=gu)
        lt_sig = lie_transpose(xi, sig, xi_grad=gxi)
        if flavor == "strat":
            inner = lie_transpose(xi, lt, xi_grad=gxi)
            drift_k = 0.5 * inner - lt_sig
        else:
            hess = _hessian_contraction(u, xi)
            cross = grad_transpose_values(gxi, advect_values(xi.values, gu))
            drift_k = _masked_fft(grid, 0.5 * hess + cross, 1) - lt_sig
        noise_drift.append(drift_k)
        martingale.append(lt - sig)
    return t_adv, noise_drift, martingale


def circulation_transport_decomposition(u_traj: FieldTrajectory, loop_traj: LoopTrajectory,
                                        flavor: str, digest: str = "") -> dict:
    """Accumulate the right-hand side of the circulation-transport identity.

    Per step the loop integrals of the advection-drift group, the per-channel
    noise-drift groups and the per-channel martingale integrands are formed
    on the advected loop and accumulated.  The identity is an Ito
    decomposition in both flavors, so the dW terms use left-point quadrature
    throughout (a midpoint rule would add the quadratic covariation and
    spoil closure); dt terms use the trapezoidal rule for the 'strat' loop
    flow and left point for 'ito'.  The closure residual is the measured
    circulation change minus the accumulated total.
    """
    if flavor not in ("strat", "ito"):
        raise ValidationError(f"unknown flavor {flavor!r}")
    if loop_traj.flavor != flavor:
        raise ValidationError(
            f"loop trajectory was advected with flavor {loop_traj.flavor!r}, not {flavor!r}")
    u_traj.require_every_step()
    model = u_traj.model
    driver = u_traj.driver
    n_times = len(u_traj.times)
    k_w = model.basis.k_w

    measured = np.empty(n_times)
    adv_vals = np.empty(n_times)
    nd_vals = np.empty((n_times, k_w))
    mg_vals = np.empty((n_times, k_w))
    for i in range(n_times):
        loop = loop_traj.loop_at(i)
        ev = PointEvaluator(model.grid, loop.points)
        t_adv, noise_drift, marting = _decomposition_integrands(model, u_traj.at(i), flavor)
        measured[i] = _loop_integral(ev.eval_field(u_traj.at(i)), loop)
        adv_vals[i] = _loop_integral(ev.eval_field(t_adv), loop)
        for k in range(k_w):
            nd_vals[i, k] = _loop_integral(ev.eval_field(noise_drift[k]), loop)
            mg_vals[i, k] = _loop_integral(ev.eval_field(marting[k]), loop)

    dt = u_traj.dt
    adv_acc = np.zeros(n_times)
    nd_acc = np.zeros(n_times)
    mg_acc = np.zeros(n_times)
    for n in range(n_times - 1):
        dW, _ = driver.sample_increments(n)
        if flavor == "strat":
            adv_inc = 0.5 * (adv_vals[n] + adv_vals[n + 1]) * dt
            nd_inc = 0.5 * np.sum(nd_vals[n] + nd_vals[n + 1]) * dt
        else:
            adv_inc = adv_vals[n] * dt
            nd_inc = np.sum(nd_vals[n]) * dt
        mg_inc = np.sum(mg_vals[n] * dW[:k_w])
        adv_acc[n + 1] = adv_acc[n] + adv_inc
        nd_acc[n + 1] = nd_acc[n] + nd_inc
        mg_acc[n + 1] = mg_acc[n] + mg_inc

    times = u_traj.times.copy()
    rhs_total = adv_acc + nd_acc + mg_acc
    closure = (measured - measured[0]) - rhs_total
    mk = lambda vals, label: TimeSeries(times, vals, label, digest)
    return {
        "measured_change": mk(measured - measured[0], "circulation_change"),
        "advection_drift": mk(adv_acc, "advection_drift_integral"),
        "noise_drift": mk(nd_acc, "noise_drift_integral"),
        "martingale": mk(mg_acc, "martingale_integral"),
        "rhs_total": mk(rhs_total, "rhs_total"),
        "closure_residual": mk(closure, "closure_residual"),
    }


# ---------------------------------------------------------------------------
# Vorticity flux
# ---------------------------------------------------------------------------

def vorticity_flux(u: SpectralField, loop: MaterialLoop, surface: dict | None = None) -> float:
    """Vorticity flux through a surface spanning the loop.

    2d: the flux through the enclosed region equals the loop circulation by
    Green's theorem, and is computed that way (the loop must be
    contractible).  3d: the flux is integrated over a triangulated spanning
    disc; ``surface`` must supply {'center', 'radius', 'normal_axis'} (plus
    optional 'rings'/'sectors') for a planar circle loop.
    """
    grid = u.grid
    if grid.d == 2:
        if any(loop.winding):
            raise ValidationError("2d vorticity flux needs a contractible loop")
        return circulation(u, loop)
    if surface is None:
        raise ValidationError("3d vorticity flux needs a spanning-surface description")
    omega = spectral_differentiate(u, "curl")
    centers, normals = disc_triangulation(**surface)
    w = PointEvaluator(grid, centers).eval_field(omega)
    return float(np.sum(np.sum(w * normals, axis=1)))


def disc_triangulation(center, radius: float, normal_axis: int = 2,
                       rings: int = 48, sectors: int = 96):
    """Fan triangulation of a planar disc; returns (centroids, area-normals)."""
    center = np.asarray(center, dtype=np.float64)
    d = center.size
    axes = [a for a in range(d) if a != normal_axis]
    tri_centers = []
    tri_normals = []
    r_edges = radius * np.arange(rings + 1) / rings
    th_edges = 2.0 * np.pi * np.arange(sectors + 1) / sectors
    for i in range(rings):
        r0, r1 = r_edges[i], r_edges[i + 1]
        for j in range(sectors):
            t0, t1 = th_edges[j], th_edges[j + 1]
            quad = [(r0, t0), (r1, t0), (r1, t1), (r0, t1)]
            tris = ([quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]) if i else \
                ([quad[0], quad[1], quad[2]],)
            for tri in tris:
                pts = np.zeros((3, d))
                for m, (r, th) in enumerate(tri):
                    pts[m] = center
                    pts[m, axes[0]] += r * np.cos(th)
                    pts[m, axes[1]] += r * np.sin(th)
                e1, e2 = pts[1] - pts[0], pts[2] - pts[0]
                n = 0.5 * np.cross(e1, e2)
                if np.linalg.norm(n) == 0.0:
                    continue
                tri_centers.append(pts.mean(axis=0))
                tri_normals.append(n)
    return np.array(tri_centers), np.array(tri_normals)


def flux_by_area_quadrature(u: SpectralField, center, radius: float,
                            n_r: int = 64, n_th: int = 128) -> float:
    """Independent 2d oracle: area integral of scalar vorticity over a disc
    by Gauss-Legendre (radial) x trapezoid (angular) quadrature."""
    if u.grid.d != 2:
        raise ValidationError("area quadrature oracle is 2d-only")
    omega = spectral_differentiate(u, "curl")
    nodes, weights = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * radius * (nodes + 1.0)
    wr = 0.5 * radius * weights
    th = 2.0 * np.pi * np.arange(n_th) / n_th
    R, TH = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([center[0] + R.ravel() * np.cos(TH.ravel()),
                    center[1] + R.ravel() * np.sin(TH.ravel())], axis=1)
    vals = PointEvaluator(u.grid, pts).eval_coeffs(omega.coeffs).reshape(n_r, n_th)
    return float(np.sum((vals * R).sum(axis=1) * (2.0 * np.pi / n_th) * wr))


# ---------------------------------------------------------------------------
# Energy ledger
# ---------------------------------------------------------------------------

@dataclass
class EnergyLedger:
    """Pathwise energy bookkeeping for one trajectory.

    ``closure_residual`` measures E_t - E_0 minus the accumulated
    quadratures of the family's energy identity; for the energy-conserving
    families ``dissipation_integral`` alone closes the balance.
    """

    times: np.ndarray
    energy: np.ndarray
    dissipation_integral: np.ndarray
    drift_quadratures: dict
    martingale: np.ndarray
    closure_residual: np.ndarray
    label: str
    run_manifest_digest: str = ""

    def energy_drift_rel(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])) / abs(self.energy[0]))

    def balance_residual_rel(self) -> float:
        """max |E_t + dissipation - E_0| / E_0 (pathwise balance form)."""
        r = self.energy + self.dissipation_integral - self.energy[0]
        return float(np.max(np.abs(r)) / abs(self.energy[0]))


def energy_ledger(u_traj: FieldTrajectory, digest: str = "") -> EnergyLedger:
    """Energy series plus the Ito energy-identity quadratures.

    The identity d|u|^2 = [-2(u, Pf) + sum_k |P sigma_k|^2] dt
    - 2 sum_k (u, P sigma_k) dW_k holds for every family; the drift part is
    accumulated by the trapezoidal rule and the martingale part by
    left-point (Ito) quadrature.  Energy is reported as E = |u|^2 / 2.
    """
    u_traj.require_every_step()
    model = u_traj.model
    basis = model.basis
    driver = u_traj.driver
    n_times = len(u_traj.times)

    energy = np.empty(n_times)
    drift_integrand = np.empty(n_times)
    mart_integrand = np.empty((n_times, basis.k_w))
    diss_integrand = np.empty(n_times)
    from .models import eval_rhs

    for i in range(n_times):
        u = u_traj.at(i)
        energy[i] = 0.5 * l2_inner(u, u)
        f, sigmas = eval_rhs(model, u, "ito")
        drift_integrand[i] = -2.0 * l2_inner(u, f) + sum(l2_inner(s, s) for s in sigmas)
        for k, s in enumerate(sigmas):
            mart_integrand[i, k] = -2.0 * l2_inner(u, s)
        diss = 0.0
        if model.nu > 0:
            gu = gradient_tensor(u)
            for eta in basis.eta:
                adv = leray_project(_masked_fft(model.grid, advect_values(eta.values, gu), 1))
                diss += model.nu * l2_inner(adv, adv)
        diss_integrand[i] = diss

    dt = u_traj.dt
    drift_acc = np.zeros(n_times)
    mart_acc = np.zeros(n_times)
    diss_acc = np.zeros(n_times)
    for n in range(n_times - 1):
        dW, _ = driver.sample_increments(n)
        drift_acc[n + 1] = drift_acc[n] + 0.5 * (drift_integrand[n] + drift_integrand[n + 1]) * dt
        mart_acc[n + 1] = mart_acc[n] + np.sum(mart_integrand[n] * dW[:basis.k_w])
        diss_acc[n + 1] = diss_acc[n] + 0.5 * (diss_integrand[n] + diss_integrand[n + 1]) * dt

    closure = (energy - energy[0]) - 0.5 * (drift_acc + mart_acc)
    return EnergyLedger(
        times=u_traj.times.copy(),
        energy=energy,
        dissipation_integral=diss_acc,
        drift_quadratures={"ito_drift": 0.5 * drift_acc},
        martingale=0.5 * mart_acc,
        closure_residual=closure,
        label=f"energy_ledger[{model.describe()}]",
        run_manifest_digest=digest,
    )


def circulation_family_energy_groups(u_traj: FieldTrajectory) -> dict:
    """The ledger's drift split into noise and viscous groups for the
    circulation-preserving families:

        d|u|^2 = sum_k [ |P lt_k u|^2 - (lt_k u, [xi_k, u]) ] dt
                 - 2 nu sum_k (lt^eta_k u, [eta_k, u]) dt
                 - 2 sum_k (u, grad(xi_k)^T u) dW_k,

    with lt the circulation-transport operator.  Returned accumulated in
    time for direct comparison with ``energy_ledger`` quadratures.
    """
    model = u_traj.model
    if model.family not in ("euler_poincare", "ns_poincare"):
        raise ValidationError("group split applies to the circulation-preserving families")
    basis = model.basis
    n_times = len(u_traj.times)
    noise_g = np.empty(n_times)
    visc_g = np.empty(n_times)
    mart_g = np.empty((n_times, basis.k_w))
    for i in range(n_times):
        u = u_traj.at(i)
        gu = gradient_tensor(u)
        total = 0.0
        for k in range(basis.k_w):
            xi, gxi = basis.xi[k], basis.xi_gradients[k]
            lt = lie_transpose(xi, u, xi_grad=gxi, u_grad=gu)
            br = lie_bracket(xi, u, xi_grad=gxi, w_grad=gu)
            plt = leray_project(lt)
            total += l2_inner(plt, plt) - l2_inner(lt, br)
            mart_g[i, k] = -2.0 * l2_inner(
                u, _masked_fft(model.grid, grad_transpose_values(gxi, u.values), 1))
        noise_g[i] = total
        v = 0.0
        if model.nu > 0:
            for eta, geta in zip(basis.eta, basis.eta_gradients):
                lt = lie_transpose(eta, u, xi_grad=geta, u_grad=gu)
                br = lie_bracket(eta, u, xi_grad=geta, w_grad=gu)
                v += -2.0 * model.nu * l2_inner(lt, br)
        visc_g[i] = v
    dt = u_traj.dt
    acc = lambda g: np.concatenate([[0.0], np.cumsum(0.5 * (g[:-1] + g[1:]) * dt)])
    mart_acc = np.zeros(n_times)
    for n in range(n_times - 1):
        dW, _ = u_traj.driver.sample_increments(n)
        mart_acc[n + 1] = mart_acc[n] + np.sum(mart_g[n] * dW[:basis.k_w])
    return {"noise_drift": acc(noise_g), "viscous_drift": acc(visc_g), "martingale": mart_acc}


# ---------------------------------------------------------------------------
# Weber / Cauchy representations
# ---------------------------------------------------------------------------

def label_grid_points(grid: TorusGrid, n_label: int) -> np.ndarray:
    """Uniform label lattice as an (n_label^d, d) point array."""
    x1 = np.arange(n_label) * (2.0 * np.pi / n_label)
    mesh = np.meshgrid(*([x1] * grid.d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def weber_pullback_residual(u_traj: FieldTrajectory, ensemble: FlowEnsemble,
                            n_label: int, digest: str = "") -> dict:
    """Pullback-mode Weber check on a label lattice.

    r(a) = (grad X_t(a))^T u_t(X_t(a)) - u_0(a) should be a label-space
    gradient; reports |curl_a r| / |r| over time plus the loop integral of
    r around a label-space circle (both vanish when the representation
    holds).  ``ensemble`` must carry deformation gradients for the lattice
    points produced by ``label_grid_points(grid, n_label)``.
    """
    if ensemble.defgrad is None:
        raise PreconditionError("weber pullback mode needs deformation gradients")
    grid = u_traj.grid
    label_grid = TorusGrid(grid.d, n_label)
    u0 = u_traj.at(0)
    ev0 = PointEvaluator(grid, label_grid_points(grid, n_label))
    u0_vals = ev0.eval_field(u0)  # (M, d)
    shape = (n_label,) * grid.d
    times = u_traj.times
    curl_rel = np.empty(len(times))
    loop_mismatch = np.empty(len(times))
    from .lagrangian import make_loop

    probe = make_loop("circle", P=128, center=(np.pi,) * grid.d, radius=1.0, d=grid.d)
    for i in range(len(times)):
        X = ensemble.positions[i]
        F = ensemble.defgrad[i]
        uX = PointEvaluator(grid, X).eval_field(u_traj.at(i))
        r = np.einsum("mij,mi->mj", F, uX) - u0_vals
        r_field = SpectralField.from_values(
            label_grid, r.T.reshape((grid.d,) + shape))
        curl = spectral_differentiate(r_field, "curl")
        curl_rel[i] = l2_norm(curl) / max(l2_norm(r_field), 1e-300)
        vals = PointEvaluator(label_grid, probe.points).eval_field(r_field)
        loop_mismatch[i] = _loop_integral(vals, probe)
    return {
        "curl_residual": TimeSeries(times.copy(), curl_rel, "weber_pullback_curl", digest),
        "loop_mismatch": TimeSeries(times.copy(), loop_mismatch, "weber_pullback_loop", digest),
    }


def weber_label_reconstruction(u_traj: FieldTrajectory, disp: DisplacementTrajectory,
                               digest: str = "") -> TimeSeries:
    """Label-grid Weber mode: rebuild u_t from u_0 and the back-to-labels map.

    Reconstructs P[(I + grad a_t)^T u_0(x + a_t)] on the field grid and
    reports the relative L2 distance to u_t at the displacement save times.
    """
    grid = u_traj.grid
    u0 = u_traj.at(0)
    out = np.empty(len(disp.times))
    for i, t in enumerate(disp.times):
        a = disp.snapshots[i]
        w = weber_velocity_from_displacement(u0, a)
        step = int(round(t / u_traj.dt))
        u_t = u_traj.at(step)
        out[i] = l2_norm(w - u_t) / max(l2_norm(u_t), 1e-300)
    return TimeSeries(np.array(disp.times), out, "weber_label_distance", digest)


def weber_velocity_from_displacement(u0: SpectralField, a: SpectralField) -> SpectralField:
    """P[(grad A)^T u0 o A] with A = x + a, evaluated on the grid."""
    grid = u0.grid
    pts = label_grid_points(grid, grid.n)
    ev = PointEvaluator(grid, pts)
    a_vals = ev.eval_field(a)  # equals grid samples
    u0_at_A = PointEvaluator(grid, pts + a_vals).eval_field(u0)
    ga = gradient_tensor(a)  # (i, j) = d_j a_i on the grid
    ga_pts = ga.reshape(grid.d, grid.d, -1).transpose(2, 0, 1)
    gA = np.eye(grid.d)[None] + ga_pts
    w = np.einsum("mij,mi->mj", gA, u0_at_A)
    w_field = SpectralField.from_values(grid, w.T.reshape((grid.d,) + grid.shape))
    return leray_project(w_field.dealiased())


def cauchy_residual(u_traj: FieldTrajectory, ensemble: FlowEnsemble,
                    label_points: np.ndarray, digest: str = "") -> TimeSeries:
    """Vorticity along particles against its label-space representation.

    2d: omega_t(X_t(a)) - omega_0(a); 3d: omega_t(X_t(a)) - grad X_t(a)
    applied to omega_0(a) (needs deformation gradients).  Reports the max
    absolute mismatch over the sample particles, normalized by
    max|omega_0|.
    """
    grid = u_traj.grid
    omega0 = spectral_differentiate(u_traj.at(0), "curl")
    ev0 = PointEvaluator(grid, label_points)
    w0 = ev0.eval_field(omega0)
    scale = max(np.max(np.abs(omega0.values)), 1e-300)
    times = u_traj.times
    out = np.empty(len(times))
    for i in range(len(times)):
        omega_t = spectral_differentiate(u_traj.at(i), "curl")
        wt = PointEvaluator(grid, ensemble.positions[i]).eval_field(omega_t)
        if grid.d == 2:
            out[i] = np.max(np.abs(wt - w0)) / scale
        else:
            if ensemble.defgrad is None:
                raise PreconditionError("3d Cauchy residual needs deformation gradients")
            stretched = np.einsum("mij,mj->mi", ensemble.defgrad[i], w0)
            out[i] = np.max(np.abs(wt - stretched)) / scale
    return TimeSeries(times.copy(), out, "cauchy_residual", digest)


# ---------------------------------------------------------------------------
# Helicities
# ---------------------------------------------------------------------------

def helicity(u: SpectralField) -> float:
    """Integral of u . curl u (3d only)."""
    if u.grid.d != 3:
        raise ValidationError("helicity is defined in 3d")
    return l2_inner(u, spectral_differentiate(u, "curl"))


def magnetic_helicity(a: SpectralField, b: SpectralField) -> float:
    """L2 pairing of a vector potential with its field (3d only)."""
    if a.grid.d != 3:
        raise ValidationError("magnetic helicity is defined in 3d")
    return l2_inner(a, b)


def vector_potential_from_field(b: SpectralField) -> SpectralField:
    """Solenoidal potential A with curl A = b (3d Biot-Savart inversion)."""
    if b.grid.d != 3:
        raise ValidationError("vector potential inversion is 3d-only")
    curl_b = spectral_differentiate(b, "curl")
    return SpectralField.from_coeffs(b.grid, curl_b.coeffs * b.grid.inv_k_sq)
