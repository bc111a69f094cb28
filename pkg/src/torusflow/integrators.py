"""Time integration of the field SPDE.

Two schemes march du + P f dt + sum_k P sigma_k dW_k = 0:

* ``strat_heun`` - predictor-corrector (trapezoidal) rule in both drift and
  noise applied to the Stratonovich form; the implicit trapezoidal noise
  average supplies the Ito correction, so the Stratonovich drift is used.
* ``ito_em``     - Euler-Maruyama on the Ito form with the full drift.

Both re-project every step, keeping snapshots solenoidal to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import PreconditionError, StabilityError, ValidationError
from .grid import SpectralField, leray_project, linf_norm
from .models import ModelSpec, eval_rhs
from .noise import BrownianDriver

SCHEMES = ("strat_heun", "ito_em")


@dataclass
class FieldTrajectory:
    """Saved snapshots of one field SPDE path."""

    times: np.ndarray
    snapshots: list
    model: ModelSpec
    driver: BrownianDriver
    scheme: str
    dt: float
    save_stride: int

    @property
    def grid(self):
        return self.model.grid

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def at(self, index: int) -> SpectralField:
        return self.snapshots[index]

    @property
    def final(self) -> SpectralField:
        return self.snapshots[-1]

    def require_every_step(self):
        if self.save_stride != 1:
            raise PreconditionError("this operation needs a trajectory saved every step")


def _cfl_guard(u: SpectralField, dt: float, step: int | None):
    grid = u.grid
    speed = linf_norm(u)
    if speed * dt >= 0.5 * grid.spacing:
        where = "" if step is None else f" at step {step}"
        raise StabilityError(
            f"CFL guard tripped{where}: max|u| dt = {speed * dt:.3e} "
            f">= 0.5 h = {0.5 * grid.spacing:.3e}")


def _combine(u: SpectralField, contribs) -> SpectralField:
    """u + sum of (coefficient, field) contributions, then re-projected."""
    c = u.coeffs.copy()
    for w, f in contribs:
        c += w * f.coeffs
    return leray_project(SpectralField.from_coeffs(u.grid, c))


def advance(state: SpectralField, model: ModelSpec, dt: float, dW: np.ndarray,
            scheme: str = "strat_heun", step: int | None = None) -> SpectralField:
    """One time step of the field SPDE; dW holds the K_W increments."""
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}")
    dW = np.asarray(dW, dtype=np.float64)
    if dW.shape != (model.basis.k_w,):
        raise PreconditionError(f"dW must have length {model.basis.k_w}")
    _cfl_guard(state, dt, step)

    if scheme == "ito_em":
        f, sigmas = eval_rhs(model, state, "ito")
        contribs = [(-dt, f)] + [(-dW[k], s) for k, s in enumerate(sigmas)]
        return _combine(state, contribs)

    f1, s1 = eval_rhs(model, state, "strat")
    pred = _combine(state, [(-dt, f1)] + [(-dW[k], s) for k, s in enumerate(s1)])
    f2, s2 = eval_rhs(model, pred, "strat")
    contribs = [(-0.5 * dt, f1), (-0.5 * dt, f2)]
    contribs += [(-0.5 * dW[k], s) for k, s in enumerate(s1)]
    contribs += [(-0.5 * dW[k], s) for k, s in enumerate(s2)]
    return _combine(state, contribs)


def run(model: ModelSpec, u0: SpectralField, T: float, dt: float,
        driver: BrownianDriver, scheme: str = "strat_heun",
        save_stride: int = 1) -> FieldTrajectory:
    """March the SPDE from u0 to time T, saving every ``save_stride`` steps."""
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(T, dt):
        raise ValidationError(f"T = {T} is not an integer multiple of dt = {dt}")
    if driver.n_steps < n_steps or abs(driver.dt - dt) > 1e-12 * dt:
        raise ValidationError("driver mesh does not cover the requested run")
    if driver.k_w != model.basis.k_w:
        raise ValidationError("driver W-channel count does not match the basis")

    u = leray_project(u0.dealiased())
    times = [0.0]
    snapshots = [u]
    for n in range(n_steps):
        dW, _ = driver.sample_increments(n)
        u = advance(u, model, dt, dW, scheme, step=n)
        if not np.all(np.isfinite(u.values)):
            raise StabilityError(f"non-finite field values after step {n}")
        if (n + 1) % save_stride == 0 or n + 1 == n_steps:
            times.append((n + 1) * dt)
            snapshots.append(u)
    return FieldTrajectory(np.array(times), snapshots, model, driver, scheme, dt, save_stride)
