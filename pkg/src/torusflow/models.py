"""Drift and noise assembly for the five stochastic fluid model families.

Every family fits the common Ito skeleton

    du + P f dt + sum_k P sigma_k dW_k = 0,

with P the Leray projection.  The families differ in their transport
operator and dissipation:

* ``euler_poincare``      - circulation-transport nonlinearity lie_transpose;
                            pathwise circulation conserved along the
                            Stratonovich flow, energy not conserved.
* ``energy_euler``        - plain advective nonlinearity; energy conserved
                            pathwise, circulation not conserved.
* ``ns_poincare``         - euler_poincare plus the double-lie_transpose
                            dissipation over the eta family (the usual
                            viscous Laplacian for constant Euclidean eta);
                            circulation conserved in conditional mean.
* ``energy_ns``           - energy_euler plus the projected-advection
                            dissipation; pathwise energy balance.
* ``passive_transport``   - linear transport by the noise alone, of a
                            circulation 1-form (kind 'oneform') or of a
                            vector field by the commutator (kind
                            'vectorfield', the kinematic-dynamo model).

``euler_poincare_ito_loops`` is an auxiliary variant whose drift is adjusted
so circulation is conserved along loops advected with *Ito* (rather than
Stratonovich) noise; it exists for the circulation-transport diagnostics.

Drifts come in two forms: ``ito`` (full drift of the skeleton above) and
``strat`` (the drift of the equivalent Stratonovich equation, i.e. without
the noise-induced correction), which is what the Heun integrator consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import PreconditionError, ValidationError
from .grid import SpectralField, divergence_rel, gradient_tensor, leray_project
from .lie import (
    _masked_fft,
    advect_values,
    advection_term,
    grad_transpose_values,
    lie_bracket,
    lie_transpose,
)
from .noise import NoiseBasis

FAMILIES = (
    "euler_poincare",
    "energy_euler",
    "ns_poincare",
    "energy_ns",
    "passive_transport",
    "euler_poincare_ito_loops",
)

#: families whose drift includes the fluid self-advection u
SELF_ADVECTING = ("euler_poincare", "energy_euler", "ns_poincare", "energy_ns",
                  "euler_poincare_ito_loops")
VISCOUS = ("ns_poincare", "energy_ns")


@dataclass(frozen=True)
class ModelSpec:
    """Selector plus parameters for one model family."""

    family: str
    basis: NoiseBasis
    nu: float = 0.0
    passive_kind: str = "oneform"
    solenoidal_tol: float = 1e-6

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")
        if self.nu < 0:
            raise ValidationError("nu must be nonnegative")
        if self.family in VISCOUS and self.nu > 0 and self.basis.k_b == 0:
            raise ValidationError(f"{self.family} with nu > 0 requires eta members")
        if self.passive_kind not in ("oneform", "vectorfield"):
            raise ValidationError(f"unknown passive_kind {self.passive_kind!r}")

    @property
    def grid(self):
        return self.basis.grid

    @property
    def advecting(self) -> bool:
        """Whether the model's own field enters the Lagrangian flow drift."""
        return self.family in SELF_ADVECTING

    def describe(self) -> str:
        extra = f"(nu={self.nu})" if self.family in VISCOUS else ""
        extra = f"({self.passive_kind})" if self.family == "passive_transport" else extra
        return self.family + extra


def _check_state(model: ModelSpec, u: SpectralField):
    if u.rank != 1 or u.grid != model.grid:
        raise PreconditionError("state must be a vector field on the model grid")
    r = divergence_rel(u)
    if r > model.solenoidal_tol:
        raise PreconditionError(f"state not divergence-free: rel. divergence {r:.3e}")


def _double_advection_projected(model: ModelSpec, u: SpectralField, members, grads) -> np.ndarray:
    """sum_k w_k . grad P(w_k . grad u) in coefficient space (dealiased)."""
    grid = model.grid
    u_grad = gradient_tensor(u)
    total = np.zeros((grid.d,) + grid.shape, dtype=np.complex128)
    for w in members:
        inner = leray_project(_masked_fft(grid, advect_values(w.values, u_grad), 1))
        outer = _masked_fft(grid, advect_values(w.values, gradient_tensor(inner)), 1)
        total += outer.coeffs
    return total


def sigma_raw(model: ModelSpec, u: SpectralField, k: int,
              u_grad: np.ndarray | None = None) -> SpectralField:
    """Unprojected noise operator sigma_k(u) of the family."""
    basis = model.basis
    if not 0 <= k < basis.k_w:
        raise PreconditionError(f"channel {k} out of range [0, {basis.k_w})")
    xi, gxi = basis.xi[k], basis.xi_gradients[k]
    gu = u_grad if u_grad is not None else gradient_tensor(u)
    grid = model.grid
    if model.family in ("euler_poincare", "ns_poincare", "euler_poincare_ito_loops"):
        return lie_transpose(xi, u, xi_grad=gxi, u_grad=gu)
    if model.family in ("energy_euler", "energy_ns"):
        return _masked_fft(grid, advect_values(xi.values, gu), 1)
    if model.passive_kind == "oneform":
        return lie_transpose(xi, u, xi_grad=gxi, u_grad=gu)
    return lie_bracket(xi, u, xi_grad=gxi, w_grad=gu)


def noise_eval(model: ModelSpec, u: SpectralField, k: int) -> SpectralField:
    """Projected noise operator P sigma_k(u)."""
    _check_state(model, u)
    return leray_project(sigma_raw(model, u, k))


def drift_raw(model: ModelSpec, u: SpectralField, form: str = "ito",
              u_grad: np.ndarray | None = None) -> SpectralField:
    """Unprojected drift f(u); 'ito' includes the noise-induced correction,
    'strat' is the Stratonovich-form drift without it."""
    if form not in ("ito", "strat"):
        raise ValidationError(f"unknown drift form {form!r}")
    grid = model.grid
    basis = model.basis
    gu = u_grad if u_grad is not None else gradient_tensor(u)
    fam = model.family

    if fam in ("euler_poincare", "ns_poincare", "euler_poincare_ito_loops"):
        f = lie_transpose(u, u, xi_grad=gu, u_grad=gu)
        if form == "ito":
            for xi, gxi in zip(basis.xi, basis.xi_gradients):
                inner = lie_transpose(xi, u, xi_grad=gxi, u_grad=gu)
                f = f - 0.5 * lie_transpose(xi, inner, xi_grad=gxi)
        if fam == "euler_poincare_ito_loops" and basis.k_w:
            # shift by the transport along the particle-level induced drift,
            # moving circulation conservation from Stratonovich to Ito loops
            f = f - lie_transpose(basis.induced_drift, u, u_grad=gu)
        if fam == "ns_poincare" and model.nu > 0:
            for eta, geta in zip(basis.eta, basis.eta_gradients):
                inner = lie_transpose(eta, u, xi_grad=geta, u_grad=gu)
                f = f - model.nu * lie_transpose(eta, inner, xi_grad=geta)
        return f

    if fam in ("energy_euler", "energy_ns"):
        f = _masked_fft(grid, advect_values(u.values, gu), 1)
        if form == "ito":
            c = f.coeffs - 0.5 * _double_advection_projected(model, u, basis.xi, basis.xi_gradients)
            f = SpectralField.from_coeffs(grid, c)
        if fam == "energy_ns" and model.nu > 0:
            c = f.coeffs - model.nu * _double_advection_projected(model, u, basis.eta,
                                                                  basis.eta_gradients)
            f = SpectralField.from_coeffs(grid, c)
        return f

    # passive transport: no self-advection; drift is the Ito correction only
    f = SpectralField.zeros(grid, rank=1)
    if form == "ito":
        for k in range(basis.k_w):
            xi, gxi = basis.xi[k], basis.xi_gradients[k]
            inner = sigma_raw(model, u, k, u_grad=gu)
            if model.passive_kind == "oneform":
                outer = lie_transpose(xi, inner, xi_grad=gxi)
            else:
                outer = lie_bracket(xi, inner, xi_grad=gxi)
            f = f - 0.5 * outer
    return f


def drift_eval(model: ModelSpec, u: SpectralField, form: str = "ito") -> SpectralField:
    """Projected drift P f(u) entering du + P f dt + sum P sigma dW = 0."""
    _check_state(model, u)
    return leray_project(drift_raw(model, u, form))


def eval_rhs(model: ModelSpec, u: SpectralField, form: str):
    """Projected (drift, [sigma_k]) sharing one gradient evaluation of u."""
    gu = gradient_tensor(u)
    f = leray_project(drift_raw(model, u, form, u_grad=gu))
    sigmas = [leray_project(sigma_raw(model, u, k, u_grad=gu))
              for k in range(model.basis.k_w)]
    return f, sigmas
