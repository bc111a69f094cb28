"""Vector-field operator calculus on the torus.

Two first-order operators drive everything here, both for fields u, xi
on the same grid:

* ``lie_bracket(xi, w) = xi.grad(w) - w.grad(xi)`` - the commutator, which
  transports vector quantities (vorticity, magnetic field);
* ``lie_transpose(xi, u) = xi.grad(u) + grad(xi)^T u`` - its L2 adjoint,
  which transports circulation integrands (in index form
  ``xi^j d_j u_i + (d_i xi^j) u_j``).

Products are formed pointwise in physical space and dealiased; second-order
compositions dealias the inner result before the outer product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, PreconditionError
from .grid import (
    SpectralField,
    TorusGrid,
    _check_same_grid,
    divergence_rel,
    gradient_tensor,
    l2_inner,
    l2_norm,
    leray_project,
    random_scalar_field,
    random_vector_field,
    spectral_differentiate,
)


def _masked_fft(grid: TorusGrid, values: np.ndarray, rank: int) -> SpectralField:
    axes = grid.spatial_axes(rank)
    c = np.fft.fftn(values, axes=axes) * grid.dealias_mask
    return SpectralField.from_coeffs(grid, c)


def advect_values(xi_vals: np.ndarray, grad_u: np.ndarray) -> np.ndarray:
    """(xi . grad) u in physical space from precomputed grad_u[i, j] = d_j u_i."""
    return np.einsum("j...,ij...->i...", xi_vals, grad_u)


def grad_transpose_values(grad_xi: np.ndarray, u_vals: np.ndarray) -> np.ndarray:
    """grad(xi)^T u in physical space: out_i = (d_i xi^j) u_j."""
    return np.einsum("ji...,j...->i...", grad_xi, u_vals)


def lie_bracket(xi: SpectralField, w: SpectralField,
                xi_grad: np.ndarray | None = None,
                w_grad: np.ndarray | None = None) -> SpectralField:
    """Commutator [xi, w] = xi.grad(w) - w.grad(xi), dealiased."""
    _check_same_grid(xi, w)
    if xi.rank != 1:
        raise GridMismatchError("lie_bracket expects vector fields")
    gw = w_grad if w_grad is not None else gradient_tensor(w)
    gxi = xi_grad if xi_grad is not None else gradient_tensor(xi)
    vals = advect_values(xi.values, gw) - advect_values(w.values, gxi)
    return _masked_fft(xi.grid, vals, 1)


def lie_transpose(xi: SpectralField, u: SpectralField,
                  xi_grad: np.ndarray | None = None,
                  u_grad: np.ndarray | None = None) -> SpectralField:
    """Circulation-transport operator xi.grad(u) + grad(xi)^T u, dealiased."""
    _check_same_grid(xi, u)
    if xi.rank != 1:
        raise GridMismatchError("lie_transpose expects vector fields")
    gu = u_grad if u_grad is not None else gradient_tensor(u)
    gxi = xi_grad if xi_grad is not None else gradient_tensor(xi)
    vals = advect_values(xi.values, gu) + grad_transpose_values(gxi, u.values)
    return _masked_fft(xi.grid, vals, 1)


def advection_term(w: SpectralField, u: SpectralField,
                   u_grad: np.ndarray | None = None) -> SpectralField:
    """Plain advection (w . grad) u, dealiased."""
    _check_same_grid(w, u)
    gu = u_grad if u_grad is not None else gradient_tensor(u)
    return _masked_fft(u.grid, advect_values(w.values, gu), 1)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def double_lie_transpose(xi: SpectralField, u: SpectralField, mode: str = "composed",
                         xi_grad: np.ndarray | None = None) -> SpectralField:
    """Second-order operator applying the circulation transport twice.

    mode 'composed' nests two first-order applications (inner result
    dealiased); 'expanded' evaluates the equivalent one-shot expansion
      (xi.grad xi).grad u + (xi ox xi):(grad ox grad)u
      + 2 grad(xi)^T (xi.grad u) + grad(xi.grad xi)^T u;
    'cross3d' (3d only) evaluates xi x curl(xi x curl u) + grad(xi.grad(xi.u)),
    which differs from the others by a pure gradient.
    """
    _check_same_grid(xi, u)
    grid = xi.grid
    gxi = xi_grad if xi_grad is not None else gradient_tensor(xi)
    if mode == "composed":
        inner = lie_transpose(xi, u, xi_grad=gxi)
        return lie_transpose(xi, inner, xi_grad=gxi)
    if mode == "expanded":
        gu = gradient_tensor(u)
        xi_vals = xi.values
        xi_dot_grad_xi = advect_values(xi_vals, gxi)
        adv_field = _masked_fft(grid, xi_dot_grad_xi, 1)
        g_adv = gradient_tensor(adv_field)
        # hessian contraction (xi ox xi) : grad grad u, built per component
        hess = np.zeros((grid.d,) + grid.shape)
        for i in range(grid.d):
            ci = u.coeffs[i]
            for a in range(grid.d):
                for b in range(a, grid.d):
                    dd = np.real(np.fft.ifftn(-grid.k[a] * grid.k[b] * ci))
                    w = xi_vals[a] * xi_vals[b]
                    hess[i] += w * dd if a == b else 2.0 * w * dd
        vals = (
            advect_values(xi_dot_grad_xi, gu)
            + hess
            + 2.0 * grad_transpose_values(gxi, advect_values(xi_vals, gu))
            + grad_transpose_values(g_adv, u.values)
        )
        return _masked_fft(grid, vals, 1)
    if mode == "cross3d":
        if grid.d != 3:
            raise GridMismatchError("cross3d form requires d = 3")
        curl_u = spectral_differentiate(u, "curl")
        inner = _masked_fft(grid, _cross(xi.values, curl_u.values), 1)
        curl_inner = spectral_differentiate(inner, "curl")
        first = _masked_fft(grid, _cross(xi.values, curl_inner.values), 1)
        xi_dot_u = _masked_fft(grid, np.einsum("i...,i...->...", xi.values, u.values), 0)
        xi_dot_grad = _masked_fft(
            grid,
            np.einsum("i...,i...->...", xi.values, scalar_gradient(xi_dot_u)), 0)
        second = spectral_differentiate(xi_dot_grad, "gradient")
        return SpectralField.from_coeffs(grid, first.coeffs + second.coeffs)
    raise ValueError(f"unknown mode {mode!r}")


def scalar_gradient(q: SpectralField) -> np.ndarray:
    """Physical gradient components of a scalar field."""
    return spectral_differentiate(q, "gradient").values


def adjoint_pairing_residual(xi: SpectralField, v: SpectralField, w: SpectralField,
                             div_tol: float = 1e-8) -> float:
    """Residual of the duality (lie_transpose(xi, v), w) = -(v, [xi, w]).

    Integration by parts with div(xi) = 0 shows the two pairings cancel;
    the check is stated for solenoidal xi and w and normalized by |v| |w|.
    """
    for name, f in (("xi", xi), ("w", w)):
        if divergence_rel(f) > div_tol:
            raise PreconditionError(f"{name} must be divergence-free for the adjoint pairing")
    lhs = l2_inner(lie_transpose(xi, v), w)
    rhs = l2_inner(v, lie_bracket(xi, w))
    denom = max(l2_norm(v) * l2_norm(w), 1e-300)
    return abs(lhs + rhs) / denom


# ---------------------------------------------------------------------------
# Identity verification suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorReport:
    """Outcome of one operator-identity check on seeded random fields."""

    identity_name: str
    residual_l2: float
    grid: str
    field_seed: int

    def as_row(self) -> list:
        return [self.identity_name, self.grid, self.field_seed, self.residual_l2]


def _rel(num: float, den: float) -> float:
    return num / max(den, 1e-300)


def _curl_rel(f: SpectralField, ref: float | None = None) -> float:
    c = spectral_differentiate(f, "curl")
    return _rel(l2_norm(c), l2_norm(f) if ref is None else ref)


def identity_suite(grid: TorusGrid, seed: int = 0) -> list[OperatorReport]:
    """Run every operator identity on seeded random band-limited fields."""
    kmax = max(2, min(6, grid.n // 6))
    xi = random_vector_field(grid, seed + 1, kmax=kmax, solenoidal=True)
    v = random_vector_field(grid, seed + 2, kmax=kmax, solenoidal=True)
    w = random_vector_field(grid, seed + 3, kmax=kmax, solenoidal=True)
    raw = random_vector_field(grid, seed + 4, kmax=kmax, solenoidal=False)
    q = random_scalar_field(grid, seed + 5, kmax=kmax)

    reports = []

    def add(name, value):
        reports.append(OperatorReport(name, float(value), grid.describe(), seed))

    pr = leray_project(raw)
    add("leray_idempotent", _rel(l2_norm(leray_project(pr) - pr), l2_norm(raw)))
    add("leray_solenoidal", _rel(l2_norm(spectral_differentiate(pr, "divergence")), l2_norm(raw)))
    add("leray_self_adjoint", _rel(abs(l2_inner(pr, w) - l2_inner(raw, w)), l2_norm(raw) * l2_norm(w)))
    add("leray_complement_gradient", _curl_rel(raw - pr))
    gq = spectral_differentiate(q, "gradient")
    add("leray_annihilates_gradients", _rel(l2_norm(leray_project(gq)), l2_norm(gq)))

    add("adjoint_pairing", adjoint_pairing_residual(xi, v, w))
    add("adjoint_pairing_symmetric", adjoint_pairing_residual(xi, xi, xi))

    add("bracket_antisymmetry",
        _rel(l2_norm(lie_bracket(xi, w) + lie_bracket(w, xi)), l2_norm(lie_bracket(xi, w))))

    lt_grad = lie_transpose(raw, gq)
    add("lie_transpose_gradient_is_gradient", _curl_rel(lt_grad))

    lhs = leray_project(lie_transpose(xi, leray_project(raw)))
    rhs = leray_project(lie_transpose(xi, raw))
    add("lie_transpose_projection_identity", _rel(l2_norm(lhs - rhs), l2_norm(rhs)))

    comp = double_lie_transpose(xi, v, "composed")
    expd = double_lie_transpose(xi, v, "expanded")
    add("double_lie_expansion", _rel(l2_norm(comp - expd), l2_norm(comp)))

    if grid.d == 3:
        cross = double_lie_transpose(xi, v, "cross3d")
        add("double_lie_cross3d_gradient_diff", _curl_rel(comp - cross, ref=l2_norm(comp)))
        shifted = SpectralField.from_coeffs(
            grid, lie_transpose(xi, v).coeffs
            + np.fft.fftn(_cross(xi.values, spectral_differentiate(v, "curl").values),
                          axes=(1, 2, 3)) * grid.dealias_mask)
        add("lie_transpose_cross_form", _curl_rel(shifted))

    from .grid import l2_inner_spectral
    ip_g = l2_inner(v, w)
    ip_s = l2_inner_spectral(v, w)
    add("parseval", _rel(abs(ip_g - ip_s), l2_norm(v) * l2_norm(w)))

    return reports
