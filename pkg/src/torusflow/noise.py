"""Divergence-free noise correlates and reproducible Brownian increments.

A ``NoiseBasis`` carries two ordered families of solenoidal vector fields:
the ``xi`` members multiply the physically meaningful W-channels that enter
both the field equations and the particle flow, while the ``eta`` members
multiply the auxiliary B-channels that appear only along Lagrangian
trajectories (and, through the dissipation operator, in the viscous drift).

``BrownianDriver`` produces the increment streams.  Every channel owns a
counter-based bit generator keyed by (seed, stream, channel), so increments
are a pure function of their indices and independent of evaluation order;
ensemble members derive their B-streams from (b_seed, member) alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, ValidationError
from .grid import (
    SpectralField,
    TorusGrid,
    divergence_rel,
    field_from_function,
    gradient_tensor,
    l2_norm,
)
from .lie import _masked_fft, advect_values


@dataclass(frozen=True)
class NoiseBasis:
    """Ordered solenoidal families {xi_k} (W channels) and {eta_k} (B channels).

    Gradients are precomputed once; ``induced_drift`` is the particle-level
    drift (1/2) sum_k (xi_k . grad) xi_k that converts Stratonovich transport
    noise to Ito form.
    """

    grid: TorusGrid
    xi: tuple
    eta: tuple = ()
    div_tol: float = 1e-8
    xi_gradients: tuple = field(init=False)
    eta_gradients: tuple = field(init=False)
    induced_drift: SpectralField = field(init=False)

    def __post_init__(self):
        for name, fam in (("xi", self.xi), ("eta", self.eta)):
            for i, f in enumerate(fam):
                if f.rank != 1 or f.grid != self.grid:
                    raise ValidationError(f"{name}[{i}] must be a vector field on the basis grid")
                r = divergence_rel(f)
                if r > self.div_tol:
                    raise ValidationError(
                        f"{name}[{i}] is not divergence-free: rel. divergence {r:.3e}")
        object.__setattr__(self, "xi_gradients", tuple(gradient_tensor(f) for f in self.xi))
        object.__setattr__(self, "eta_gradients", tuple(gradient_tensor(f) for f in self.eta))
        object.__setattr__(self, "induced_drift", self._compute_induced_drift())

    def _compute_induced_drift(self) -> SpectralField:
        total = np.zeros((self.grid.d,) + self.grid.shape)
        for f, g in zip(self.xi, self.xi_gradients):
            total += advect_values(f.values, g)
        return _masked_fft(self.grid, 0.5 * total, 1)

    @property
    def k_w(self) -> int:
        return len(self.xi)

    @property
    def k_b(self) -> int:
        return len(self.eta)

    def eta_drift_correction(self, nu: float) -> SpectralField:
        """Particle drift nu * sum_k (eta_k . grad) eta_k from the B channels."""
        total = np.zeros((self.grid.d,) + self.grid.shape)
        for f, g in zip(self.eta, self.eta_gradients):
            total += advect_values(f.values, g)
        return _masked_fft(self.grid, nu * total, 1)

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for fam in (self.xi, self.eta):
            for f in fam:
                h.update(np.ascontiguousarray(f.values).tobytes())
        return h.hexdigest()[:16]


def euclidean_basis(grid: TorusGrid, amplitude: float = 1.0) -> tuple:
    """Constant unit-direction members a*e_1 .. a*e_d."""
    members = []
    for a in range(grid.d):
        vals = np.zeros((grid.d,) + grid.shape)
        vals[a] = amplitude
        members.append(SpectralField.from_values(grid, vals))
    return tuple(members)


def trig_members(grid: TorusGrid, amplitude: float = 0.1) -> tuple:
    """Default low-wavenumber solenoidal pair with nonzero gradients.

    2d: {a (0, sin x), a (sin y, 0)}; 3d: {a (0, sin x, 0), a (0, 0, sin y)}.
    """
    if grid.d == 2:
        return (
            field_from_function(grid, lambda x, y: (0 * x, amplitude * np.sin(x)), rank=1),
            field_from_function(grid, lambda x, y: (amplitude * np.sin(y), 0 * x), rank=1),
        )
    return (
        field_from_function(grid, lambda x, y, z: (0 * x, amplitude * np.sin(x), 0 * x), rank=1),
        field_from_function(grid, lambda x, y, z: (0 * x, 0 * x, amplitude * np.sin(y)), rank=1),
    )


def build_basis(grid: TorusGrid, kind: str = "trig-solenoidal", amplitude: float = 0.1,
                members: tuple | None = None, eta_kind: str = "none",
                eta_amplitude: float = 1.0, eta_members: tuple | None = None,
                div_tol: float = 1e-8) -> NoiseBasis:
    """Assemble a NoiseBasis from a named family or explicit member fields.

    kind / eta_kind: 'constant-euclidean', 'trig-solenoidal', 'explicit'
    (member fields supplied), or 'none' (empty family; K = 0 recovers the
    deterministic model).
    """

    def family(which, amp, explicit):
        if which == "none":
            return ()
        if which == "constant-euclidean":
            return euclidean_basis(grid, amp)
        if which == "trig-solenoidal":
            return trig_members(grid, amp)
        if which == "explicit":
            if explicit is None:
                raise ValidationError("explicit basis requires member fields")
            return tuple(explicit)
        raise ValidationError(f"unknown basis kind {which!r}")

    return NoiseBasis(grid, family(kind, amplitude, members),
                      family(eta_kind, eta_amplitude, eta_members), div_tol=div_tol)


class BrownianDriver:
    """Seeded Gaussian increment streams on a fixed uniform time mesh.

    W channels are keyed by (w_seed, stream 'W', channel); B channels by
    (b_seed, member, channel), so an ensemble member's B-path is a pure
    function of (b_seed, member).  Increments have variance dt.
    """

    def __init__(self, dt: float, n_steps: int, k_w: int, k_b: int = 0,
                 w_seed: int = 0, b_seed: int = 1, member: int = 0):
        if dt <= 0 or n_steps < 0:
            raise ValidationError("dt must be positive and n_steps nonnegative")
        self.dt = float(dt)
        self.n_steps = int(n_steps)
        self.k_w = int(k_w)
        self.k_b = int(k_b)
        self.w_seed = int(w_seed)
        self.b_seed = int(b_seed)
        self.member = int(member)
        sqdt = np.sqrt(dt)
        self.dW = np.empty((self.n_steps, self.k_w))
        for c in range(self.k_w):
            self.dW[:, c] = sqdt * self._channel_normals(("W", self.w_seed, 0, c))
        self.dB = np.empty((self.n_steps, self.k_b))
        for c in range(self.k_b):
            self.dB[:, c] = sqdt * self._channel_normals(("B", self.b_seed, self.member, c))

    def _channel_normals(self, key) -> np.ndarray:
        tag = 0 if key[0] == "W" else 1
        ss = np.random.SeedSequence(entropy=(key[1], tag), spawn_key=(key[2], key[3]))
        gen = np.random.Generator(np.random.Philox(ss))
        return gen.standard_normal(self.n_steps)

    def sample_increments(self, step: int):
        """Increments (dW, dB) for one step; deterministic in (seeds, step)."""
        if not 0 <= step < self.n_steps:
            raise PreconditionError(f"step {step} out of range [0, {self.n_steps})")
        return self.dW[step], self.dB[step]

    def paths_w(self) -> np.ndarray:
        """Cumulative W paths, shape (n_steps + 1, k_w), W_0 = 0."""
        out = np.zeros((self.n_steps + 1, self.k_w))
        np.cumsum(self.dW, axis=0, out=out[1:])
        return out

    def coarsen(self, factor: int) -> "BrownianDriver":
        """Same Brownian path on a mesh coarsened by an integer factor."""
        if self.n_steps % factor:
            raise ValidationError("n_steps must be divisible by the coarsening factor")
        child = object.__new__(BrownianDriver)
        child.dt = self.dt * factor
        child.n_steps = self.n_steps // factor
        child.k_w, child.k_b = self.k_w, self.k_b
        child.w_seed, child.b_seed, child.member = self.w_seed, self.b_seed, self.member
        child.dW = self.dW.reshape(child.n_steps, factor, self.k_w).sum(axis=1)
        child.dB = self.dB.reshape(child.n_steps, factor, self.k_b).sum(axis=1)
        return child

    def for_member(self, member: int) -> "BrownianDriver":
        """Driver sharing this one's W streams with member-keyed B streams."""
        return BrownianDriver(self.dt, self.n_steps, self.k_w, self.k_b,
                              w_seed=self.w_seed, b_seed=self.b_seed, member=member)

    def digest(self) -> str:
        return (f"w{self.w_seed}-b{self.b_seed}-m{self.member}"
                f"-dt{self.dt!r}-n{self.n_steps}-kw{self.k_w}-kb{self.k_b}")
