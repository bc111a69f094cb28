"""Periodic-torus spatial discretization.

Grids are uniform tensor-product lattices on [0, 2*pi)^d with d = 2 or 3.
Fields carry paired physical samples and Fourier coefficients (numpy fftn
convention), synchronized lazily.  All derivatives, the Leray projection,
the inverse Laplacian and off-grid evaluation act on the band-limited
trigonometric interpolant, so they are exact for dealiased fields.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, PreconditionError

TWO_PI = 2.0 * np.pi
logger = logging.getLogger("torusflow")


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on the d-torus with period 2*pi per axis.

    Parameters
    ----------
    d : int
        Spatial dimension, 2 or 3.
    n : int
        Grid points per axis; even and >= 8 (powers of two recommended).
    dealias_fraction : float
        Retained fraction of the wavenumber range (2/3 rule by default).
    """

    d: int
    n: int
    dealias_fraction: float = 2.0 / 3.0
    length: float = field(default=TWO_PI, init=False)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"n must be even and >= 8, got {self.n}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        k1 = np.fft.fftfreq(self.n, d=1.0 / self.n)  # integer wavenumbers
        shape = (self.n,) * self.d
        k = np.empty((self.d,) + shape)
        for a in range(self.d):
            sl = [None] * self.d
            sl[a] = slice(None)
            k[a] = k1[tuple(sl)]
        k_sq = np.sum(k * k, axis=0)
        inv_k_sq = np.zeros_like(k_sq)
        nz = k_sq > 0
        inv_k_sq[nz] = 1.0 / k_sq[nz]
        kcut = np.floor(self.dealias_fraction * (self.n // 2))
        mask = np.all(np.abs(k) <= kcut, axis=0)
        x1 = np.arange(self.n) * (TWO_PI / self.n)
        coords = np.meshgrid(*([x1] * self.d), indexing="ij")
        object.__setattr__(self, "_k", k)
        object.__setattr__(self, "_k_sq", k_sq)
        object.__setattr__(self, "_inv_k_sq", inv_k_sq)
        object.__setattr__(self, "_mask", mask)
        object.__setattr__(self, "_coords", np.array(coords))

    # -- cached arrays ---------------------------------------------------
    @property
    def k(self) -> np.ndarray:
        """Integer wavenumbers, shape (d, n, ..., n)."""
        return self._k

    @property
    def k_sq(self) -> np.ndarray:
        return self._k_sq

    @property
    def inv_k_sq(self) -> np.ndarray:
        """1/|k|^2 with the zero mode mapped to 0."""
        return self._inv_k_sq

    @property
    def dealias_mask(self) -> np.ndarray:
        return self._mask

    @property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape (d, n, ..., n)."""
        return self._coords

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @property
    def cell_volume(self) -> float:
        return (TWO_PI / self.n) ** self.d

    @property
    def volume(self) -> float:
        return TWO_PI ** self.d

    def spatial_axes(self, rank: int) -> tuple:
        """FFT axes for an array whose leading axes are component axes."""
        offset = 1 if rank == 1 else 0
        return tuple(range(offset, offset + self.d))

    def describe(self) -> str:
        return f"{self.d}d:{self.n}^{self.d}"


class SpectralField:
    """Scalar or vector field with paired physical/spectral representations.

    Arrays are treated as immutable snapshots: whichever representation the
    field was built from is stored read-only and the other is synthesized on
    first access and cached.  ``rank`` is 0 for scalars and 1 for vectors
    (vector arrays carry a leading component axis of length ``grid.d``).
    """

    __slots__ = ("grid", "rank", "_values", "_coeffs")

    def __init__(self, grid: TorusGrid, *, values=None, coeffs=None, rank=None):
        if (values is None) == (coeffs is None):
            raise ValueError("provide exactly one of values/coeffs")
        self.grid = grid
        arr = values if values is not None else coeffs
        arr = np.asarray(arr)
        if arr.shape == grid.shape:
            inferred = 0
        elif arr.shape == (grid.d,) + grid.shape:
            inferred = 1
        else:
            raise ValueError(f"array shape {arr.shape} does not fit grid {grid.shape}")
        if rank is not None and rank != inferred:
            raise ValueError(f"declared rank {rank} != inferred {inferred}")
        self.rank = inferred
        if values is not None:
            self._values = _freeze(np.asarray(values, dtype=np.float64))
            self._coeffs = None
        else:
            self._coeffs = _freeze(np.asarray(coeffs, dtype=np.complex128))
            self._values = None

    # -- constructors ----------------------------------------------------
    @classmethod
    def from_values(cls, grid: TorusGrid, values) -> "SpectralField":
        return cls(grid, values=values)

    @classmethod
    def from_coeffs(cls, grid: TorusGrid, coeffs) -> "SpectralField":
        return cls(grid, coeffs=coeffs)

    @classmethod
    def zeros(cls, grid: TorusGrid, rank: int = 0) -> "SpectralField":
        shape = grid.shape if rank == 0 else (grid.d,) + grid.shape
        return cls(grid, values=np.zeros(shape))

    # -- representations -------------------------------------------------
    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            axes = self.grid.spatial_axes(self.rank)
            self._values = _freeze(np.real(np.fft.ifftn(self._coeffs, axes=axes)))
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            axes = self.grid.spatial_axes(self.rank)
            self._coeffs = _freeze(np.fft.fftn(self._values, axes=axes))
        return self._coeffs

    @property
    def is_vector(self) -> bool:
        return self.rank == 1

    def component(self, i: int) -> "SpectralField":
        if self.rank != 1:
            raise GridMismatchError("component() requires a vector field")
        if self._coeffs is not None:
            return SpectralField.from_coeffs(self.grid, self._coeffs[i])
        return SpectralField.from_values(self.grid, self._values[i])

    def dealiased(self) -> "SpectralField":
        return SpectralField.from_coeffs(self.grid, self.coeffs * self.grid.dealias_mask)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField.from_coeffs(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self, other)
        return SpectralField.from_coeffs(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField.from_coeffs(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _check_same_grid(a: SpectralField, b: SpectralField):
    if a.grid is not b.grid and a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    if a.rank != b.rank:
        raise GridMismatchError("fields have different ranks")


# ---------------------------------------------------------------------------
# Spectral calculus
# ---------------------------------------------------------------------------

def _partial_coeffs(grid: TorusGrid, coeffs: np.ndarray, axis: int) -> np.ndarray:
    """d/dx_axis in coefficient space (acts on trailing spatial axes)."""
    return 1j * grid.k[axis] * coeffs


def spectral_differentiate(f: SpectralField, kind: str) -> SpectralField:
    """Exact derivative of the band-limited interpolant.

    kind: 'gradient' (scalar -> vector), 'divergence' (vector -> scalar),
    'curl' (2d vector -> scalar, 3d vector -> vector),
    'laplacian' (rank preserved).
    """
    grid = f.grid
    c = f.coeffs
    if kind == "gradient":
        if f.rank != 0:
            raise GridMismatchError("gradient expects a scalar field")
        out = np.stack([_partial_coeffs(grid, c, a) for a in range(grid.d)])
        return SpectralField.from_coeffs(grid, out)
    if kind == "divergence":
        if f.rank != 1:
            raise GridMismatchError("divergence expects a vector field")
        out = sum(_partial_coeffs(grid, c[a], a) for a in range(grid.d))
        return SpectralField.from_coeffs(grid, out)
    if kind == "curl":
        if f.rank != 1:
            raise GridMismatchError("curl expects a vector field")
        if grid.d == 2:
            out = _partial_coeffs(grid, c[1], 0) - _partial_coeffs(grid, c[0], 1)
            return SpectralField.from_coeffs(grid, out)
        out = np.stack([
            _partial_coeffs(grid, c[2], 1) - _partial_coeffs(grid, c[1], 2),
            _partial_coeffs(grid, c[0], 2) - _partial_coeffs(grid, c[2], 0),
            _partial_coeffs(grid, c[1], 0) - _partial_coeffs(grid, c[0], 1),
        ])
        return SpectralField.from_coeffs(grid, out)
    if kind == "laplacian":
        return SpectralField.from_coeffs(grid, -grid.k_sq * c)
    raise ValueError(f"unknown derivative kind {kind!r}")


def gradient_tensor(v: SpectralField) -> np.ndarray:
    """Physical-space gradient of a vector field: out[i, j] = d_j v_i."""
    grid = v.grid
    c = v.coeffs
    out = np.empty((grid.d, grid.d) + grid.shape)
    for i in range(grid.d):
        for j in range(grid.d):
            out[i, j] = np.real(np.fft.ifftn(_partial_coeffs(grid, c[i], j)))
    return out


def scalar_gradient_values(q: SpectralField) -> np.ndarray:
    """Physical-space gradient of a scalar field, shape (d, n, ..)."""
    grid = q.grid
    c = q.coeffs
    return np.stack([
        np.real(np.fft.ifftn(_partial_coeffs(grid, c, a))) for a in range(grid.d)
    ])


def leray_project(v: SpectralField) -> SpectralField:
    """L2-orthogonal projection onto divergence-free fields.

    Mode by mode removes the component of v-hat parallel to k; the zero
    mode (spatial mean) passes through unchanged.  Idempotent and
    self-adjoint; annihilates gradients.
    """
    if v.rank != 1:
        raise GridMismatchError("leray_project expects a vector field")
    grid = v.grid
    c = v.coeffs
    k = grid.k
    kdotv = np.sum(k * c, axis=0)
    out = c - k * (kdotv * grid.inv_k_sq)
    return SpectralField.from_coeffs(grid, out)


def poisson_solve(rhs: SpectralField) -> SpectralField:
    """Solve -laplace(q) = rhs for the zero-mean q.

    The k = 0 mode of the source is zeroed (a nonzero mean is reported by
    the caller via ``mean_mode_magnitude``); the output mean is zero.
    """
    if rhs.rank != 0:
        raise GridMismatchError("poisson_solve expects a scalar field")
    grid = rhs.grid
    mean = mean_mode_magnitude(rhs)
    if mean > 1e-12 * max(l2_norm(rhs), 1.0):
        logger.warning("poisson_solve: zeroing nonzero source mean %.3e", mean)
    out = rhs.coeffs * grid.inv_k_sq  # zero mode -> 0 via inv_k_sq
    return SpectralField.from_coeffs(grid, out)


def mean_mode_magnitude(f: SpectralField) -> float:
    """|spatial mean| of a scalar field (max over components for vectors)."""
    c = f.coeffs
    zero = (0,) * f.grid.d
    if f.rank == 0:
        return abs(c[zero]) / f.grid.n ** f.grid.d
    return max(abs(c[(i,) + zero]) for i in range(f.grid.d)) / f.grid.n ** f.grid.d


# ---------------------------------------------------------------------------
# Quadrature, norms, divergence checks
# ---------------------------------------------------------------------------

def l2_inner(f: SpectralField, g: SpectralField) -> float:
    """L2 inner product by trapezoidal (here: exact) grid quadrature."""
    _check_same_grid(f, g)
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)


def l2_inner_spectral(f: SpectralField, g: SpectralField) -> float:
    """Same pairing evaluated from Fourier coefficients (Parseval)."""
    _check_same_grid(f, g)
    n_tot = f.grid.n ** f.grid.d
    s = np.sum(f.coeffs * np.conj(g.coeffs))
    return float(np.real(s) * f.grid.volume / n_tot ** 2)


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(max(l2_inner(f, f), 0.0)))


def linf_norm(f: SpectralField) -> float:
    return float(np.max(np.abs(f.values)))


def divergence_rel(v: SpectralField) -> float:
    """Relative L2 magnitude of div(v); 0 for the zero field."""
    nv = l2_norm(v)
    if nv == 0.0:
        return 0.0
    return l2_norm(spectral_differentiate(v, "divergence")) / nv


def require_solenoidal(v: SpectralField, tol: float, what: str = "field"):
    r = divergence_rel(v)
    if r > tol:
        raise PreconditionError(f"{what} is not divergence-free: rel. divergence {r:.3e} > {tol:.1e}")


# ---------------------------------------------------------------------------
# Off-grid (trigonometric) evaluation
# ---------------------------------------------------------------------------

class PointEvaluator:
    """Evaluates band-limited fields at fixed off-grid points.

    Builds per-axis phase tables exp(i k x) once (unit-modulus cumulative
    products, so only one complex exponential per point and axis) and reuses
    them for every field evaluated at the same points.  Exact for fields
    whose Nyquist modes vanish, which holds for all dealiased fields.
    """

    def __init__(self, grid: TorusGrid, points: np.ndarray):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != grid.d:
            raise GridMismatchError(f"points must have {grid.d} columns")
        self.grid = grid
        self.points = points
        n = grid.n
        half = n // 2
        m = points.shape[0]
        self._phase = []
        for a in range(grid.d):
            z = np.exp(1j * points[:, a])
            pos = np.empty((m, half), dtype=np.complex128)
            pos[:, 0] = 1.0
            for p in range(1, half):
                pos[:, p] = pos[:, p - 1] * z
            # fftfreq order: [0 .. n/2-1, -n/2 .. -1]; z^{-p} = conj(z^p)
            neg = np.conj(pos[:, ::-1] * z[:, None])  # powers -n/2 .. -1? see below
            # pos[:, ::-1] * z = z^{half-1} .. z^{0} * z = z^{half} .. z^{1}
            # conj -> z^{-half} .. z^{-1}, matching fftfreq tail order.
            self._phase.append(np.concatenate([pos, neg], axis=1))

    def eval_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        """Evaluate one scalar coefficient array at the stored points."""
        g = self.grid
        scale = 1.0 / g.n ** g.d
        if g.d == 2:
            t = self._phase[1] @ coeffs.T  # (m, n) from sum over k_y? (see axes)
            # coeffs[i, j]: i = k_x, j = k_y.  t[m, i] = sum_j coeffs[i, j] Ey[m, j]
            out = np.einsum("mi,mi->m", self._phase[0], t)
        else:
            t = np.tensordot(self._phase[2], coeffs, axes=([1], [2]))  # (m, kx, ky)
            t2 = np.einsum("mj,mij->mi", self._phase[1], t)
            out = np.einsum("mi,mi->m", self._phase[0], t2)
        return np.real(out) * scale

    def eval_field(self, f: SpectralField) -> np.ndarray:
        """Evaluate a field; (m,) for scalars, (m, d) for vectors."""
        if f.rank == 0:
            return self.eval_coeffs(f.coeffs)
        return np.stack([self.eval_coeffs(f.coeffs[i]) for i in range(f.grid.d)], axis=1)

    def eval_gradient(self, f: SpectralField) -> np.ndarray:
        """Gradient at the points: (m, d) for scalars, (m, d, d) = dX_j f_i."""
        g = f.grid
        if f.rank == 0:
            return np.stack(
                [self.eval_coeffs(_partial_coeffs(g, f.coeffs, a)) for a in range(g.d)],
                axis=1,
            )
        out = np.empty((self.points.shape[0], g.d, g.d))
        for i in range(g.d):
            for j in range(g.d):
                out[:, i, j] = self.eval_coeffs(_partial_coeffs(g, f.coeffs[i], j))
        return out


def evaluate_at_points(f: SpectralField, points: np.ndarray) -> np.ndarray:
    """Spectral evaluation of f at arbitrary positions (wrapped to the torus)."""
    return PointEvaluator(f.grid, points).eval_field(f)


# ---------------------------------------------------------------------------
# Field construction helpers
# ---------------------------------------------------------------------------

def field_from_function(grid: TorusGrid, fn, rank: int = 0) -> SpectralField:
    """Sample fn(x, y[, z]) -> scalar or tuple of components on the grid."""
    xs = [grid.coords[a] for a in range(grid.d)]
    out = fn(*xs)
    if rank == 0:
        return SpectralField.from_values(grid, np.asarray(out))
    return SpectralField.from_values(grid, np.stack([np.asarray(c) for c in out]))


def random_scalar_field(grid: TorusGrid, seed: int, kmax: int = 4, amplitude: float = 1.0) -> SpectralField:
    """Seeded random band-limited scalar with zero mean."""
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(grid.shape)
    c = np.fft.fftn(white)
    keep = np.all(np.abs(grid.k) <= kmax, axis=0)
    c *= keep
    c[(0,) * grid.d] = 0.0
    f = SpectralField.from_coeffs(grid, c)
    scale = amplitude / max(linf_norm(f), 1e-300)
    return SpectralField.from_coeffs(grid, c * scale)


def random_vector_field(grid: TorusGrid, seed: int, kmax: int = 4, amplitude: float = 1.0,
                        solenoidal: bool = False) -> SpectralField:
    """Seeded random band-limited vector field, optionally Leray-projected."""
    comps = [random_scalar_field(grid, seed + 101 * a, kmax, 1.0).coeffs for a in range(grid.d)]
    v = SpectralField.from_coeffs(grid, np.stack(comps))
    if solenoidal:
        v = leray_project(v)
    scale = amplitude / max(linf_norm(v), 1e-300)
    return SpectralField.from_coeffs(grid, v.coeffs * scale)


def taylor_green(grid: TorusGrid, amplitude: float = 1.0) -> SpectralField:
    """Steady 2d Euler state (sin x cos y, -cos x sin y)."""
    if grid.d != 2:
        raise GridMismatchError("taylor_green is a 2d field")
    x, y = grid.coords
    return SpectralField.from_values(
        grid, np.stack([amplitude * np.sin(x) * np.cos(y), -amplitude * np.cos(x) * np.sin(y)])
    )
