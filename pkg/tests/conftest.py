import functools

import numpy as np
import pytest

from torusflow.grid import TorusGrid, random_vector_field
from torusflow.integrators import run
from torusflow.models import ModelSpec
from torusflow.noise import BrownianDriver, build_basis


@pytest.fixture(scope="session")
def grid2():
    return TorusGrid(2, 64)


@pytest.fixture(scope="session")
def grid3():
    return TorusGrid(3, 16)


@pytest.fixture(scope="session")
def u0_2d(grid2):
    return random_vector_field(grid2, 7, kmax=3, solenoidal=True)


@pytest.fixture(scope="session")
def trig_basis(grid2):
    return build_basis(grid2, "trig-solenoidal", amplitude=0.1,
                       eta_kind="constant-euclidean")


@functools.lru_cache(maxsize=64)
def _cached_run(family, nu, passive_kind, basis_key, T, dt, w_seed, scheme, n, d,
                amplitude, eta_kind, u0_seed, u0_kmax):
    grid = TorusGrid(d, n)
    basis = build_basis(grid, basis_key, amplitude, eta_kind=eta_kind)
    model = ModelSpec(family, basis, nu=nu, passive_kind=passive_kind)
    u0 = random_vector_field(grid, u0_seed, kmax=u0_kmax, solenoidal=True)
    n_steps = int(round(T / dt))
    driver = BrownianDriver(dt, n_steps, basis.k_w, basis.k_b, w_seed=w_seed)
    return run(model, u0, T, dt, driver, scheme)


def cached_run(family="euler_poincare", nu=0.0, passive_kind="oneform",
               basis_key="trig-solenoidal", T=0.1, dt=1e-3, w_seed=3,
               scheme="strat_heun", n=64, d=2, amplitude=0.1, eta_kind="none",
               u0_seed=7, u0_kmax=3):
    """Session-cached field trajectory for diagnostics tests."""
    return _cached_run(family, nu, passive_kind, basis_key, T, dt, w_seed,
                       scheme, n, d, amplitude, eta_kind, u0_seed, u0_kmax)


def coupled_drivers(dt_fine, n_fine, k_w, k_b=0, w_seed=3, factors=(4, 2, 1)):
    """Drivers sharing one Brownian path on nested meshes (coarse first)."""
    base = BrownianDriver(dt_fine, n_fine, k_w, k_b, w_seed=w_seed)
    return [(dt_fine * f, base.coarsen(f) if f > 1 else base) for f in factors]
