import numpy as np
import pytest

from sktlab.grid import Grid
from sktlab.model import SKTParameters
from sktlab.noise import build_noise_model
from sktlab.regularization import EntropyRegularizer
from sktlab.simulator import InitialCondition, SimConfig
from sktlab.spectral import build_eigenbasis


def heat_params():
    return SKTParameters(a0=[1.0], a=[[0.0]], pi=[1.0])


def two_species_params():
    # detailed balance: 1 * 0.2 = 2 * 0.1
    return SKTParameters(a0=[0.1, 0.1], a=[[0.3, 0.2], [0.1, 0.3]], pi=[1.0, 2.0])


def no_self_diffusion_params():
    return SKTParameters(a0=[0.5, 0.5], a=[[0.0, 0.2], [0.1, 0.0]], pi=[1.0, 2.0])


def make_config(params=None, nx=32, lx=1.0, t_final=0.01, dt=1e-3, eps=1e-4,
                scheme="entropy_variable", family="zero", c=None, delta=None,
                save_every=1, newton_tol=1e-10, dim=1, ny=None, ly=None,
                k_modes=None, **noise_kw):
    params = params or heat_params()
    if dim == 1:
        grid = Grid(dim=1, nx=nx, lx=lx)
    else:
        grid = Grid(dim=2, nx=nx, lx=lx, ny=ny or nx, ly=ly or lx)
    basis = build_eigenbasis(grid)
    reg = EntropyRegularizer(params=params, basis=basis, epsilon=eps, newton_tol=newton_tol)
    noise = build_noise_model(family, basis, k_modes=k_modes, **noise_kw)
    n = params.n
    ic = InitialCondition(
        c=np.asarray(c if c is not None else np.ones(n), dtype=float),
        delta=np.asarray(delta if delta is not None else np.full(n, 0.25), dtype=float),
    )
    return SimConfig(params=params, grid=grid, basis=basis, regularizer=reg, noise=noise,
                     t_final=t_final, dt=dt, scheme=scheme, save_every=save_every, initial=ic)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def smooth_fields(basis, n, count, rng, scale=1.0):
    """Random smooth fields: spectrally decaying coefficients, sup bounded by ~scale."""
    out = []
    for _ in range(count):
        coef = rng.standard_normal((n,) + basis.eigenvalues_grid.shape)
        coef = coef / (1.0 + basis.eigenvalues_grid) ** 2
        w = basis.from_modes(coef)
        w = scale * w / max(1.0, np.max(np.abs(w)) / 2.0)
        out.append(w)
    return out
