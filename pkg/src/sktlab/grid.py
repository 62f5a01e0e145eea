"""Uniform cell-centered grids with no-flux boundaries and the spatial operators.

Two discretizations of the diffusion term live here: the flux-form
divergence of the mobility acting on the entropy variable, and the
double-Laplacian ("very weak") form acting directly on densities.
Both annihilate constants and conserve discrete mass by flux telescoping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDensity
from .model import SKTParameters, dissipation_lower_bound_at, mobility_at

DENSITY = "density"
ENTROPY = "entropy"
DUAL = "dual"


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on an interval or rectangle.

    2D fields are stored row-major with x fastest, i.e. arrays of shape
    (ny, nx); 1D fields have shape (nx,).
    """

    dim: int
    nx: int
    lx: float
    ny: int | None = None
    ly: float | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if self.nx < 2 or self.lx <= 0:
            raise ValueError("need nx >= 2 and lx > 0")
        if self.dim == 2 and (self.ny is None or self.ny < 2 or (self.ly or 0) <= 0):
            raise ValueError("2D grid needs ny >= 2 and ly > 0")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny if self.dim == 2 else None

    @property
    def shape(self) -> tuple:
        return (self.nx,) if self.dim == 1 else (self.ny, self.nx)

    @property
    def ncells(self) -> int:
        return self.nx if self.dim == 1 else self.nx * self.ny

    @property
    def cell_volume(self) -> float:
        return self.hx if self.dim == 1 else self.hx * self.hy

    @property
    def volume(self) -> float:
        return self.lx if self.dim == 1 else self.lx * self.ly

    def centers(self, axis: str = "x") -> np.ndarray:
        if axis == "x":
            return (np.arange(self.nx) + 0.5) * self.hx
        if axis == "y" and self.dim == 2:
            return (np.arange(self.ny) + 0.5) * self.hy
        raise ValueError(f"no axis {axis!r} on a {self.dim}D grid")

    def integrate(self, f: np.ndarray) -> float:
        """Discrete integral: cell sum times cell volume (over all leading axes)."""
        return float(np.sum(f) * self.cell_volume)


@dataclass
class GridField:
    """n-species field on a grid; values have shape (n,) + grid.shape."""

    grid: Grid
    values: np.ndarray
    kind: str = DENSITY

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.values.shape[1:]
        if expected != self.grid.shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        if self.kind == DENSITY and np.any(self.values <= 0):
            raise NonPositiveDensity("density fields must be strictly positive cellwise")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy(), self.kind)


def _check_scalar(grid: Grid, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    return f


def neumann_laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Discrete Laplacian with mirrored ghost cells (no-flux boundary faces)."""
    f = _check_scalar(grid, f)
    out = np.zeros_like(f)
    # x-direction (last axis)
    flux = np.diff(f, axis=-1) / grid.hx**2
    out[..., :-1] += flux
    out[..., 1:] -= flux
    if grid.dim == 2:
        flux = np.diff(f, axis=0) / grid.hy**2
        out[:-1, :] += flux
        out[1:, :] -= flux
    return out


def _face_axes(grid: Grid):
    """(axis, spacing) pairs for interior faces.

    Axes are negative so the same slicing works for scalar fields and for
    species-stacked arrays with a leading species axis.
    """
    if grid.dim == 1:
        return [(-1, grid.hx)]
    return [(-1, grid.hx), (-2, grid.hy)]


def _slices(ndim, axis, side):
    s = [slice(None)] * ndim
    s[axis] = slice(None, -1) if side == "left" else slice(1, None)
    return tuple(s)


def divergence_mobility(params: SKTParameters, grid: Grid, w: np.ndarray) -> np.ndarray:
    """Flux-form div(B(w) grad w) with face mobility at arithmetically averaged w.

    Face values of w are averaged (so face densities are geometric means),
    keeping every face quadratic form expressible through the dissipation
    bound at a positive density point. Boundary faces carry zero flux, so
    the discrete total mass of the output vanishes per species.
    """
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("entropy variable must be finite")
    out = np.zeros_like(w)
    ndim = w.ndim
    for axis, h in _face_axes(grid):
        left = _slices(ndim, axis, "left")
        right = _slices(ndim, axis, "right")
        w_face = 0.5 * (w[left] + w[right])
        n = params.n
        u_face = np.exp(w_face.reshape(n, -1) / params.pi[:, None])
        B = mobility_at(params, u_face)                      # (n, n, F)
        g = ((w[right] - w[left]) / h).reshape(n, -1)        # (n, F)
        flux = np.einsum("ijf,jf->if", B, g) / h
        out[left] += flux.reshape(w[left].shape)
        out[right] -= flux.reshape(w[right].shape)
    return out


def face_dissipation(params: SKTParameters, grid: Grid, w: np.ndarray,
                     w_coeff: np.ndarray | None = None):
    """Entropy production sum over faces and the facewise lower-bound margins.

    Evaluates grad w : B(w_face) grad w per face (mobility frozen at
    ``w_coeff`` faces when given, else at ``w`` faces) and the dissipation
    lower bound at the same face density. Returns (total, margins) where
    margins = form - bound per face, concatenated over axes.
    """
    w = np.asarray(w, dtype=float)
    frozen = w if w_coeff is None else np.asarray(w_coeff, dtype=float)
    total = 0.0
    margins = []
    bounds = []
    n = params.n
    face_measure = grid.cell_volume
    for axis, h in _face_axes(grid):
        left = _slices(w.ndim, axis, "left")
        right = _slices(w.ndim, axis, "right")
        w_face = (0.5 * (frozen[left] + frozen[right])).reshape(n, -1)
        u_face = np.exp(w_face / params.pi[:, None])
        B = mobility_at(params, u_face)
        g = ((w[right] - w[left]) / h).reshape(n, -1)
        form = np.einsum("if,ijf,jf->f", g, B, g)
        z = (u_face / params.pi[:, None]) * g
        bound = dissipation_lower_bound_at(params, u_face, z)
        total += float(np.sum(form) * face_measure)
        margins.append(form - bound)
        bounds.append(bound)
    return total, np.concatenate(margins), np.concatenate(bounds)


def laplacian_form_rhs(params: SKTParameters, grid: Grid, u: np.ndarray) -> np.ndarray:
    """Very-weak form right-hand side: Laplacian of u_i (a_i0 + sum_j a_ij u_j)."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise NonPositiveDensity("laplacian form requires nonnegative densities")
    coeff = params.a0.reshape((params.n,) + (1,) * (u.ndim - 1)) + np.tensordot(params.a, u, axes=1)
    p = u * coeff
    return np.stack([neumann_laplacian(grid, p[i]) for i in range(params.n)])
