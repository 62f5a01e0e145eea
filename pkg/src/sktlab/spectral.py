"""Discrete Neumann-Laplacian eigenbasis and the spectral Sobolev machinery.

The cell-centered cosine (DCT-II) modes diagonalize the mirrored-ghost
Neumann Laplacian exactly:  lambda_k = (4/h^2) sin^2(pi k / (2N)) per axis,
tensor sums in 2D.  The connection operator is realized as the spectral
multiplier (1 + lambda)^(m/2); in this realization the Sobolev
norm-equivalence constant is exactly 1.  Dual norms weight mode energies
by (1 + lambda)^(-m).
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn

from .grid import Grid


def default_sobolev_index(dim: int) -> int:
    """Smallest integer m with m > dim/2 + 1."""
    return 2 if dim == 1 else 3


def _axis_eigenvalues(n_cells: int, h: float) -> np.ndarray:
    k = np.arange(n_cells)
    return (4.0 / h**2) * np.sin(np.pi * k / (2 * n_cells)) ** 2


def _axis_mode(n_cells: int, length: float, k: int) -> np.ndarray:
    if k == 0:
        return np.full(n_cells, 1.0 / np.sqrt(length))
    # Integer-exact phase k(2c+1) reduced mod 4N before touching floats:
    # large-argument cosine rounding would otherwise break the 1e-10
    # eigenrelation residual at fine grids.
    phase = (k * (2 * np.arange(n_cells, dtype=np.int64) + 1)) % (4 * n_cells)
    return np.sqrt(2.0 / length) * np.cos((np.pi / (2 * n_cells)) * phase)


class SpectralBasis:
    """Orthonormal Neumann eigenmodes of a grid plus the Sobolev multipliers.

    Modes are orthonormal in the cell-volume weighted inner product.  The
    flat mode enumeration used for noise truncation is sorted by ascending
    eigenvalue (ties broken by tensor index).
    """

    def __init__(self, grid: Grid, m: int | None = None):
        self.grid = grid
        self.m = default_sobolev_index(grid.dim) if m is None else int(m)
        if self.m <= grid.dim / 2 + 1:
            raise ValueError(f"need m > d/2 + 1, got m={self.m} for d={grid.dim}")
        lam_x = _axis_eigenvalues(grid.nx, grid.hx)
        if grid.dim == 1:
            self.eigenvalues_grid = lam_x
        else:
            lam_y = _axis_eigenvalues(grid.ny, grid.hy)
            self.eigenvalues_grid = lam_y[:, None] + lam_x[None, :]
        flat = self.eigenvalues_grid.ravel()
        self._order = np.lexsort((np.arange(flat.size), flat))
        self.eigenvalues = flat[self._order]
        self._sqrt_vol = np.sqrt(grid.cell_volume)
        self._dense_cache: dict[float, np.ndarray] = {}

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    def mode_field(self, k: int) -> np.ndarray:
        """Sampled eigenmode for sorted flat index k, unit discrete L2 norm."""
        g = self.grid
        idx = int(self._order[k])
        if g.dim == 1:
            return _axis_mode(g.nx, g.lx, idx)
        ky, kx = np.unravel_index(idx, g.shape)
        return np.outer(_axis_mode(g.ny, g.ly, int(ky)), _axis_mode(g.nx, g.lx, int(kx)))

    def mode_fields(self, count: int) -> np.ndarray:
        """First ``count`` sorted modes stacked as (count,) + grid.shape."""
        return np.stack([self.mode_field(k) for k in range(count)])

    def modes_matrix(self) -> np.ndarray:
        """All sorted modes as a (n_modes, ncells) matrix; cached."""
        if not hasattr(self, "_modes_matrix"):
            self._modes_matrix = self.mode_fields(self.n_modes).reshape(self.n_modes, -1)
        return self._modes_matrix

    # -- transforms -------------------------------------------------------

    def to_modes(self, f: np.ndarray) -> np.ndarray:
        """Coefficients in the orthonormal eigenbasis (tensor layout, not sorted)."""
        f = np.asarray(f, dtype=float)
        axes = tuple(range(f.ndim - self.grid.dim, f.ndim))
        return dctn(f, type=2, norm="ortho", axes=axes) * self._sqrt_vol

    def from_modes(self, coef: np.ndarray) -> np.ndarray:
        coef = np.asarray(coef, dtype=float)
        axes = tuple(range(coef.ndim - self.grid.dim, coef.ndim))
        return idctn(coef / self._sqrt_vol, type=2, norm="ortho", axes=axes)

    def sorted_coefficients(self, f: np.ndarray) -> np.ndarray:
        """Mode coefficients reordered to the ascending-eigenvalue enumeration."""
        coef = self.to_modes(f)
        flat = coef.reshape(coef.shape[: coef.ndim - self.grid.dim] + (-1,))
        return flat[..., self._order]

    # -- multiplier operators ---------------------------------------------

    def _apply_weight(self, f: np.ndarray, power: float) -> np.ndarray:
        coef = self.to_modes(f)
        return self.from_modes(coef * (1.0 + self.eigenvalues_grid) ** power)

    def apply_sobolev_root(self, f: np.ndarray) -> np.ndarray:
        """Multiplier (1 + lambda)^(m/2): the H^m-norm realizing operator."""
        return self._apply_weight(f, self.m / 2.0)

    def apply_sobolev(self, f: np.ndarray) -> np.ndarray:
        """Multiplier (1 + lambda)^m (the operator composed with its adjoint)."""
        return self._apply_weight(f, float(self.m))

    # -- norms --------------------------------------------------------------

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.asarray(f) ** 2) * self.grid.cell_volume))

    def sobolev_norm(self, f: np.ndarray) -> float:
        """Discrete H^m-equivalent norm: sum over species of the weighted mode energy."""
        coef = self.to_modes(f)
        return float(np.sqrt(np.sum((1.0 + self.eigenvalues_grid) ** self.m * coef**2)))

    def dual_norm(self, f: np.ndarray) -> float:
        """Negative-order norm with multipliers (1 + lambda)^(-m); <= l2_norm."""
        coef = self.to_modes(f)
        return float(np.sqrt(np.sum(coef**2 / (1.0 + self.eigenvalues_grid) ** self.m)))

    # -- dense realization (Jacobian assembly) ------------------------------

    def dense_sobolev_matrix(self, power: float | None = None) -> np.ndarray:
        """Dense matrix of the (1 + lambda)^power multiplier on flattened fields.

        Cached per power.  Used for Newton Jacobians at desk scale; the
        matrix is symmetric in the cell-volume weighted inner product.
        """
        p = float(self.m) if power is None else float(power)
        if p not in self._dense_cache:
            g = self.grid
            weights = (1.0 + self.eigenvalues_grid) ** p
            eye = np.eye(g.ncells).reshape((g.ncells,) + g.shape)
            mat = self.from_modes(self.to_modes(eye) * weights).reshape(g.ncells, g.ncells)
            self._dense_cache[p] = np.ascontiguousarray(mat.T)
        return self._dense_cache[p]


def build_eigenbasis(grid: Grid, m: int | None = None) -> SpectralBasis:
    return SpectralBasis(grid, m)
