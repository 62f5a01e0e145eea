"""Pure algebra of the cross-diffusion population model.

Coefficients, Boltzmann entropy density, entropy (chemical-potential)
variables, the Onsager mobility matrix, and the dissipation lower bound
used by the runtime entropy-production checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AsymmetricSupport,
    CycleInconsistent,
    DetailedBalanceViolated,
    NonPositiveDensity,
)

WITH_SELF_DIFFUSION = "with_self_diffusion"
WITHOUT_SELF_DIFFUSION = "without_self_diffusion"

# Relative tolerance on pi_i a_ij = pi_j a_ji for accepted parameter sets.
BALANCE_RTOL = 1e-12
# Looser tolerance for cycle residuals when constructing pi (float products
# over cycles).
CYCLE_RTOL = 1e-10


def detailed_balance_residual(a, pi):
    """Max relative reversibility defect of (a, pi) over all species pairs."""
    a = np.asarray(a, dtype=float)
    pi = np.asarray(pi, dtype=float)
    lhs = pi[:, None] * a
    return float(np.max(np.abs(lhs - lhs.T) / np.maximum(1.0, np.abs(lhs))))


def classify_mode(a0, a):
    """Derive the self-diffusion mode, or raise if the coefficients fit neither."""
    a0 = np.asarray(a0, dtype=float)
    diag = np.diag(np.asarray(a, dtype=float))
    if np.all(diag > 0):
        return WITH_SELF_DIFFUSION
    if np.all(diag == 0) and np.all(a0 > 0):
        return WITHOUT_SELF_DIFFUSION
    raise ValueError(
        "coefficients are neither 'with self-diffusion' (all a_ii > 0) nor "
        "'without self-diffusion' (all a_ii = 0 and a_i0 > 0)"
    )


@dataclass(frozen=True)
class SKTParameters:
    """Species count, diffusion coefficients, and the reversible measure pi.

    ``a0[i]`` is the plain diffusion coefficient of species i, ``a[i, j]``
    the self/cross coefficient, and ``pi`` a positive vector satisfying the
    detailed-balance condition pi_i a_ij = pi_j a_ji (validated on
    construction).
    """

    a0: np.ndarray
    a: np.ndarray
    pi: np.ndarray
    mode: str = field(default="")

    def __post_init__(self):
        a0 = np.ascontiguousarray(np.asarray(self.a0, dtype=float))
        a = np.ascontiguousarray(np.asarray(self.a, dtype=float))
        pi = np.ascontiguousarray(np.asarray(self.pi, dtype=float))
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "pi", pi)
        n = a0.shape[0]
        if n < 1 or a.shape != (n, n) or pi.shape != (n,):
            raise ValueError("inconsistent coefficient shapes")
        if np.any(a0 < 0) or np.any(a < 0):
            raise ValueError("diffusion coefficients must be nonnegative")
        if np.any(pi <= 0):
            raise ValueError("reversible measure must be strictly positive")
        res = detailed_balance_residual(a, pi)
        if res > BALANCE_RTOL:
            raise DetailedBalanceViolated(
                f"pi is not reversible for a: relative residual {res:.3e} > {BALANCE_RTOL}"
            )
        mode = self.mode or classify_mode(a0, a)
        diag = np.diag(a)
        if mode == WITH_SELF_DIFFUSION and not np.all(diag > 0):
            raise ValueError("mode with_self_diffusion requires a_ii > 0 for all i")
        if mode == WITHOUT_SELF_DIFFUSION and not (np.all(diag == 0) and np.all(a0 > 0)):
            raise ValueError(
                "mode without_self_diffusion requires a_ii = 0 and a_i0 > 0 for all i"
            )
        if mode not in (WITH_SELF_DIFFUSION, WITHOUT_SELF_DIFFUSION):
            raise ValueError(f"unknown mode {mode!r}")
        object.__setattr__(self, "mode", mode)

    @property
    def n(self) -> int:
        return self.a0.shape[0]


def find_reversible_measure(a) -> np.ndarray:
    """Construct the reversible measure pi for a nonnegative coefficient matrix.

    Ratios are propagated along a spanning tree of the support graph
    (pi_j = pi_i a_ij / a_ji), anchored at pi = 1 on the smallest index of
    each connected component; afterwards every edge is checked, which is the
    Kolmogorov cycle criterion in disguise.

    Raises AsymmetricSupport if a_ij > 0 while a_ji = 0, and
    CycleInconsistent if some cycle product mismatch exceeds 1e-10 relative.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or np.any(a < 0):
        raise ValueError("expected a square nonnegative matrix")
    support = a > 0
    bad = support & ~support.T
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise AsymmetricSupport(f"a[{i},{j}] > 0 but a[{j},{i}] = 0")

    pi = np.zeros(n)
    visited = np.zeros(n, dtype=bool)
    for root in range(n):
        if visited[root]:
            continue
        pi[root] = 1.0
        visited[root] = True
        queue = [root]
        while queue:
            i = queue.pop(0)
            for j in np.nonzero(support[i])[0]:
                if i == j or visited[j]:
                    continue
                pi[j] = pi[i] * a[i, j] / a[j, i]
                visited[j] = True
                queue.append(int(j))

    # Edge re-check detects inconsistent cycles.
    lhs = pi[:, None] * a
    scale = np.maximum(lhs, lhs.T)
    with np.errstate(invalid="ignore"):
        rel = np.where(scale > 0, np.abs(lhs - lhs.T) / scale, 0.0)
    worst = float(np.max(rel)) if n > 1 else 0.0
    if worst > CYCLE_RTOL:
        i, j = np.unravel_index(np.argmax(rel), rel.shape)
        raise CycleInconsistent(
            f"cycle product mismatch at edge ({i},{j}): relative defect {worst:.3e}"
        )
    return pi


def diffusion_matrix(params: SKTParameters, u) -> np.ndarray:
    """A_ij(u) = delta_ij (a_i0 + sum_k a_ik u_k) + a_ij u_i at a point u > 0."""
    u = np.asarray(u, dtype=float)
    diag = params.a0 + params.a @ u
    return np.diag(diag) + params.a * u[:, None]


def entropy_density(params: SKTParameters, u) -> float:
    """Boltzmann entropy h(u) = sum_i pi_i (u_i(log u_i - 1) + 1), with 0 log 0 = 0."""
    return float(np.sum(entropy_density_field(params, np.asarray(u, dtype=float))))


def entropy_density_field(params: SKTParameters, u: np.ndarray) -> np.ndarray:
    """Cellwise entropy density summed over species; u has shape (n, ...)."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise NonPositiveDensity("entropy density requires u >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        ulogu = np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)
    pi = params.pi.reshape((params.n,) + (1,) * (u.ndim - 1))
    return np.sum(pi * (ulogu - u + 1.0), axis=0)


def entropy_variable(params: SKTParameters, u) -> np.ndarray:
    """w_i = pi_i log u_i; rejects nonpositive densities instead of clamping."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or not np.all(np.isfinite(u)):
        raise NonPositiveDensity("entropy variable requires strictly positive u")
    pi = params.pi.reshape((params.n,) + (1,) * (u.ndim - 1))
    return pi * np.log(u)


def inverse_entropy_variable(params: SKTParameters, w) -> np.ndarray:
    """u_i = exp(w_i / pi_i); always strictly positive."""
    w = np.asarray(w, dtype=float)
    pi = params.pi.reshape((params.n,) + (1,) * (w.ndim - 1))
    return np.exp(w / pi)


def mobility_matrix(params: SKTParameters, w) -> np.ndarray:
    """Onsager mobility B(w) = A(u(w)) h''(u(w))^{-1}, i.e. B_ij = A_ij u_j / pi_j."""
    u = inverse_entropy_variable(params, np.asarray(w, dtype=float))
    return diffusion_matrix(params, u) * (u / params.pi)[None, :]


def mobility_at(params: SKTParameters, u: np.ndarray) -> np.ndarray:
    """Vectorized mobility at density points; u has shape (n, F), result (n, n, F)."""
    u = np.asarray(u, dtype=float)
    n = params.n
    diag = params.a0[:, None] + params.a @ u          # (n, F)
    A = params.a[:, :, None] * u[:, None, :]          # a_ij u_i
    A[np.arange(n), np.arange(n), :] += diag
    return A * (u / params.pi[:, None])[None, :, :]   # times u_j / pi_j


def dissipation_lower_bound(params: SKTParameters, u, z) -> float:
    """Lower bound on the entropy-production quadratic form z . h''(u) A(u) z.

    Under exact detailed balance the bound is attained; with pi accepted at
    the 1e-12 residual it can undershoot the form by at most a comparable
    relative amount.
    """
    u = np.asarray(u, dtype=float).reshape(params.n, 1)
    z = np.asarray(z, dtype=float).reshape(params.n, 1)
    return float(dissipation_lower_bound_at(params, u, z)[0])


def dissipation_lower_bound_at(params: SKTParameters, u: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Vectorized dissipation bound at points; u, z have shape (n, F)."""
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    pi = params.pi
    a = params.a
    diag_terms = np.sum(
        pi[:, None] * (params.a0[:, None] * z**2 / u + 2.0 * np.diag(a)[:, None] * z**2),
        axis=0,
    )
    # Pairwise term: 1/2 sum_{i != j} pi_i a_ij (sqrt(u_j/u_i) z_i + sqrt(u_i/u_j) z_j)^2
    sqrt_u = np.sqrt(u)
    ratio = sqrt_u[None, :, :] / sqrt_u[:, None, :]          # sqrt(u_j/u_i), axes (i, j, F)
    cross = ratio * z[:, None, :] + (1.0 / ratio) * z[None, :, :]
    weights = (pi[:, None] * a).copy()
    np.fill_diagonal(weights, 0.0)
    pair_terms = 0.5 * np.einsum("ij,ijf->f", weights, cross**2)
    return diag_terms + pair_terms
