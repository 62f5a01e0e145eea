"""Mixed space-time norms, fractional time seminorms, and ensemble moments.

Quadrature is the left rectangle rule on the snapshot grid throughout
(matched to the Euler time grid; no interpolation between snapshots), with
sup-in-time realized as the max over snapshots.  Spatial gradients use
centered differences with mirrored ghost cells, consistent with the
no-flux discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid
from .simulator import ENTROPY_VARIABLE, PathRecord, SimConfig, run_path
from .spectral import SpectralBasis


@dataclass(frozen=True)
class NormSpec:
    """Mixed norm descriptor: time exponent, spatial norm, field transform.

    space is one of l1 | l2 | lq | h1 | w11 | dual; transform one of
    identity | sqrt | pair_sqrt.  time_exponent may be math.inf.
    """

    time_exponent: float = 2.0
    space: str = "l2"
    q: float | None = None
    transform: str = "identity"
    pair: tuple[int, int] | None = None

    def __post_init__(self):
        if self.time_exponent < 1:
            raise ValueError("time exponent must be >= 1")
        if self.space not in ("l1", "l2", "lq", "h1", "w11", "dual"):
            raise ValueError(f"unknown space norm {self.space!r}")
        if self.space == "lq" and (self.q is None or self.q < 1):
            raise ValueError("lq needs q >= 1")
        if self.transform not in ("identity", "sqrt", "pair_sqrt"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.transform == "pair_sqrt":
            if self.pair is None or self.pair[0] == self.pair[1]:
                raise ValueError("pair_sqrt needs two distinct species indices")


def _mirror_gradient(grid: Grid, f: np.ndarray) -> list[np.ndarray]:
    """Centered differences with mirrored ghosts, one array per axis."""
    grads = []
    pads = [(1, 1)] if grid.dim == 1 else [(0, 0), (1, 1)]
    g = np.pad(f, pads, mode="edge")
    grads.append((g[..., 2:] - g[..., :-2]) / (2 * grid.hx))
    if grid.dim == 2:
        g = np.pad(f, [(1, 1), (0, 0)], mode="edge")
        grads.append((g[2:, :] - g[:-2, :]) / (2 * grid.hy))
    return grads


def _transform_fields(spec: NormSpec, u: np.ndarray) -> np.ndarray:
    if spec.transform == "identity":
        return u
    if spec.transform == "sqrt":
        return np.sqrt(np.maximum(u, 0.0))
    i, j = spec.pair
    return np.sqrt(np.maximum(u[i] * u[j], 0.0))[None, ...]


def _space_norm(spec: NormSpec, grid: Grid, fields: np.ndarray,
                basis: SpectralBasis | None) -> float:
    """Vector norm over species: sqrt of the sum of squared per-species norms."""
    vol = grid.cell_volume
    acc = 0.0
    for f in fields:
        if spec.space == "l1":
            val = np.sum(np.abs(f)) * vol
        elif spec.space == "l2":
            val = math.sqrt(np.sum(f**2) * vol)
        elif spec.space == "lq":
            val = (np.sum(np.abs(f) ** spec.q) * vol) ** (1.0 / spec.q)
        elif spec.space == "h1":
            grads = _mirror_gradient(grid, f)
            val = math.sqrt((np.sum(f**2) + sum(np.sum(g**2) for g in grads)) * vol)
        elif spec.space == "w11":
            grads = _mirror_gradient(grid, f)
            val = (np.sum(np.abs(f)) + sum(np.sum(np.abs(g)) for g in grads)) * vol
        else:  # dual
            if basis is None:
                raise ValueError("dual norm needs a spectral basis")
            val = basis.dual_norm(f)
        acc += val**2
    return math.sqrt(acc)


def _select_species(u: np.ndarray, species) -> np.ndarray:
    if species is None:
        return u
    return u[int(species)][None, ...]


def mixed_norm(record: PathRecord, grid: Grid, spec: NormSpec, species=None,
               basis: SpectralBasis | None = None) -> float:
    """Mixed L^{p_t}(0,T; X) norm of the recorded density snapshots."""
    times = record.snapshot_times
    if len(times) < 1:
        raise ValueError("record has no snapshots")
    values = []
    for u in record.snapshot_values():
        fields = _transform_fields(spec, _select_species(np.asarray(u), species))
        values.append(_space_norm(spec, grid, fields, basis))
    values = np.asarray(values)
    if math.isinf(spec.time_exponent):
        return float(np.max(values))
    if len(times) < 2:
        raise ValueError("time integration needs at least two snapshots")
    weights = np.diff(times)
    p = spec.time_exponent
    return float((np.sum(values[:-1] ** p * weights)) ** (1.0 / p))


@dataclass
class SlobodeckijResult:
    seminorm: float
    lp_part: float
    norm: float
    alpha: float
    p: float
    in_compactness_regime: bool


def slobodeckij_seminorm(record: PathRecord, grid: Grid, alpha: float, p: float,
                         space: str = "dual", basis: SpectralBasis | None = None,
                         species=None) -> SlobodeckijResult:
    """Fractional-in-time seminorm of the snapshot path in the chosen space norm.

    Double left-rectangle sum over snapshot pairs with the diagonal omitted
    (pairs closer than the snapshot spacing); also reports the L^p(0,T; X)
    part and the full norm.  Any alpha in (0,1) is accepted; the result
    flags whether (alpha, p) sits in the compactness regime alpha < 1/2,
    p = (2d+4)/d used by the tightness argument.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if p < 1:
        raise ValueError("p must be >= 1")
    if space not in ("dual", "l2"):
        raise ValueError("space must be 'dual' or 'l2'")
    times = np.asarray(record.snapshot_times, dtype=float)
    if times.size < 2:
        raise ValueError("need at least two snapshots")
    snaps = [_select_species(np.asarray(u), species) for u in record.snapshot_values()]

    # Both norms are Euclidean after a linear transform, so pairwise
    # distances come from a Gram matrix instead of an O(S^2) field loop.
    vol = grid.cell_volume
    rows = []
    for u in snaps:
        if space == "l2":
            rows.append(u.reshape(-1) * math.sqrt(vol))
        else:
            if basis is None:
                raise ValueError("dual norm needs a spectral basis")
            coef = basis.to_modes(u) * (1.0 + basis.eigenvalues_grid) ** (-basis.m / 2.0)
            rows.append(coef.reshape(-1))
    X = np.stack(rows)
    gram = X @ X.T
    sq = np.maximum(np.diag(gram)[:, None] + np.diag(gram)[None, :] - 2.0 * gram, 0.0)
    dist = np.sqrt(sq)

    weights = np.concatenate([np.diff(times), [0.0]])
    gaps = np.abs(times[:, None] - times[None, :])
    min_gap = 0.5 * float(np.min(np.diff(times)))
    mask = (gaps > min_gap) & (weights[:, None] > 0) & (weights[None, :] > 0)
    with np.errstate(divide="ignore"):
        kernel = np.where(mask, dist**p / np.where(mask, gaps, 1.0) ** (1.0 + alpha * p), 0.0)
    total = float(np.sum(kernel * weights[:, None] * weights[None, :]))
    seminorm = total ** (1.0 / p)

    norms = np.sqrt(np.maximum(np.diag(gram), 0.0))
    lp_part = float(np.sum(norms**p * weights) ** (1.0 / p))
    d = grid.dim
    regime = alpha < 0.5 and abs(p - (2 * d + 4) / d) < 1e-12
    return SlobodeckijResult(
        seminorm=float(seminorm),
        lp_part=lp_part,
        norm=float((seminorm**p + lp_part**p) ** (1.0 / p)),
        alpha=alpha,
        p=p,
        in_compactness_regime=regime,
    )


@dataclass
class MomentEstimate:
    mean: float
    stderr: float | None
    power: float
    n_paths: int


def ensemble_moment(records, grid: Grid, spec: NormSpec, p: float = 1.0,
                    species=None, basis: SpectralBasis | None = None) -> MomentEstimate:
    """Monte Carlo mean and standard error of the p-th power of a path functional."""
    records = list(records)
    if not records:
        raise ValueError("need at least one path")
    if p < 1:
        raise ValueError("moment power must be >= 1")
    values = np.array(
        [mixed_norm(rec, grid, spec, species=species, basis=basis) ** p for rec in records]
    )
    mean = float(math.fsum(values) / len(values))
    if len(values) > 1:
        var = math.fsum((values - mean) ** 2) / (len(values) - 1)
        stderr = math.sqrt(var / len(values))
    else:
        stderr = None
    return MomentEstimate(mean=mean, stderr=stderr, power=p, n_paths=len(values))


@dataclass
class ConsistencyRow:
    epsilon: float
    diff_to_next: float | None        # L2(Q_T) distance to the next-smaller epsilon run
    residue_sup: float                # sup_t eps ||L* L w||_dual = sup_t eps ||L w||_L2
    residue_bound: float              # sqrt(2 eps) * sqrt(sup_t H)
    sup_entropy: float


def regularization_consistency_study(cfg: SimConfig, eps_list, seed: int) -> list[ConsistencyRow]:
    """Pathwise de-regularization study under frozen noise.

    Reruns the entropy-variable scheme for each epsilon (descending) with
    the identical increment stream, reporting successive L2(Q_T)
    differences of the densities and the regularization residue with its
    entropy bound.
    """
    eps_list = [float(e) for e in eps_list]
    if sorted(eps_list, reverse=True) != eps_list:
        raise ValueError("epsilon list must be strictly descending")
    if cfg.scheme != ENTROPY_VARIABLE:
        raise ValueError("the consistency study runs the entropy-variable scheme")
    runs = []
    for eps in eps_list:
        reg = replace(cfg.regularizer, epsilon=eps)
        cfg_eps = replace(cfg, regularizer=reg)
        runs.append((eps, cfg_eps, run_path(cfg_eps, seed)))

    rows = []
    for idx, (eps, cfg_eps, rec) in enumerate(runs):
        residue = 0.0
        for w in rec.snapshots_w:
            val = 0.0
            for i in range(cfg.params.n):
                val += cfg.basis.sobolev_norm(w[i]) ** 2
            residue = max(residue, eps * math.sqrt(val))
        sup_H = float(np.max(rec.entropy))
        diff = None
        if idx + 1 < len(runs):
            nxt = runs[idx + 1][2]
            if len(nxt.snapshot_times) != len(rec.snapshot_times):
                raise ValueError("consistency runs must share the snapshot grid")
            weights = np.diff(rec.snapshot_times)
            acc = 0.0
            for s in range(len(weights)):
                d = rec.snapshots_u[s] - nxt.snapshots_u[s]
                acc += np.sum(d**2) * cfg.grid.cell_volume * weights[s]
            diff = math.sqrt(acc)
        rows.append(
            ConsistencyRow(
                epsilon=eps,
                diff_to_next=diff,
                residue_sup=residue,
                residue_bound=math.sqrt(2.0 * eps) * math.sqrt(max(sup_H, 0.0)),
                sup_entropy=sup_H,
            )
        )
    return rows
