"""Time integration of the regularized stochastic cross-diffusion system.

Two schemes:

* ``entropy_variable``: semi-implicit step in the regularized dual state.
  The noise enters explicitly at the pre-step density (Ito convention);
  the diffusion is implicit in the new entropy variable with face
  mobilities frozen at the old state.  Densities stay strictly positive by
  construction (u = exp(w/pi)), and the regularized entropy decreases when
  the noise is off, unconditionally, because the entropy is convex in the
  evolved state and the frozen face form is positive semidefinite.

* ``laplacian_form``: lagged-coefficient backward Euler on the
  double-Laplacian ("very weak") rewriting, available without
  self-diffusion.  It has no structural positivity; undershoots beyond
  round-off are a hard error.

The evolved variable's total mass is conserved exactly (up to rounding)
when the noise is off: steps update the state by the flux-form increment
rather than re-evaluating the regularization map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    LinearSolveFailed,
    NewtonDiverged,
    PositivityLost,
    SKTError,
    StepFailed,
)
from .grid import Grid, _face_axes, _slices, face_dissipation
from .model import (
    SKTParameters,
    WITH_SELF_DIFFUSION,
    WITHOUT_SELF_DIFFUSION,
    entropy_density_field,
    entropy_variable,
    inverse_entropy_variable,
    mobility_at,
)
from .noise import NoiseModel, NormalStream
from .regularization import EntropyRegularizer
from .spectral import SpectralBasis

ENTROPY_VARIABLE = "entropy_variable"
LAPLACIAN_FORM = "laplacian_form"


@dataclass
class InitialCondition:
    """Constant-plus-cosine initial datum or an explicit field."""

    kind: str = "constant_cosine"
    c: np.ndarray | None = None
    delta: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "constant_cosine" and self.c is not None and self.delta is not None:
            c = np.asarray(self.c, dtype=float)
            delta = np.asarray(self.delta, dtype=float)
            if np.any(delta < 0) or np.any(c <= delta):
                raise ValueError("need c_i > delta_i >= 0 for a positive initial datum")

    def build(self, grid: Grid, params: SKTParameters) -> np.ndarray:
        n = params.n
        if self.kind == "field":
            u0 = np.asarray(self.values, dtype=float)
            if u0.shape != (n,) + grid.shape:
                raise ValueError("initial field shape mismatch")
            return u0.copy()
        if self.kind != "constant_cosine":
            raise ValueError(f"unknown initial condition {self.kind!r}")
        c = np.ones(n) if self.c is None else np.asarray(self.c, dtype=float)
        delta = np.full(n, 0.25) if self.delta is None else np.asarray(self.delta, dtype=float)
        if c.shape != (n,) or delta.shape != (n,):
            raise ValueError("initial condition vectors must have length n")
        if np.any(delta < 0) or np.any(c <= delta):
            raise ValueError("need c_i > delta_i >= 0 for a positive initial datum")
        profile = np.cos(np.pi * grid.centers("x") / grid.lx)
        if grid.dim == 2:
            profile = np.outer(np.cos(np.pi * grid.centers("y") / grid.ly), profile)
        shape = (n,) + (1,) * grid.dim
        return c.reshape(shape) + delta.reshape(shape) * profile[None, ...]


@dataclass
class SimConfig:
    params: SKTParameters
    grid: Grid
    basis: SpectralBasis
    regularizer: EntropyRegularizer
    noise: NoiseModel
    t_final: float
    dt: float
    scheme: str = ENTROPY_VARIABLE
    save_every: int = 1
    initial: InitialCondition = field(default_factory=InitialCondition)
    step_newton_tol: float = 1e-12

    def __post_init__(self):
        if self.dt <= 0 or self.t_final < self.dt:
            raise ValueError("need dt > 0 and T >= dt")
        if self.save_every < 1:
            raise ValueError("save_every must be >= 1")
        if self.scheme == LAPLACIAN_FORM:
            if self.params.mode != WITHOUT_SELF_DIFFUSION:
                raise ValueError("laplacian_form requires the without-self-diffusion mode")
            if self.grid.dim > 2:
                raise ValueError("laplacian_form requires dimension <= 2")
        elif self.scheme == ENTROPY_VARIABLE:
            if self.params.mode != WITH_SELF_DIFFUSION and not np.all(self.params.a0 > 0):
                raise ValueError("entropy_variable requires self-diffusion or a_i0 > 0")
        else:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))


@dataclass
class PathRecord:
    """Per-path time series plus field snapshots.

    ``masses`` tracks the evolved state (the dual variable for the entropy
    scheme), whose integral is the scheme's conserved quantity.  Density
    min/max are over species and cells.  Snapshots hold the density u (and
    the entropy variable w for the entropy scheme) every ``save_every``
    steps plus the final state.
    """

    scheme: str
    seed: int
    k_modes: int
    times: np.ndarray
    entropy: np.ndarray
    dissipation: np.ndarray
    masses: np.ndarray          # (steps+1, n)
    min_density: np.ndarray
    max_density: np.ndarray
    l2: np.ndarray              # (steps+1, n)
    newton_iters: np.ndarray    # (steps,)
    snapshot_times: np.ndarray
    snapshots_u: list
    snapshots_w: list | None
    noise_increments: list | None
    clip_events: int = 0

    def snapshot_values(self):
        return self.snapshots_u

    @property
    def final_density(self) -> np.ndarray:
        return self.snapshots_u[-1]


def _record_scalars(cfg: SimConfig, u, w, evolved):
    vol = cfg.grid.cell_volume
    if w is not None:
        H = cfg.regularizer.entropy_from_w(w)
        D, _, _ = face_dissipation(cfg.params, cfg.grid, w)
    else:
        H = cfg.grid.integrate(entropy_density_field(cfg.params, u))
        D = _density_dissipation(cfg.params, cfg.grid, u)
    masses = np.sum(evolved.reshape(cfg.params.n, -1), axis=1) * vol
    l2 = np.sqrt(np.sum(u.reshape(cfg.params.n, -1) ** 2, axis=1) * vol)
    return H, D, masses, float(np.min(u)), float(np.max(u)), l2


def _density_dissipation(params, grid, u):
    """Face entropy production of a nonnegative density field (diagnostic).

    Faces touching a zero cell contribute zero (the limiting value for the
    implemented noise-compatible states is not needed diagnostically).
    """
    u = np.asarray(u, dtype=float)
    total = 0.0
    for axis, h in _face_axes(grid):
        left = _slices(u.ndim, axis, "left")
        right = _slices(u.ndim, axis, "right")
        ul = u[left].reshape(params.n, -1)
        ur = u[right].reshape(params.n, -1)
        ok = np.all((ul > 0) & (ur > 0), axis=0)
        if not np.any(ok):
            continue
        ul = ul[:, ok]
        ur = ur[:, ok]
        pi = params.pi[:, None]
        g = (pi * (np.log(ur) - np.log(ul))) / h
        u_face = np.sqrt(ul * ur)
        B = mobility_at(params, u_face)
        total += float(np.sum(np.einsum("if,ijf,jf->f", g, B, g)) * grid.cell_volume)
    return total


# -- entropy-variable scheme ---------------------------------------------------


def assemble_frozen_diffusion(params: SKTParameters, grid: Grid, w: np.ndarray) -> np.ndarray:
    """Dense matrix of the flux-form diffusion with face mobility frozen at w.

    Acts on fields flattened species-major: index i * ncells + cell.
    Row sums telescope to zero per species, which is what conserves the
    evolved mass exactly.
    """
    n = params.n
    nc = grid.ncells
    K = np.zeros((n * nc, n * nc))
    cell_index = np.arange(nc).reshape(grid.shape)
    for axis, h in _face_axes(grid):
        left = _slices(grid.dim, axis, "left")
        right = _slices(grid.dim, axis, "right")
        w_face = 0.5 * (w[(slice(None),) + left] + w[(slice(None),) + right])
        u_face = np.exp(w_face.reshape(n, -1) / params.pi[:, None])
        B = mobility_at(params, u_face) / h**2                 # (n, n, F)
        li = cell_index[left].ravel()
        ri = cell_index[right].ravel()
        for i in range(n):
            for j in range(n):
                b = B[i, j]
                np.add.at(K, (i * nc + li, j * nc + ri), b)
                np.add.at(K, (i * nc + li, j * nc + li), -b)
                np.add.at(K, (i * nc + ri, j * nc + li), b)
                np.add.at(K, (i * nc + ri, j * nc + ri), -b)
    return K


def _dual_norm_stacked(basis: SpectralBasis, f: np.ndarray) -> float:
    return math.sqrt(sum(basis.dual_norm(f[i]) ** 2 for i in range(f.shape[0])))


def step_entropy_variable(cfg: SimConfig, v: np.ndarray, w: np.ndarray,
                          dw: np.ndarray | None):
    """One semi-implicit step; returns (v', w', newton_iterations).

    Solves forward(w') - dt * K w' = v + noise for w' by damped Newton,
    with K the frozen-coefficient diffusion, then updates
    v' = v + dt * K w' + noise so the telescoped flux sum conserves the
    evolved mass to rounding.
    """
    params, grid, basis = cfg.params, cfg.grid, cfg.basis
    reg = cfg.regularizer
    n, nc = params.n, grid.ncells
    dt = cfg.dt

    u_pre = inverse_entropy_variable(params, w)
    noise = None
    if dw is not None:
        noise = cfg.noise.field_increment(params, u_pre, dw)
    rhs = v + noise if noise is not None else v.copy()

    K = assemble_frozen_diffusion(params, grid, w)
    S = basis.dense_sobolev_matrix()
    base = -dt * K
    for i in range(n):
        sl = slice(i * nc, (i + 1) * nc)
        base[sl, sl] += reg.epsilon * S

    pi_flat = np.repeat(params.pi, nc)
    rhs_flat = rhs.reshape(-1)
    w_flat = w.reshape(-1).copy()

    def residual(wf):
        return np.exp(wf / pi_flat) + base @ wf - rhs_flat

    def dual(rf):
        return _dual_norm_stacked(basis, rf.reshape((n,) + grid.shape))

    tol = cfg.step_newton_tol * (1.0 + dual(rhs_flat))
    r = residual(w_flat)
    rn = dual(r)
    iters = 0
    max_iter = reg.newton_max_iter
    for it in range(max_iter):
        if rn <= tol:
            break
        J = base.copy()
        J[np.arange(n * nc), np.arange(n * nc)] += np.exp(w_flat / pi_flat) / pi_flat
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise LinearSolveFailed(f"step Jacobian solve failed: {exc}") from exc
        step = 1.0
        for _ in range(reg.max_backtracks + 1):
            w_try = w_flat + step * delta
            r_try = residual(w_try)
            rn_try = dual(r_try)
            if rn_try < rn:
                break
            step *= 0.5
        else:
            raise NewtonDiverged(rn, it, "step line search stalled; reduce dt")
        w_flat, r, rn = w_try, r_try, rn_try
        iters = it + 1
    else:
        if rn > tol:
            raise NewtonDiverged(rn, max_iter, "step Newton budget exhausted; reduce dt")

    w_new = w_flat.reshape((n,) + grid.shape)
    v_new = v + dt * (K @ w_flat).reshape((n,) + grid.shape)
    if noise is not None:
        v_new += noise
    return v_new, w_new, iters


# -- laplacian-form scheme --------------------------------------------------------


def _laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse mirrored-ghost Neumann Laplacian on flattened cells."""
    nc = grid.ncells
    cell_index = np.arange(nc).reshape(grid.shape)
    rows, cols, vals = [], [], []
    for axis, h in _face_axes(grid):
        left = cell_index[_slices(grid.dim, axis, "left")].ravel()
        right = cell_index[_slices(grid.dim, axis, "right")].ravel()
        w = 1.0 / h**2
        rows.extend([left, left, right, right])
        cols.extend([right, left, left, right])
        vals.extend([np.full(left.size, w), np.full(left.size, -w),
                     np.full(left.size, w), np.full(left.size, -w)])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(nc, nc))


def step_laplacian_form(cfg: SimConfig, u: np.ndarray, dw: np.ndarray | None,
                        lap: sp.csr_matrix):
    """Backward Euler on the very-weak form with lagged coefficients.

    Per species solves (I - dt * Lap diag(a_i0 + sum_j a_ij u_j)) u' = rhs.
    Negative undershoots beyond -1e-12 ||u||_sup raise PositivityLost;
    smaller round-off is clipped to zero and counted.
    """
    params, grid = cfg.params, cfg.grid
    n, nc = params.n, grid.ncells
    noise = None
    if dw is not None:
        noise = cfg.noise.field_increment(params, u, dw)
    rhs = u + noise if noise is not None else u.copy()

    coeff = params.a0.reshape((n,) + (1,) * grid.dim) + np.tensordot(params.a, u, axes=1)
    u_new = np.empty_like(u)
    sup = max(1.0, float(np.max(np.abs(u))))
    clips = 0
    eye = sp.identity(nc, format="csr")
    for i in range(n):
        M = eye - cfg.dt * (lap @ sp.diags(coeff[i].ravel()))
        rhs_i = rhs[i].ravel()
        sol = spla.spsolve(M.tocsc(), rhs_i)
        res = np.linalg.norm(M @ sol - rhs_i)
        if not np.all(np.isfinite(sol)) or res > 1e-11 * (1.0 + np.linalg.norm(rhs_i)):
            raise LinearSolveFailed(f"species {i}: linear residual {res:.3e}")
        u_new[i] = sol.reshape(grid.shape)
    worst = float(np.min(u_new))
    if worst < -1e-12 * sup:
        raise PositivityLost(f"density undershoot {worst:.3e} beyond round-off threshold")
    if worst < 0:
        clips = int(np.count_nonzero(u_new < 0))
        u_new = np.maximum(u_new, 0.0)
    return u_new, clips


# -- path and ensemble drivers ------------------------------------------------------


def run_path(cfg: SimConfig, seed: int, stream_index: int = 0) -> PathRecord:
    """Integrate one path to the final time; deterministic given (cfg, seed).

    With save_every = 1 the record also stores the per-step noise
    increments, which the entropy balance report needs.
    """
    params, grid = cfg.params, cfg.grid
    n_steps = cfg.n_steps
    stream = NormalStream(seed, stream_index)
    sample_noise = cfg.noise.family != "zero"
    store_fields = cfg.save_every == 1

    times = np.empty(n_steps + 1)
    entropy = np.empty(n_steps + 1)
    dissipation = np.empty(n_steps + 1)
    masses = np.empty((n_steps + 1, params.n))
    min_density = np.empty(n_steps + 1)
    max_density = np.empty(n_steps + 1)
    l2 = np.empty((n_steps + 1, params.n))
    newton_iters = np.zeros(n_steps, dtype=int)
    snapshots_u, snapshots_w, snapshot_times = [], [], []
    noise_increments = [] if (store_fields and sample_noise) else None
    clip_events = 0

    u0 = cfg.initial.build(grid, params)
    if cfg.scheme == ENTROPY_VARIABLE:
        w = entropy_variable(params, u0)
        v = cfg.regularizer.forward(w)
        u = u0
        evolved = v
        lap = None
    else:
        if np.any(u0 < 0):
            raise PositivityLost("initial datum has negative cells")
        u = u0
        w = None
        v = None
        evolved = u
        lap = _laplacian_matrix(grid)

    def save(step_idx, t):
        H, D, m, umin, umax, l2row = _record_scalars(cfg, u, w, evolved)
        times[step_idx] = t
        entropy[step_idx] = H
        dissipation[step_idx] = D
        masses[step_idx] = m
        min_density[step_idx] = umin
        max_density[step_idx] = umax
        l2[step_idx] = l2row
        if step_idx % cfg.save_every == 0 or step_idx == n_steps:
            snapshot_times.append(t)
            snapshots_u.append(u.copy())
            snapshots_w.append(w.copy() if w is not None else None)

    save(0, 0.0)
    for k in range(n_steps):
        t_next = (k + 1) * cfg.dt
        dw = stream.increments(params.n, cfg.noise.k_modes, cfg.dt) if sample_noise else None
        if noise_increments is not None:
            noise_increments.append(dw)
        try:
            if cfg.scheme == ENTROPY_VARIABLE:
                v, w, iters = step_entropy_variable(cfg, v, w, dw)
                u = inverse_entropy_variable(params, w)
                evolved = v
                newton_iters[k] = iters
            else:
                u, clips = step_laplacian_form(cfg, u, dw, lap)
                clip_events += clips
                evolved = u
        except (NewtonDiverged, LinearSolveFailed, PositivityLost) as exc:
            raise StepFailed(k, t_next, exc) from exc
        save(k + 1, t_next)

    return PathRecord(
        scheme=cfg.scheme,
        seed=seed,
        k_modes=cfg.noise.k_modes,
        times=times,
        entropy=entropy,
        dissipation=dissipation,
        masses=masses,
        min_density=min_density,
        max_density=max_density,
        l2=l2,
        newton_iters=newton_iters,
        snapshot_times=np.asarray(snapshot_times),
        snapshots_u=snapshots_u,
        snapshots_w=snapshots_w if cfg.scheme == ENTROPY_VARIABLE else None,
        noise_increments=noise_increments,
        clip_events=clip_events,
    )


@dataclass
class EnsembleStats:
    """Order-independent aggregates over independent paths.

    Per-path scalars are kept (row j belongs to stream (base_seed, j));
    aggregate sums use exact accumulation so worker scheduling cannot
    change the result.
    """

    base_seed: int
    n_paths: int
    sup_entropy: np.ndarray
    dissipation_integral: np.ndarray
    mass_initial: np.ndarray    # (M, n)
    mass_final: np.ndarray
    min_density: np.ndarray
    aggregates: dict

    @staticmethod
    def _summary(values: np.ndarray) -> dict:
        m = values.shape[0]
        mean = math.fsum(values) / m
        if m > 1:
            var = math.fsum((values - mean) ** 2) / (m - 1)
            stderr = math.sqrt(var / m)
        else:
            var = 0.0
            stderr = None
        return {"mean": mean, "variance": var, "max": float(np.max(values)), "stderr": stderr}


def _path_summary(cfg: SimConfig, seed: int, j: int):
    rec = run_path(cfg, seed, stream_index=j)
    dt_steps = np.diff(rec.times)
    diss_int = math.fsum(rec.dissipation[:-1] * dt_steps)
    return (
        float(np.max(rec.entropy)),
        diss_int,
        rec.masses[0],
        rec.masses[-1],
        float(np.min(rec.min_density)),
    )


def run_ensemble(cfg: SimConfig, n_paths: int, base_seed: int, workers: int = 1) -> EnsembleStats:
    """Monte Carlo over independent paths; path j uses stream (base_seed, j).

    A failing path propagates its error (first by path index) with the
    number of completed paths attached as ``completed_paths``.
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    results = [None] * n_paths

    def fail(exc, done):
        exc.completed_paths = done
        raise exc

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_path_summary, cfg, base_seed, j) for j in range(n_paths)]
            for j, fut in enumerate(futures):
                try:
                    results[j] = fut.result()
                except SKTError as exc:
                    fail(exc, sum(r is not None for r in results))
    else:
        for j in range(n_paths):
            try:
                results[j] = _path_summary(cfg, base_seed, j)
            except SKTError as exc:
                fail(exc, j)

    sup_H = np.array([r[0] for r in results])
    diss = np.array([r[1] for r in results])
    m0 = np.stack([r[2] for r in results])
    mT = np.stack([r[3] for r in results])
    min_d = np.array([r[4] for r in results])
    aggregates = {
        "sup_entropy": EnsembleStats._summary(sup_H),
        "dissipation_integral": EnsembleStats._summary(diss),
        "min_density": EnsembleStats._summary(min_d),
    }
    for i in range(cfg.params.n):
        aggregates[f"mass_increment_{i + 1}"] = EnsembleStats._summary(mT[:, i] - m0[:, i])
    return EnsembleStats(
        base_seed=base_seed,
        n_paths=n_paths,
        sup_entropy=sup_H,
        dissipation_integral=diss,
        mass_initial=m0,
        mass_final=mT,
        min_density=min_d,
        aggregates=aggregates,
    )


# -- entropy balance report --------------------------------------------------------------


@dataclass
class EntropyBalanceRow:
    t: float
    delta_entropy: float
    dissipation: float          # dt * frozen face form at the new state
    martingale: float
    ito_correction: float
    residual: float
    min_face_margin: float


def entropy_balance_report(cfg: SimConfig, record: PathRecord) -> list[EntropyBalanceRow]:
    """Per-step decomposition of the regularized entropy balance.

    Requires an entropy-variable record saved with save_every = 1 (full
    fields and noise increments).  The dissipation term uses the face
    mobilities frozen at the pre-step state, matching the integrator, so
    for zero noise the residual is the pure convexity gap, O(dt^2) per
    step on smooth solutions.
    """
    if record.scheme != ENTROPY_VARIABLE or record.snapshots_w is None:
        raise ValueError("entropy balance needs an entropy-variable record")
    if len(record.snapshot_times) != len(record.times):
        raise ValueError("record must be saved with save_every = 1")
    params, grid, basis = cfg.params, cfg.grid, cfg.basis
    model = cfg.noise
    reg = cfg.regularizer
    dt = cfg.dt
    vol = grid.cell_volume
    a = model.coefficients
    has_noise = model.family != "zero" and record.noise_increments is not None
    fields = model.mode_fields() if has_noise else None

    rows = []
    for k in range(len(record.times) - 1):
        w_old = record.snapshots_w[k]
        w_new = record.snapshots_w[k + 1]
        u_old = record.snapshots_u[k]
        dH = record.entropy[k + 1] - record.entropy[k]
        diss_total, margins, _ = face_dissipation(params, grid, w_new, w_coeff=w_old)
        mart = 0.0
        ito = 0.0
        if has_noise:
            dw = record.noise_increments[k]
            with np.errstate(divide="ignore", invalid="ignore"):
                logu = np.where(u_old > 0, np.log(np.where(u_old > 0, u_old, 1.0)), 0.0)
            g = params.pi.reshape((params.n,) + (1,) * grid.dim) * logu * model.intensity(u_old)
            coef = basis.sorted_coefficients(g)[..., : model.k_modes]
            mart = float(np.sum(coef * a[None, :] * dw))
            s_u = model.intensity(u_old)
            a_bc = a.reshape((model.k_modes,) + (1,) * grid.dim)
            for i in range(params.n):
                sigma_e = s_u[i][None, ...] * a_bc * fields
                b = reg.tangent_batch_from_w(w_old[i], sigma_e, i)
                ito += 0.5 * dt * float(np.sum(b * sigma_e) * vol)
        residual = dH + dt * diss_total - mart - ito
        rows.append(
            EntropyBalanceRow(
                t=float(record.times[k + 1]),
                delta_entropy=float(dH),
                dissipation=float(dt * diss_total),
                martingale=float(mart),
                ito_correction=float(ito),
                residual=float(residual),
                min_face_margin=float(np.min(margins)) if margins.size else 0.0,
            )
        )
    return rows
