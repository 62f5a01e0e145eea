"""Spectrally truncated cylindrical Wiener noise and structural checks.

Mode coefficients decay as a_k = (1 + lambda_k)^(-rho) over the sorted
Neumann eigenmodes; increments are sampled from a counter-based generator
(Philox) through an explicit Box-Muller transform so that a seed fixes the
stream independently of platform and call order.  Every implemented
intensity family vanishes at zero density.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import SKTParameters, entropy_density_field
from .spectral import SpectralBasis

FAMILIES = ("zero", "bounded_ratio", "power", "power_damped")
# "constant" (s == 1) exists for closed-form variance tests only and is not
# accepted by the config parser.
_ALL_FAMILIES = FAMILIES + ("constant",)

_TWO_PI = 2.0 * np.pi


class NormalStream:
    """Deterministic N(0,1) stream: Philox counters -> Box-Muller normals.

    Streams are keyed by (seed, stream_index); two streams with different
    keys are independent, and a key fixes the sequence bit-for-bit.
    """

    def __init__(self, seed: int, stream: int = 0):
        key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(stream)], dtype=np.uint64)
        self._bits = np.random.Philox(key=key)

    def normals(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        raw = self._bits.random_raw(2 * pairs)
        # u1 in (0, 1] so the logarithm stays finite; u2 in [0, 1).
        u1 = ((raw[0::2] >> np.uint64(11)) + 1.0) * 2.0**-53
        u2 = (raw[1::2] >> np.uint64(11)) * 2.0**-53
        radius = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(_TWO_PI * u2)
        z[1::2] = radius * np.sin(_TWO_PI * u2)
        return z[:count]

    def increments(self, n: int, k: int, dt: float) -> np.ndarray:
        """n x k matrix of independent N(0, dt) Wiener increments."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        return np.sqrt(dt) * self.normals(n * k).reshape(n, k)


def default_rho(dim: int) -> float:
    """Spectral decay default: strictly above (d/2)^2 with margin."""
    return 1.1 * (dim / 2.0) ** 2 + 0.1


def default_mode_count(basis: SpectralBasis, rho: float) -> int:
    """Smallest truncation whose coefficient tail holds at most 1% of the total."""
    a2 = (1.0 + basis.eigenvalues) ** (-2.0 * rho)
    total = float(np.sum(a2))
    cumulative = np.cumsum(a2)
    k = int(np.searchsorted(cumulative, 0.99 * total)) + 1
    return min(k, basis.n_modes)


@dataclass
class NoiseModel:
    """Diagonal multiplicative noise: species i gets s(u_i) times the truncated field.

    family selects the intensity s; eta/alpha/beta are the family exponents,
    rho the spectral decay, and k_modes the truncation count.
    """

    family: str
    basis: SpectralBasis
    rho: float
    k_modes: int
    eta: float | None = None
    alpha: float | None = None
    beta: float | None = None
    coefficients: np.ndarray = field(init=False, repr=False)
    _mode_fields: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.family not in _ALL_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        d = self.basis.grid.dim
        if self.rho <= (d / 2.0) ** 2:
            raise ValueError(f"need rho > (d/2)^2 = {(d / 2.0) ** 2}, got {self.rho}")
        if not 1 <= self.k_modes <= self.basis.n_modes:
            raise ValueError("mode truncation out of range")
        if self.family == "bounded_ratio" and (self.eta is None or self.eta <= 0):
            raise ValueError("bounded_ratio requires eta > 0")
        if self.family == "power" and (self.alpha is None or not 0.5 <= self.alpha <= 1.0):
            raise ValueError("power requires alpha in [1/2, 1]")
        if self.family == "power_damped":
            if self.alpha is None or not 0.5 <= self.alpha < 1.0:
                raise ValueError("power_damped requires alpha in [1/2, 1)")
            if self.beta is None or self.beta < self.alpha / 2.0:
                raise ValueError("power_damped requires beta >= alpha/2")
        self.coefficients = (1.0 + self.basis.eigenvalues[: self.k_modes]) ** (-self.rho)

    # -- spectral bookkeeping -------------------------------------------------

    def mode_fields(self) -> np.ndarray:
        if self._mode_fields is None:
            self._mode_fields = self.basis.mode_fields(self.k_modes)
        return self._mode_fields

    @property
    def tail_fraction(self) -> float:
        """Share of the full coefficient mass dropped by the truncation."""
        a2 = (1.0 + self.basis.eigenvalues) ** (-2.0 * self.rho)
        return float(np.sum(a2[self.k_modes:]) / np.sum(a2))

    @property
    def sup_weight(self) -> float:
        """sum_k a_k^2 ||eta_k||_sup^2; finite by the decay requirement on rho."""
        fields = self.mode_fields()
        sups = np.max(np.abs(fields.reshape(self.k_modes, -1)), axis=1)
        return float(np.sum(self.coefficients**2 * sups**2))

    def pointwise_weight(self) -> np.ndarray:
        """Q(x) = sum_k a_k^2 eta_k(x)^2 on the grid."""
        fields = self.mode_fields()
        return np.tensordot(self.coefficients**2, fields**2, axes=1)

    # -- intensity families ------------------------------------------------------

    def intensity(self, u) -> np.ndarray:
        """s(u) elementwise for u >= 0; every public family has s(0) = 0."""
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        if self.family == "zero":
            return np.zeros_like(u)
        if self.family == "bounded_ratio":
            return u / (1.0 + u ** (0.5 + self.eta))
        if self.family == "power":
            return u**self.alpha
        if self.family == "power_damped":
            return u**self.alpha / (1.0 + u**self.beta)
        return np.ones_like(u)  # constant, test-only

    def intensity_sq_over_u(self, u) -> np.ndarray:
        """s(u)^2 / u evaluated stably at u = 0 (limit value)."""
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        if self.family == "zero":
            return np.zeros_like(u)
        if self.family == "bounded_ratio":
            return u / (1.0 + u ** (0.5 + self.eta)) ** 2
        if self.family == "power":
            return u ** (2.0 * self.alpha - 1.0)
        if self.family == "power_damped":
            return u ** (2.0 * self.alpha - 1.0) / (1.0 + u**self.beta) ** 2
        with np.errstate(divide="ignore"):
            return np.where(u > 0, 1.0 / np.where(u > 0, u, 1.0), np.inf)

    # -- field assembly --------------------------------------------------------------

    def field_increment(self, params: SKTParameters, u: np.ndarray, dw: np.ndarray) -> np.ndarray:
        """Noise field s(u_i) * sum_k a_k eta_k dW_ik, species-diagonal."""
        u = np.asarray(u, dtype=float)
        dw = np.asarray(dw, dtype=float)
        if dw.shape != (params.n, self.k_modes):
            raise ValueError(
                f"increment matrix shape {dw.shape} does not match (n, K) = "
                f"({params.n}, {self.k_modes})"
            )
        if u.shape[1:] != self.basis.grid.shape or u.shape[0] != params.n:
            raise ValueError("density field does not match grid/species")
        spatial = np.tensordot(dw * self.coefficients[None, :], self.mode_fields(), axes=1)
        return self.intensity(u) * spatial


def build_noise_model(family: str, basis: SpectralBasis, rho: float | None = None,
                      k_modes: int | None = None, **exponents) -> NoiseModel:
    rho = default_rho(basis.grid.dim) if rho is None else float(rho)
    k = default_mode_count(basis, rho) if k_modes is None else int(k_modes)
    return NoiseModel(family=family, basis=basis, rho=rho, k_modes=k, **exponents)


# -- structural reports ---------------------------------------------------------------


@dataclass
class LipschitzGrowthReport:
    """Empirical Lipschitz/growth behaviour of the noise map on sampled pairs.

    c_lip and c_growth are normalized by the noise amplitude
    A = sqrt(sum_k a_k^2 ||eta_k||_sup^2), so for the bounded-ratio family
    with eta = 1/2 the Lipschitz estimate cannot exceed sup|s'| = 1.
    raw_max_ratio is the un-normalized Hilbert-Schmidt ratio.
    """

    c_lip: float
    c_growth: float
    gamma: float
    amplitude: float
    raw_max_ratio: float
    samples: int


def hilbert_schmidt_norm(model: NoiseModel, params: SKTParameters, u: np.ndarray) -> float:
    """Hilbert-Schmidt norm of the noise map at density u (all species, all modes)."""
    q = model.pointwise_weight()
    s = model.intensity(np.asarray(u, dtype=float))
    return float(np.sqrt(np.sum(s**2 * q) * model.basis.grid.cell_volume))


def lipschitz_growth_report(model: NoiseModel, params: SKTParameters,
                            sample_pairs) -> LipschitzGrowthReport:
    """Estimate the noise map's Lipschitz constant and growth exponent.

    sample_pairs is a sequence of (u, v) density arrays of shape
    (n,) + grid shape.  The growth exponent is fitted by least squares on
    log ||sigma(v)|| against log ||v|| over all sampled fields.
    """
    pairs = list(sample_pairs)
    if not pairs:
        raise ValueError("need at least one sample pair")
    basis = model.basis
    q = model.pointwise_weight()
    vol = basis.grid.cell_volume
    amplitude = np.sqrt(model.sup_weight)
    max_ratio = 0.0
    sizes, norms = [], []
    for u, v in pairs:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        ds = model.intensity(u) - model.intensity(v)
        hs_diff = np.sqrt(np.sum(ds**2 * q) * vol)
        du = np.sqrt(np.sum((u - v) ** 2) * vol)
        if du > 0:
            max_ratio = max(max_ratio, hs_diff / du)
        for f in (u, v):
            size = np.sqrt(np.sum(f**2) * vol)
            hs = np.sqrt(np.sum(model.intensity(f) ** 2 * q) * vol)
            sizes.append(size)
            norms.append(hs)
    sizes = np.asarray(sizes)
    norms = np.asarray(norms)
    ok = (sizes > 0) & (norms > 0)
    if np.count_nonzero(ok) >= 2 and np.ptp(np.log(sizes[ok])) > 0:
        gamma = float(np.polyfit(np.log(sizes[ok]), np.log(norms[ok]), 1)[0])
    else:
        gamma = 0.0
    if amplitude > 0:
        c_growth = float(np.max(norms / (amplitude * (1.0 + sizes**max(gamma, 0.0)))))
        c_lip = max_ratio / amplitude
    else:
        c_growth = 0.0
        c_lip = 0.0
    return LipschitzGrowthReport(
        c_lip=c_lip,
        c_growth=c_growth,
        gamma=gamma,
        amplitude=float(amplitude),
        raw_max_ratio=max_ratio,
        samples=len(pairs),
    )


@dataclass
class EntropyInteractionReport:
    """Empirical constants of the entropy/noise interaction inequalities.

    ratio1 bounds the martingale-intensity functional, ratio2 the trace
    (Ito correction) functional, both against 1 + the time-integrated
    entropy.  These are per-trajectory suprema, not global certificates.
    """

    ratio1_max: float
    ratio2_max: float
    lhs1_final: float
    lhs2_final: float
    entropy_time_integral: float


def entropy_interaction_report(model: NoiseModel, params: SKTParameters,
                               record) -> EntropyInteractionReport:
    """Evaluate both interaction functionals along a recorded trajectory.

    The record must carry density snapshots (run with save_every = 1 for
    faithful quadrature); integrals use the left rectangle rule on the
    snapshot times.
    """
    snaps = record.snapshot_values()
    times = record.snapshot_times
    if len(times) < 2:
        raise ValueError("trajectory must carry at least two snapshots")
    basis = model.basis
    vol = basis.grid.cell_volume
    a = model.coefficients
    q = model.pointwise_weight()
    pi = params.pi.reshape((params.n,) + (1,) * basis.grid.dim)

    mart_rates = []   # sum_{k,i} (integral of pi log(u) s(u) eta_k)^2, per snapshot
    trace_rates = []  # sum_{k,i,c} (pi/u) (s a_k eta_k)^2 vol, per snapshot
    entropies = []
    for u in snaps:
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            logu = np.where(u > 0, np.log(np.where(u > 0, u, 1.0)), 0.0)
        g = pi * logu * model.intensity(u)                      # (n, shape)
        coef = basis.sorted_coefficients(g)[..., : model.k_modes]
        mart_rates.append(float(np.sum((coef * a[None, :]) ** 2)))
        weight = pi * model.intensity_sq_over_u(u)
        trace_rates.append(float(np.sum(weight * q[None, ...]) * vol))
        entropies.append(basis.grid.integrate(entropy_density_field(params, u)))

    dt_snap = np.diff(times)
    lhs1_sq = np.concatenate([[0.0], np.cumsum(np.asarray(mart_rates[:-1]) * dt_snap)])
    lhs2 = np.concatenate([[0.0], np.cumsum(np.asarray(trace_rates[:-1]) * dt_snap)])
    ent_int = np.concatenate([[0.0], np.cumsum(np.asarray(entropies[:-1]) * dt_snap)])
    denom = 1.0 + ent_int
    ratio1 = float(np.max(np.sqrt(lhs1_sq) / denom))
    ratio2 = float(np.max(lhs2 / denom))
    return EntropyInteractionReport(
        ratio1_max=ratio1,
        ratio2_max=ratio2,
        lhs1_final=float(np.sqrt(lhs1_sq[-1])),
        lhs2_final=float(lhs2[-1]),
        entropy_time_integral=float(ent_int[-1]),
    )
