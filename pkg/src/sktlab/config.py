"""JSON configuration parsing with strict validation and default echoing.

Unknown keys are rejected with the path of the offending key; every default
the run will use is echoed into a canonical dictionary that feeds the run
manifest (and the config hash).
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError
from .grid import Grid
from .model import SKTParameters, find_reversible_measure
from .noise import FAMILIES, build_noise_model, default_rho
from .regularization import EntropyRegularizer
from .simulator import ENTROPY_VARIABLE, LAPLACIAN_FORM, InitialCondition, SimConfig
from .spectral import build_eigenbasis, default_sobolev_index

_TOP_KEYS = {
    "n", "a0", "a", "pi", "mode", "grid", "T", "dt", "scheme", "epsilon", "m",
    "newton_tol", "step_newton_tol", "save_every", "noise", "initial",
}
_GRID_KEYS = {"dim", "N", "L", "Nx", "Ny", "Lx", "Ly"}
_NOISE_KEYS = {"family", "eta", "alpha", "beta", "rho", "K"}
_INITIAL_KEYS = {"type", "c", "delta", "path"}


def _reject_unknown(doc: dict, allowed: set, where: str):
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}", "unknown key")


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"{where}.{key}", "missing required key")
    return doc[key]


def _number(value, where, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, "expected a number")
    if positive and value <= 0:
        raise ConfigError(where, "must be positive")
    return float(value)


def _integer(value, where, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(where, "expected an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(where, f"must be >= {minimum}")
    return value


def _vector(value, n, where):
    if not isinstance(value, list) or len(value) != n:
        raise ConfigError(where, f"expected a list of {n} numbers")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(value)])


def parse_config(document) -> tuple[SimConfig, dict]:
    """Validate a config document (JSON text or dict) into a SimConfig.

    Returns (config, echo) where echo is the fully-defaulted canonical
    dictionary recorded in the run manifest.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ConfigError("$", "top-level document must be an object")
    _reject_unknown(doc, _TOP_KEYS, "$")

    n = _integer(_require(doc, "n", "$"), "$.n", minimum=1)
    a0 = _vector(_require(doc, "a0", "$"), n, "$.a0")
    a_rows = _require(doc, "a", "$")
    if not isinstance(a_rows, list) or len(a_rows) != n:
        raise ConfigError("$.a", f"expected {n} rows")
    a = np.stack([_vector(row, n, f"$.a[{i}]") for i, row in enumerate(a_rows)])
    if np.any(a0 < 0) or np.any(a < 0):
        raise ConfigError("$.a", "coefficients must be nonnegative")

    if "pi" in doc:
        pi = _vector(doc["pi"], n, "$.pi")
        if np.any(pi <= 0):
            raise ConfigError("$.pi", "reversible measure must be positive")
        pi_inferred = False
    else:
        pi = find_reversible_measure(a)
        pi_inferred = True

    mode = doc.get("mode")
    if mode is not None and mode not in ("with_self_diffusion", "without_self_diffusion"):
        raise ConfigError("$.mode", "must be with_self_diffusion or without_self_diffusion")
    try:
        params = SKTParameters(a0=a0, a=a, pi=pi, mode=mode or "")
    except (ValueError,) as exc:
        raise ConfigError("$", str(exc)) from exc

    gdoc = _require(doc, "grid", "$")
    if not isinstance(gdoc, dict):
        raise ConfigError("$.grid", "expected an object")
    _reject_unknown(gdoc, _GRID_KEYS, "$.grid")
    dim = _integer(_require(gdoc, "dim", "$.grid"), "$.grid.dim", minimum=1)
    if dim == 1:
        nx = _integer(_require(gdoc, "N", "$.grid"), "$.grid.N", minimum=2)
        lx = _number(gdoc.get("L", 1.0), "$.grid.L", positive=True)
        grid = Grid(dim=1, nx=nx, lx=lx)
    elif dim == 2:
        grid = Grid(
            dim=2,
            nx=_integer(_require(gdoc, "Nx", "$.grid"), "$.grid.Nx", minimum=2),
            ny=_integer(_require(gdoc, "Ny", "$.grid"), "$.grid.Ny", minimum=2),
            lx=_number(gdoc.get("Lx", 1.0), "$.grid.Lx", positive=True),
            ly=_number(gdoc.get("Ly", 1.0), "$.grid.Ly", positive=True),
        )
    else:
        raise ConfigError("$.grid.dim", "only dimensions 1 and 2 are supported")

    t_final = _number(_require(doc, "T", "$"), "$.T", positive=True)
    dt = _number(_require(doc, "dt", "$"), "$.dt", positive=True)
    m = _integer(doc.get("m", default_sobolev_index(dim)), "$.m", minimum=1)
    try:
        basis = build_eigenbasis(grid, m)
    except ValueError as exc:
        raise ConfigError("$.m", str(exc)) from exc

    epsilon = _number(doc.get("epsilon", 1e-4), "$.epsilon", positive=True)
    newton_tol = _number(doc.get("newton_tol", 1e-10), "$.newton_tol", positive=True)
    step_tol = _number(doc.get("step_newton_tol", 1e-12), "$.step_newton_tol", positive=True)
    regularizer = EntropyRegularizer(
        params=params, basis=basis, epsilon=epsilon, newton_tol=newton_tol
    )

    ndoc = _require(doc, "noise", "$")
    if not isinstance(ndoc, dict):
        raise ConfigError("$.noise", "expected an object")
    _reject_unknown(ndoc, _NOISE_KEYS, "$.noise")
    family = _require(ndoc, "family", "$.noise")
    if family not in FAMILIES:
        raise ConfigError("$.noise.family", f"must be one of {sorted(FAMILIES)}")
    rho = _number(ndoc.get("rho", default_rho(dim)), "$.noise.rho", positive=True)
    exponents = {}
    for name in ("eta", "alpha", "beta"):
        if name in ndoc:
            exponents[name] = _number(ndoc[name], f"$.noise.{name}")
    k_modes = ndoc.get("K")
    if k_modes is not None:
        k_modes = _integer(k_modes, "$.noise.K", minimum=1)
    try:
        noise = build_noise_model(family, basis, rho=rho, k_modes=k_modes, **exponents)
    except ValueError as exc:
        raise ConfigError("$.noise", str(exc)) from exc

    idoc = doc.get("initial", {"type": "constant_cosine"})
    if not isinstance(idoc, dict):
        raise ConfigError("$.initial", "expected an object")
    _reject_unknown(idoc, _INITIAL_KEYS, "$.initial")
    itype = idoc.get("type", "constant_cosine")
    if itype == "constant_cosine":
        c = _vector(idoc["c"], n, "$.initial.c") if "c" in idoc else np.ones(n)
        delta = _vector(idoc["delta"], n, "$.initial.delta") if "delta" in idoc else np.full(n, 0.25)
        if np.any(delta < 0) or np.any(c <= delta):
            raise ConfigError("$.initial", "need c_i > delta_i >= 0")
        initial = InitialCondition(kind="constant_cosine", c=c, delta=delta)
        initial_echo = {"type": "constant_cosine", "c": c.tolist(), "delta": delta.tolist()}
    elif itype == "field":
        path = idoc.get("path")
        if not isinstance(path, str):
            raise ConfigError("$.initial.path", "field initial data needs a snapshot path")
        from .io import read_snapshot

        try:
            values, _ = read_snapshot(path)
        except OSError as exc:
            raise ConfigError("$.initial.path", f"cannot read snapshot: {exc}") from exc
        if values.shape != (n,) + grid.shape:
            raise ConfigError(
                "$.initial.path",
                f"snapshot shape {values.shape} does not match (n,) + grid {grid.shape}",
            )
        initial = InitialCondition(kind="field", values=values)
        initial_echo = {"type": "field", "path": path}
    else:
        raise ConfigError("$.initial.type", "must be constant_cosine or field")

    # Both admissible modes allow the entropy scheme (without self-diffusion
    # still has a_i0 > 0), so it is the default.
    scheme = doc.get("scheme", ENTROPY_VARIABLE)
    if scheme not in (ENTROPY_VARIABLE, LAPLACIAN_FORM):
        raise ConfigError("$.scheme", "must be entropy_variable or laplacian_form")
    save_every = _integer(doc.get("save_every", _default_save_every(t_final, dt)),
                          "$.save_every", minimum=1)

    try:
        cfg = SimConfig(
            params=params,
            grid=grid,
            basis=basis,
            regularizer=regularizer,
            noise=noise,
            t_final=t_final,
            dt=dt,
            scheme=scheme,
            save_every=save_every,
            initial=initial,
            step_newton_tol=step_tol,
        )
    except ValueError as exc:
        raise ConfigError("$", str(exc)) from exc

    echo = {
        "n": n,
        "a0": a0.tolist(),
        "a": a.tolist(),
        "pi": pi.tolist(),
        "pi_inferred": pi_inferred,
        "mode": params.mode,
        "grid": (
            {"dim": 1, "N": grid.nx, "L": grid.lx}
            if dim == 1
            else {"dim": 2, "Nx": grid.nx, "Ny": grid.ny, "Lx": grid.lx, "Ly": grid.ly}
        ),
        "T": t_final,
        "dt": dt,
        "scheme": scheme,
        "epsilon": epsilon,
        "m": m,
        "newton_tol": newton_tol,
        "step_newton_tol": step_tol,
        "save_every": save_every,
        "noise": {
            "family": family,
            "rho": rho,
            "K": noise.k_modes,
            "tail_fraction": noise.tail_fraction,
            **exponents,
        },
        "initial": initial_echo,
    }
    return cfg, echo


def _default_save_every(t_final: float, dt: float) -> int:
    steps = max(1, int(round(t_final / dt)))
    return max(1, steps // 200)
