"""Serialization: timeseries CSV, snapshot header/payload pairs, run manifests.

Formats are bit-exact contracts consumed by external tooling:

* timeseries CSV columns, exactly:
  t, H, dissipation, mass_1..mass_n, min_u, max_u, l2_1..l2_n, newton_iters
  (mass columns are the evolved state's mass: the dual variable for the
  entropy scheme, the density for the Laplacian-form scheme).
* snapshots: a JSON header naming grid dims, lengths, time, species count,
  layout ("row-major, x fastest") and dtype ("<f8"), next to a raw
  little-endian float64 binary payload, species-major.
* run_manifest.json: echoed config with defaults, config hash (stable under
  key reordering), seeds, per-output checksums, wall-clock metadata.  All
  emitted data files are byte-stable given (config, seed); the manifest is
  byte-stable except for its wall_clock block.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from .grid import Grid
from .simulator import PathRecord

ARTIFACT_VERSION = "0.1.0"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_timeseries(record: PathRecord, path) -> Path:
    path = Path(path)
    n = record.masses.shape[1]
    header = (
        ["t", "H", "dissipation"]
        + [f"mass_{i + 1}" for i in range(n)]
        + ["min_u", "max_u"]
        + [f"l2_{i + 1}" for i in range(n)]
        + ["newton_iters"]
    )
    lines = [",".join(header)]
    for k in range(len(record.times)):
        iters = record.newton_iters[k - 1] if k > 0 else 0
        row = (
            [_fmt(record.times[k]), _fmt(record.entropy[k]), _fmt(record.dissipation[k])]
            + [_fmt(m) for m in record.masses[k]]
            + [_fmt(record.min_density[k]), _fmt(record.max_density[k])]
            + [_fmt(v) for v in record.l2[k]]
            + [str(int(iters))]
        )
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_snapshot(grid: Grid, values: np.ndarray, t: float, base) -> tuple[Path, Path]:
    """Write a field as header JSON + raw binary payload; returns both paths."""
    base = Path(base)
    values = np.ascontiguousarray(np.asarray(values, dtype="<f8"))
    header = {
        "t": float(t),
        "species": int(values.shape[0]),
        "dim": grid.dim,
        "shape": list(values.shape[1:]),
        "lengths": [grid.lx] if grid.dim == 1 else [grid.lx, grid.ly],
        "layout": "row-major, x fastest",
        "dtype": "<f8",
        "payload": base.name + ".bin",
    }
    bin_path = base.with_suffix(".bin")
    json_path = base.with_suffix(".json")
    bin_path.write_bytes(values.tobytes())
    json_path.write_text(json.dumps(header, sort_keys=True, indent=1) + "\n")
    return json_path, bin_path


def read_snapshot(json_path) -> tuple[np.ndarray, float]:
    json_path = Path(json_path)
    header = json.loads(json_path.read_text())
    payload = json_path.parent / header["payload"]
    values = np.frombuffer(payload.read_bytes(), dtype="<f8").copy()
    shape = (header["species"],) + tuple(header["shape"])
    return values.reshape(shape), float(header["t"])


def config_hash(echo: dict) -> str:
    canonical = json.dumps(echo, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


class RunWriter:
    """Collects output files of one command and writes the manifest last."""

    def __init__(self, out_dir, echo: dict, seeds):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.echo = echo
        self.seeds = list(seeds)
        self.outputs = []
        self._started = time.time()

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def register(self, *paths):
        for p in paths:
            self.outputs.append(Path(p))

    def write_manifest(self) -> Path:
        finished = time.time()
        manifest = {
            "artifact_version": ARTIFACT_VERSION,
            "config_hash": config_hash(self.echo),
            "config": self.echo,
            "seeds": self.seeds,
            "outputs": [
                {
                    "path": p.name,
                    "sha256": file_sha256(p),
                    "bytes": p.stat().st_size,
                }
                for p in sorted(self.outputs, key=lambda q: q.name)
            ],
            "wall_clock": {
                "started_unix": self._started,
                "finished_unix": finished,
                "elapsed_s": finished - self._started,
            },
        }
        path = self.out_dir / "run_manifest.json"
        path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
        return path


def emit_json_error(exc, where: str = "") -> None:
    """Machine-readable error report on stderr."""
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if where:
        payload["where"] = where
    print(json.dumps(payload), file=sys.stderr)
