"""Command-line front end.

Subcommands map one-to-one onto library operations:

  simulate        one path -> timeseries CSV, snapshots, manifest
  ensemble        Monte Carlo paths -> per-path CSV, aggregate CSV, manifest
  check-structure reversible measure + noise structure reports -> JSON
  eps-study       de-regularization study -> CSV table
  entropy-report  per-step entropy balance decomposition -> CSV

Exit codes: 0 success, 2 validation error, 3 solver failure.  All
randomness derives from --seed; reruns are byte-identical apart from the
manifest wall clock.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as sio
from .config import parse_config
from .errors import (
    ConfigError,
    CycleInconsistent,
    DetailedBalanceViolated,
    AsymmetricSupport,
    NonPositiveDensity,
    SKTError,
    StepFailed,
)
from .estimators import regularization_consistency_study
from .noise import entropy_interaction_report, lipschitz_growth_report
from .simulator import entropy_balance_report, run_ensemble, run_path

_VALIDATION = (ConfigError, CycleInconsistent, DetailedBalanceViolated,
               AsymmetricSupport, NonPositiveDensity, ValueError)


def _load(config_path: str):
    text = Path(config_path).read_text()
    return parse_config(text)


def _write_snapshots(writer, cfg, record):
    for idx, t in enumerate(record.snapshot_times):
        tag = f"snap_u_{idx:06d}"
        jp, bp = sio.write_snapshot(cfg.grid, record.snapshots_u[idx], t, writer.path(tag))
        writer.register(jp, bp)
        if record.snapshots_w is not None:
            tag = f"snap_w_{idx:06d}"
            jp, bp = sio.write_snapshot(cfg.grid, record.snapshots_w[idx], t, writer.path(tag))
            writer.register(jp, bp)


def cmd_simulate(args) -> int:
    cfg, echo = _load(args.config)
    writer = sio.RunWriter(args.out, echo, [args.seed])
    record = run_path(cfg, args.seed)
    writer.register(sio.write_timeseries(record, writer.path("timeseries.csv")))
    _write_snapshots(writer, cfg, record)
    writer.write_manifest()
    return 0


def cmd_ensemble(args) -> int:
    cfg, echo = _load(args.config)
    writer = sio.RunWriter(args.out, echo, [args.seed])
    stats = run_ensemble(cfg, args.paths, args.seed, workers=args.workers)
    lines = ["path,sup_H,dissipation_integral,"
             + ",".join(f"mass0_{i + 1}" for i in range(cfg.params.n)) + ","
             + ",".join(f"massT_{i + 1}" for i in range(cfg.params.n)) + ",min_density"]
    for j in range(stats.n_paths):
        lines.append(",".join(
            [str(j), repr(float(stats.sup_entropy[j])), repr(float(stats.dissipation_integral[j]))]
            + [repr(float(x)) for x in stats.mass_initial[j]]
            + [repr(float(x)) for x in stats.mass_final[j]]
            + [repr(float(stats.min_density[j]))]
        ))
    paths_csv = writer.path("paths.csv")
    paths_csv.write_text("\n".join(lines) + "\n")

    agg_lines = ["functional,mean,variance,max,stderr"]
    for name, summary in stats.aggregates.items():
        agg_lines.append(",".join([
            name,
            repr(summary["mean"]),
            repr(summary["variance"]),
            repr(summary["max"]),
            "" if summary["stderr"] is None else repr(summary["stderr"]),
        ]))
    agg_csv = writer.path("ensemble.csv")
    agg_csv.write_text("\n".join(agg_lines) + "\n")
    writer.register(paths_csv, agg_csv)
    writer.write_manifest()
    return 0


def cmd_check_structure(args) -> int:
    cfg, echo = _load(args.config)
    writer = sio.RunWriter(args.out, echo, [args.seed])
    rng = np.random.default_rng(args.seed)
    shape = (cfg.params.n,) + cfg.grid.shape
    pairs = [
        (rng.uniform(0.01, 10.0, shape), rng.uniform(0.01, 10.0, shape))
        for _ in range(args.pairs)
    ]
    a4 = lipschitz_growth_report(cfg.noise, cfg.params, pairs)
    record = run_path(replace(cfg, save_every=1), args.seed)
    a5 = entropy_interaction_report(cfg.noise, cfg.params, record)
    report = {
        "pi": cfg.params.pi.tolist(),
        "noise_lipschitz": {
            "c_lip": a4.c_lip,
            "c_growth": a4.c_growth,
            "gamma": a4.gamma,
            "amplitude": a4.amplitude,
            "raw_max_ratio": a4.raw_max_ratio,
            "samples": a4.samples,
        },
        "entropy_interaction": {
            "ratio1_max": a5.ratio1_max,
            "ratio2_max": a5.ratio2_max,
            "lhs1_final": a5.lhs1_final,
            "lhs2_final": a5.lhs2_final,
            "entropy_time_integral": a5.entropy_time_integral,
        },
    }
    out = writer.path("structure_report.json")
    out.write_text(json.dumps(report, sort_keys=True, indent=1) + "\n")
    writer.register(out)
    writer.write_manifest()
    return 0


def cmd_eps_study(args) -> int:
    cfg, echo = _load(args.config)
    eps_list = [float(tok) for tok in args.eps_list.split(",") if tok]
    writer = sio.RunWriter(args.out, echo, [args.seed])
    rows = regularization_consistency_study(cfg, eps_list, args.seed)
    lines = ["epsilon,diff_to_next,residue_sup,residue_bound,sup_entropy"]
    for r in rows:
        lines.append(",".join([
            repr(r.epsilon),
            "" if r.diff_to_next is None else repr(r.diff_to_next),
            repr(r.residue_sup),
            repr(r.residue_bound),
            repr(r.sup_entropy),
        ]))
    out = writer.path("eps_study.csv")
    out.write_text("\n".join(lines) + "\n")
    writer.register(out)
    writer.write_manifest()
    return 0


def cmd_entropy_report(args) -> int:
    cfg, echo = _load(args.config)
    cfg = replace(cfg, save_every=1)
    writer = sio.RunWriter(args.out, echo, [args.seed])
    record = run_path(cfg, args.seed)
    rows = entropy_balance_report(cfg, record)
    lines = ["t,delta_H,dissipation,martingale,ito_correction,residual,min_face_margin"]
    for r in rows:
        lines.append(",".join(repr(x) for x in (
            r.t, r.delta_entropy, r.dissipation, r.martingale,
            r.ito_correction, r.residual, r.min_face_margin,
        )))
    out = writer.path("entropy_balance.csv")
    out.write_text("\n".join(lines) + "\n")
    writer.register(out)
    writer.register(sio.write_timeseries(record, writer.path("timeseries.csv")))
    writer.write_manifest()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sktlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, paths=False, eps=False):
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--seed", type=int, required=True, help="64-bit base seed")
        p.add_argument("--out", required=True, help="output directory")
        if paths:
            p.add_argument("--paths", type=int, required=True, help="number of Monte Carlo paths")
            p.add_argument("--workers", type=int, default=1, help="worker processes")
        if eps:
            p.add_argument("--eps-list", required=True,
                           help="descending comma-separated regularization strengths")

    common(sub.add_parser("simulate", help="run one path and write its record"))
    common(sub.add_parser("ensemble", help="run a Monte Carlo ensemble"), paths=True)
    p = sub.add_parser("check-structure", help="reversible measure and noise structure reports")
    common(p)
    p.add_argument("--pairs", type=int, default=100, help="sampled field pairs for the noise check")
    common(sub.add_parser("eps-study", help="frozen-noise de-regularization study"), eps=True)
    common(sub.add_parser("entropy-report", help="per-step entropy balance decomposition"))
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "check-structure": cmd_check_structure,
    "eps-study": cmd_eps_study,
    "entropy-report": cmd_entropy_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _VALIDATION as exc:
        where = getattr(exc, "where", "")
        sio.emit_json_error(exc, where)
        return 2
    except StepFailed as exc:
        sio.emit_json_error(exc, f"step {exc.step}")
        return 3
    except SKTError as exc:
        sio.emit_json_error(exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
