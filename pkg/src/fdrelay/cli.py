"""Command-line experiment runner.

Subcommands map one-to-one onto the harness experiments:

    fdrelay sweep-training --trials 5 --out training.csv
    fdrelay sweep-inr --sweep 0,40,100 --seed 3
    fdrelay sweep-snr --eta-r-db 60
    fdrelay sweep-antennas
    fdrelay contour --trials 4
    fdrelay approx-contour --out approx.csv

All power quantities are taken in dB. Without --paper-scale the desk-scale
defaults apply (20 trials, tau grid {0.3, 0.5, 0.7}).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .harness import (
    ConfigError,
    contour_grid,
    emit_contour_csv,
    emit_csv,
    parse_config,
    run_experiment,
    write_metadata,
)

_SUBCOMMANDS = {
    "sweep-training": "training_sweep",
    "sweep-inr": "inr_sweep",
    "sweep-snr": "snr_sweep",
    "contour": "contour",
    "approx-contour": "approx_contour",
    "sweep-antennas": "antenna_sweep",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdrelay",
        description="Seeded Monte-Carlo rate experiments for a full-duplex MIMO relay",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in _SUBCOMMANDS:
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="key=value or JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--out", help="output CSV path")
        sp.add_argument("--paper-scale", action="store_true",
                        help="use the full trial count and tau grid")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--sweep", help="comma-separated sweep values")
        sp.add_argument("--schemes", help="comma-separated scheme names")
        sp.add_argument("--tau-grid", help="comma-separated time shares")
        sp.add_argument("--rho-r-db", type=float)
        sp.add_argument("--rho-d-db", type=float)
        sp.add_argument("--eta-r-db", type=float)
        sp.add_argument("--eta-d-db", type=float)
        sp.add_argument("--kappa-db", type=float)
        sp.add_argument("--beta-db", type=float)
        sp.add_argument("--nt", type=int, help="transmit antennas per node")
        sp.add_argument("--mr", type=int, help="receive antennas per node")
        sp.add_argument("--train-len", type=int)
        sp.add_argument("--grid-rho-r-db", help="contour rho_r axis, comma-separated dB")
        sp.add_argument("--grid-eta-r-db", help="contour eta_r axis, comma-separated dB")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    mapping = {
        "seed": args.seed,
        "trials": args.trials,
        "out_path": args.out,
        "workers": args.workers,
        "sweep_values": args.sweep,
        "schemes": args.schemes,
        "tau_grid": args.tau_grid,
        "rho_r_db": args.rho_r_db,
        "rho_d_db": args.rho_d_db,
        "eta_r_db": args.eta_r_db,
        "eta_d_db": args.eta_d_db,
        "kappa_db": args.kappa_db,
        "beta_db": args.beta_db,
        "nt": args.nt,
        "mr": args.mr,
        "train_len": args.train_len,
        "grid_rho_r_db": args.grid_rho_r_db,
        "grid_eta_r_db": args.grid_eta_r_db,
    }
    return {k: v for k, v in mapping.items() if v is not None}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = _overrides(args)
    overrides["experiment"] = _SUBCOMMANDS[args.command]
    try:
        cfg = parse_config(args.config, overrides, paper_scale=args.paper_scale)
        if cfg.experiment == "approx_contour":
            means, rho_axis, eta_axis = contour_grid(cfg)
            emit_contour_csv(means, rho_axis, eta_axis, cfg.out_path, value_name="approx_rate")
        elif cfg.experiment == "contour":
            means, rho_axis, eta_axis = contour_grid(cfg)
            emit_contour_csv(means, rho_axis, eta_axis, cfg.out_path)
        else:
            records = run_experiment(cfg)
            emit_csv(records, cfg.out_path)
            _print_summary(records)
        write_metadata(cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {cfg.out_path}")
    return 0


def _print_summary(records) -> None:
    groups: dict = {}
    for r in records:
        groups.setdefault((r.sweep_value, r.scheme), []).append(r.rate_lower)
    for (sv, scheme), rates in sorted(groups.items()):
        print(f"sweep={sv:g} {scheme}: mean lower bound {np.mean(rates):.3f} bpcu "
              f"({len(rates)} trials)")


if __name__ == "__main__":
    sys.exit(main())
