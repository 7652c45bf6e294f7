"""Command-line front end: single points, sweeps, perturbation-oracle
reports, and config validation.

Exit codes: 0 success, 1 runtime failure in a transmission stage, 2 bad
usage or config.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .coding import qpsk_map
from .harness import (
    ExperimentConfig,
    StageError,
    default_config,
    load_config,
    run_point,
    run_sweep,
    scaled_config,
)
from .perturbation import LinkProfile, anti_correlation_check, eta, first_order_distortion

_ORACLE_BINS = 64
_ORACLE_SEED = 509
_ETA_GRID_POINTS = 41


def _load(config_arg: str) -> ExperimentConfig:
    """A path, or one of the preset names 'default' / 'scaled'."""
    if config_arg == "default":
        return default_config()
    if config_arg == "scaled":
        return scaled_config()
    return load_config(config_arg)


def _cmd_run(args) -> int:
    cfg = _load(args.config)
    if args.dump_stages is not None:
        stages = tuple(s.strip() for s in args.dump_stages.split(",") if s.strip())
        cfg = replace(cfg, dump_stages=stages)
        cfg.validate()
    scheme = args.scheme if args.scheme is not None else cfg.schemes[0]
    power = args.power if args.power is not None else cfg.launch_dbm[0]
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    out = args.out
    if out is None and cfg.dump_stages:
        out = cfg.out_dir
    record = run_point(cfg, scheme, power, seed, out_dir=out)
    print(f"{record.scheme} pre_edc={record.pre_edc:g} "
          f"{record.launch_dbm:+.1f} dBm seed={record.seed}: "
          f"ber={record.ber:.3e} ({record.n_errors}/{record.n_bits}) "
          f"q_db={record.q_db:.2f} evm={record.evm:.4f}")
    if record.low_confidence:
        print("warning: fewer than 100 errors counted, ber estimate is noisy",
              file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args.config)
    records, failures = run_sweep(cfg, out_dir=args.out)
    out_dir = Path(args.out if args.out is not None else cfg.out_dir)
    print(f"{len(records)} points written to {out_dir / 'results.csv'}")
    for scheme, power, seed, message in failures:
        print(f"failed: {scheme} {power:+.1f} dBm seed={seed}: {message}",
              file=sys.stderr)
    return 1 if failures else 0


def _cmd_oracle(args) -> int:
    """First-order perturbation reports: the nonlinear transfer function on a
    frequency grid, and the conjugate-twin anti-correlation figures."""
    cfg = _load(args.config)
    link = cfg.link_config(cfg.launch_dbm[0])
    profile = LinkProfile.from_link(link)
    out_dir = Path(args.out if args.out is not None else cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    w_max = np.pi * cfg.occupied_bandwidth()
    w = np.linspace(-w_max, w_max, _ETA_GRID_POINTS)
    grid = eta(w[:, None], w[None, :], profile)
    grid_path = out_dir / "eta_grid.csv"
    with open(grid_path, "w") as fh:
        fh.write("w1,w2,re,im\n")
        for i, w1 in enumerate(w):
            for j, w2 in enumerate(w):
                fh.write(f"{float(w1)!r},{float(w2)!r},"
                         f"{float(grid[i, j].real)!r},{float(grid[i, j].imag)!r}\n")

    rng = np.random.default_rng(_ORACLE_SEED)
    vx = qpsk_map(rng.integers(0, 2, size=2 * _ORACLE_BINS)) / np.sqrt(2.0)
    vy = np.conj(vx)
    field = first_order_distortion(vx, vy, cfg.sample_rate, profile,
                                   cfg.fiber_params())
    corr, residual = anti_correlation_check(field.delta_x, field.delta_y)

    summary = {
        "eta_grid": grid_path.name,
        "eta_grid_points": _ETA_GRID_POINTS,
        "w_max": w_max,
        "n_bins": _ORACLE_BINS,
        "twin_corr_re": corr.real,
        "twin_corr_im": corr.imag,
        "twin_residual": residual,
        "antisymmetry_defect": profile.antisymmetry_defect(),
    }
    (out_dir / "oracle_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"eta grid: {grid_path}")
    print(f"twin anti-correlation: corr={corr.real:.6f}{corr.imag:+.2e}j "
          f"residual={residual:.3e} "
          f"antisymmetry_defect={summary['antisymmetry_defect']:.3e}")
    return 0


def _cmd_validate(args) -> int:
    cfg = _load(args.config)
    cfg.validate()
    layout_bins = cfg.n_data + cfg.n_pilots
    print(f"config ok: {len(cfg.schemes)} scheme(s), "
          f"{cfg.n_spans}x{cfg.span_length_km:g} km, "
          f"{cfg.fft_size}-FFT with {layout_bins} occupied bins, "
          f"{len(cfg.launch_dbm)} power(s) x {len(cfg.seeds)} seed(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim", description="Coherent optical OFDM link simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", required=True,
                       help="config file path, or preset name 'default'/'scaled'")

    run = sub.add_parser("run", help="run a single transmission point")
    add_config(run)
    run.add_argument("--scheme", help="coding scheme (default: first in config)")
    run.add_argument("--power", type=float,
                     help="launch power in dBm (default: first in config)")
    run.add_argument("--seed", type=int, help="payload seed (default: first in config)")
    run.add_argument("--dump-stages",
                     help="comma-separated receiver stages to dump "
                          "(overrides the config list)")
    run.add_argument("--out", help="directory for constellation dumps")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="run every (scheme, power, seed) point")
    add_config(sweep)
    sweep.add_argument("--out", help="output directory (default: config out_dir)")
    sweep.set_defaults(func=_cmd_sweep)

    oracle = sub.add_parser("oracle", help="write perturbation-oracle reports")
    add_config(oracle)
    oracle.add_argument("--out", help="output directory (default: config out_dir)")
    oracle.set_defaults(func=_cmd_oracle)

    validate = sub.add_parser("validate", help="check a config without running")
    add_config(validate)
    validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
