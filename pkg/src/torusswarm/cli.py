"""Command line interface: run trials, sweep batches, evaluate gain bounds.

Exit codes: 0 success, 2 configuration problem, 3 numerical failure or
no valid guarantee for the requested gains.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import __version__
from . import bounds as bounds_mod
from ._accel import active_backend_name
from .config import _PARSERS, TrialConfig, load_config
from .errors import (ConfigError, InvalidParameter, MassMismatchError,
                     NoGuarantee, NumericalFault, StepRejected)
from .experiments import preflight_cfl, run_sweep, run_trial
from .grid import GridSpec
from .kernels import KernelSpec, TargetDensitySpec
from .micro import DisturbanceSpec


def _apply_overrides(cfg: TrialConfig, pairs) -> TrialConfig:
    updates = {}
    for pair in pairs or ():
        key, sep, raw = pair.partition("=")
        key = key.strip()
        if not sep or key not in _PARSERS:
            raise ConfigError(f"bad override {pair!r}; expected key=value "
                              f"with a known key")
        try:
            updates[key] = _PARSERS[key](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"bad override value for {key}: {exc}") from exc
    return cfg.with_updates(**updates) if updates else cfg


def _resolve_out(arg_out, default_name: str) -> Path:
    if arg_out:
        return Path(arg_out)
    root = os.environ.get("TORUSSWARM_OUTDIR")
    if root:
        return Path(root) / default_name
    return Path(default_name)


def _load(args) -> TrialConfig:
    cfg = load_config(args.config)
    return _apply_overrides(cfg, getattr(args, "set", None))


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = _resolve_out(args.out, "run_out")
    est = preflight_cfl(cfg)
    print(f"backend: {active_backend_name(cfg.backend)}")
    print(f"preflight Courant estimate: {est:.4g}")
    result = run_trial(cfg, out_dir=out)
    last = -1
    for label, series, pct in (("agents", result.err2_disc, result.ebar_disc),
                               ("continuum", result.err2_cont, result.ebar_cont)):
        if math.isfinite(series[last]):
            print(f"{label:>10s}: final error {series[last]:.6g} "
                  f"({pct[last]:.3g}% of peak)")
    if result.bounds is not None and result.bounds.disturbance is not None:
        d = result.bounds.disturbance
        print(f"predicted limsup {d.predicted_limsup:.6g}, "
              f"observed {result.observed_limsup():.6g}")
    print(f"max Courant number: {result.cfl.max():.4g}")
    print(f"outputs in {out}")
    return 0


def _cmd_sweep(args) -> int:
    out = _resolve_out(args.out, "sweep_out")
    items = []
    for path in args.configs:
        cfg = load_config(path)
        items.append((Path(path).stem, cfg))
    names = [n for n, _ in items]
    if len(set(names)) != len(names):
        raise ConfigError("sweep config file names must be unique")
    rows = run_sweep(items, out, max_workers=args.workers)
    failures = [r for r in rows if r[-1] != "ok"]
    for row in rows:
        print(f"{row[0]}: {row[-1]}")
    print(f"summary in {out / 'sweep.csv'}")
    return 3 if failures else 0


def _cmd_bounds(args) -> int:
    cfg = _load(args)
    grid = GridSpec(cfg.d, cfg.cells)
    kernel = KernelSpec(strength=cfg.kernel_strength,
                        length_scale=cfg.kernel_length_scale,
                        sensing_radius=cfg.sensing_radius,
                        family=cfg.kernel_family)
    center = (cfg.target_center_x1, cfg.target_center_x2)[: cfg.d]
    target = TargetDensitySpec(concentration=cfg.target_concentration,
                               center=center, mass=cfg.mass)
    disturbance = None
    if cfg.disturbance_amplitude:
        disturbance = DisturbanceSpec(amplitude=cfg.disturbance_amplitude,
                                      onset=cfg.onset_time)
    report = bounds_mod.bounds_report(kernel, target, grid, cfg.kp,
                                      disturbance=disturbance)
    print(bounds_mod.format_report(report))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        bounds_mod.write_bounds_csv(report, out / "bounds.csv")
        print(f"wrote {out / 'bounds.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusswarm",
        description="Co-simulation laboratory for density-feedback swarm "
                    "control on a periodic domain.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one co-simulation trial")
    p_run.add_argument("--config", required=True, help="trial config file")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a batch of trials")
    p_sweep.add_argument("--configs", required=True, nargs="+",
                         help="trial config files, one per sweep point")
    p_sweep.add_argument("--out", default=None, help="output directory")
    p_sweep.add_argument("--workers", type=int, default=4)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_bounds = sub.add_parser(
        "bounds", help="evaluate stability constants and gain thresholds")
    p_bounds.add_argument("--config", required=True, help="trial config file")
    p_bounds.add_argument("--out", default=None, help="output directory")
    p_bounds.add_argument("--set", action="append", metavar="KEY=VALUE",
                          help="override a config key (repeatable)")
    p_bounds.set_defaults(func=_cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidParameter) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFault, StepRejected, NoGuarantee,
            MassMismatchError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
