"""Batch experiment runner.

Commands:

    simulate   one trajectory; per-step probe heights to CSV
    ensemble   replica ensemble; normalized variance / pair gap / tail /
               exponential-moment rows with verdicts
    verify     hard verification suites (driving | walk | oracles | all);
               exit 0 only if every check passes
    sweep      trend table across a horizon grid (observational verdicts)

Exit codes: 0 all pass, 1 assertion failure, 2 configuration error.
Every CSV is reproducible from its sidecar metadata (full config echo,
seed, backend); output files are written atomically.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import ConfigError, ExperimentConfig, load_config
from .engine import SimulationPlan, run_ensemble, simulate
from .estimators import (check_beta_le_alpha, estimate_alpha, estimate_beta,
                         mgf_check, superconcentration_trend, tail_exceedance)
from .lattice import SiteCoord

CSV_FIELDS = ["model", "d", "t", "L", "quantity", "offset_b", "estimate",
              "se", "bound", "verdict", "n", "seed", "version"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(float(x))  # shortest round-trip form, plain-float repr
    return str(x)


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _git_hash() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        return out.stdout.strip() or None
    except Exception:
        return None


def _write_outputs(out_dir: Path, stem: str, rows: list[dict], cfg: ExperimentConfig,
                   command: str, wall_seconds: float,
                   fieldnames: list[str] | None = None) -> Path:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames or CSV_FIELDS)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    csv_path = out_dir / f"{stem}.csv"
    _atomic_write(csv_path, buf.getvalue())
    meta = {
        "command": command,
        "config": cfg.as_dict(),
        "version": __version__,
        "backend": _kernels.backend_name(),
        "git_hash": _git_hash(),
        "wall_seconds": wall_seconds,
    }
    _atomic_write(out_dir / f"{stem}.meta.json", json.dumps(meta, indent=2) + "\n")
    return csv_path


def _offset_label(offset) -> str:
    return "_".join(str(c) for c in offset)


def _probe_layout(cfg: ExperimentConfig):
    """Origin first, then each pair offset, then extra probes; pairs are
    (origin, b) for each configured difference offset."""
    origin = tuple(0 for _ in range(cfg.d))
    probes = [origin]
    for b in cfg.diff_offsets:
        tb = tuple(b)
        if tb not in probes:
            probes.append(tb)
    for p in cfg.probe_offsets:
        tp = tuple(p)
        if tp not in probes:
            probes.append(tp)
    pairs = tuple((0, probes.index(tuple(b))) for b in cfg.diff_offsets)
    return tuple(probes), pairs


def cmd_simulate(cfg: ExperimentConfig, quiet: bool) -> int:
    cfg.validate()
    t_max = max(cfg.t_list)
    probes, _ = _probe_layout(cfg)
    plan = SimulationPlan(model=cfg.build_model(), t_max=t_max, seed=cfg.seed,
                          replica=cfg.replica, probes=probes,
                          retain_trajectory=cfg.retain_trajectory)
    start = time.perf_counter()
    result = simulate(plan)
    noise = plan.noise_field()
    fieldnames = (["t"]
                  + [f"h_{_offset_label(p)}" for p in probes]
                  + [f"z_{_offset_label(p)}" for p in probes])
    rows = []
    for t in range(t_max + 1):
        row = {"t": t}
        for k, p in enumerate(probes):
            row[f"h_{_offset_label(p)}"] = float(result.probe_series[t, k])
            if t >= 1:
                row[f"z_{_offset_label(p)}"] = noise.gaussian_at(SiteCoord(t=t, x=p))
            else:
                row[f"z_{_offset_label(p)}"] = None
        rows.append(row)
    wall = time.perf_counter() - start
    path = _write_outputs(Path(cfg.out_dir), "simulate", rows, cfg, "simulate",
                          wall, fieldnames=fieldnames)
    if not quiet:
        print(f"wrote {path} ({t_max + 1} steps, {len(probes)} probes, {wall:.2f}s)")
    return 0


def _ensemble_rows(cfg: ExperimentConfig, t: int) -> list[dict]:
    model = cfg.build_model()
    L = model.lipschitz_L
    probes, pairs = _probe_layout(cfg)
    origin = probes[0]
    plan = SimulationPlan(model=model, t_max=t, seed=cfg.seed, probes=probes,
                          pairs=pairs)
    res = run_ensemble(plan, cfg.n_replicas, cfg.parallelism)
    common = {"model": cfg.model, "d": cfg.d, "t": t, "L": L,
              "n": cfg.n_replicas, "seed": cfg.seed, "version": __version__}
    rows = []
    alpha = estimate_alpha(res.probe_stats[origin], L, t)
    rows.append(common | {
        "quantity": "alpha", "offset_b": "", "estimate": alpha.alpha_hat,
        "se": alpha.se, "bound": 1.0,
        "verdict": "PASS" if alpha.alpha_hat <= 1.0 + 5.0 * alpha.se else "FLAG"})
    for b in cfg.diff_offsets:
        tb = tuple(b)
        pair = res.pair_stats[(origin, tb)]
        beta = estimate_beta(pair, L, t, tb)
        comp = check_beta_le_alpha(alpha, beta, se_mult=cfg.tol_pair_se)
        rows.append(common | {
            "quantity": "beta", "offset_b": _offset_label(tb),
            "estimate": beta.beta_hat, "se": beta.se, "bound": alpha.alpha_hat,
            "verdict": "PASS" if comp.passed else "FLAG"})
        rows.append(common | {
            "quantity": "inv_log_beta", "offset_b": _offset_label(tb),
            "estimate": comp.inv_log_beta, "se": None, "bound": None,
            "verdict": "OBSERVE"})
        gaps = np.abs(pair.values)
        rows.append(common | {
            "quantity": "mean_abs_gap", "offset_b": _offset_label(tb),
            "estimate": float(gaps.mean()),
            "se": float(gaps.std(ddof=1)) / (pair.n ** 0.5),
            "bound": None, "verdict": "OBSERVE"})
    r_list = [f * L * (t ** 0.5) for f in cfg.tail_r_factors]
    for chk in tail_exceedance(res.probe_stats[origin], r_list, L, t,
                               se_mult=cfg.tol_tail_se):
        rows.append(common | {
            "quantity": f"tail@{chk.r:g}", "offset_b": "",
            "estimate": chk.frequency, "se": chk.se, "bound": chk.bound,
            "verdict": "PASS" if chk.passed else "FLAG"})
    thetas = [f / (L * (t ** 0.5)) for f in cfg.mgf_theta_factors]
    for chk in mgf_check(res.probe_stats[origin], thetas, L, t,
                         se_mult=cfg.tol_mgf_se):
        rows.append(common | {
            "quantity": f"mgf@{chk.theta:.6g}", "offset_b": "",
            "estimate": chk.estimate, "se": chk.se, "bound": chk.bound,
            "verdict": "PASS" if chk.passed else "FLAG"})
    return rows


def cmd_ensemble(cfg: ExperimentConfig, quiet: bool) -> int:
    cfg.validate(statistical=True)
    if any(t < 1 for t in cfg.t_list):
        raise ConfigError("ensemble horizons must be >= 1")
    start = time.perf_counter()
    rows = []
    for t in cfg.t_list:
        rows.extend(_ensemble_rows(cfg, t))
    wall = time.perf_counter() - start
    path = _write_outputs(Path(cfg.out_dir), "ensemble", rows, cfg, "ensemble", wall)
    flagged = [r for r in rows if r["verdict"] == "FLAG"]
    if not quiet:
        print(f"wrote {path} ({len(rows)} rows, {len(flagged)} flagged, {wall:.2f}s)")
        for r in flagged:
            print(f"  FLAG {r['quantity']} t={r['t']}: estimate {r['estimate']:.6g} "
                  f"vs bound {r['bound']:.6g}")
    return 0


def cmd_sweep(cfg: ExperimentConfig, quiet: bool) -> int:
    cfg.validate(statistical=True)
    if len(cfg.t_list) < 3:
        raise ConfigError("sweep needs at least 3 horizons in t_list")
    b = tuple(cfg.diff_offsets[0])
    start = time.perf_counter()
    table = superconcentration_trend(cfg.build_model(), cfg.t_list, cfg.n_replicas,
                                     b=b, seed=cfg.seed, parallelism=cfg.parallelism)
    rows = []
    common = {"model": cfg.model, "d": cfg.d, "L": table.rows[0].alpha.L,
              "n": cfg.n_replicas, "seed": cfg.seed, "version": __version__}
    for tr in table.rows:
        rows.append(common | {"t": tr.t, "quantity": "alpha", "offset_b": "",
                              "estimate": tr.alpha.alpha_hat, "se": tr.alpha.se,
                              "bound": None, "verdict": "OBSERVE"})
        rows.append(common | {"t": tr.t, "quantity": "beta",
                              "offset_b": _offset_label(b),
                              "estimate": tr.beta.beta_hat, "se": tr.beta.se,
                              "bound": None, "verdict": "OBSERVE"})
        rows.append(common | {"t": tr.t, "quantity": "mean_abs_gap",
                              "offset_b": _offset_label(b),
                              "estimate": tr.mean_abs_gap, "se": tr.mean_abs_gap_se,
                              "bound": None, "verdict": "OBSERVE"})
    for name, (slope, slope_se) in table.slopes.items():
        rows.append(common | {"t": None, "quantity": f"slope:{name}",
                              "offset_b": "", "estimate": slope, "se": slope_se,
                              "bound": None, "verdict": "OBSERVE"})
    wall = time.perf_counter() - start
    path = _write_outputs(Path(cfg.out_dir), "sweep", rows, cfg, "sweep", wall)
    if not quiet:
        print(f"wrote {path} ({wall:.2f}s)")
        print(f"  alpha decreasing beyond 3 SE: {table.alpha_decreasing()}")
        print(f"  beta  decreasing beyond 3 SE: {table.beta_decreasing()}")
        for name, (slope, slope_se) in table.slopes.items():
            print(f"  log-log slope {name}: {slope:+.3f} (se {slope_se:.3f})")
    return 0


def cmd_verify(which: str, *, seed: int, quick: bool, include_broken: bool,
               quiet: bool, out_dir: str | None = None) -> int:
    from .verify import run_suite, walk_derivative_records

    results = run_suite(which, seed=seed, quick=quick, include_broken=include_broken)
    failed = [r for r in results if not r.passed]
    if not quiet:
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            print(f"{status} {r.name} (margin {r.margin:+.3e}) {r.detail}")
        print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if out_dir is not None and which in ("walk", "all"):
        records = walk_derivative_records(seed=seed + 1,
                                          n_seeds=5 if quick else 20)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["seed", "s", "y", "walk_value", "fd_value", "relative_error"])
        for run_seed, rec in records:
            s, y = rec.site
            writer.writerow([run_seed, s, _offset_label(y), _fmt(rec.walk_value),
                             _fmt(rec.fd_value), _fmt(rec.relative_error)])
        path = Path(out_dir) / "walk_records.csv"
        _atomic_write(path, buf.getvalue())
        if not quiet:
            print(f"wrote {path} ({len(records)} derivative records)")
    if failed:
        for r in failed:
            print(f"FAILED: {r.name}: {r.detail}", file=sys.stderr)
        return 1
    return 0


def _add_common(p: argparse.ArgumentParser, suppress: bool) -> None:
    # suppress=True keeps subcommand-position flags from clobbering values
    # already parsed at the top level
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", type=str, default=d, help="key = value config file")
    p.add_argument("--seed", type=int, default=d, help="override the noise seed")
    p.add_argument("--out", type=str, default=d, help="override the output directory")
    p.add_argument("--parallelism", type=int, default=d, help="worker threads")
    p.add_argument("--quiet", action="store_true",
                   default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="growthlab",
        description="Growing-random-surface simulation and verification laboratory")
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [("simulate", "single-trajectory height dump"),
                            ("ensemble", "replica ensemble with verdict rows"),
                            ("sweep", "trend table across t_list")]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p, suppress=True)
    ver = sub.add_parser("verify", help="hard verification suites")
    _add_common(ver, suppress=True)
    ver.add_argument("--which", choices=["driving", "walk", "oracles", "all"],
                     default="all")
    ver.add_argument("--quick", action="store_true",
                     help="reduced sample counts (smoke profile)")
    ver.add_argument("--inject-broken", action="store_true",
                     help="include a deliberately defective rule (must fail)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "out_dir": args.out,
                 "parallelism": args.parallelism}
    try:
        cfg = load_config(args.config, overrides=overrides)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.quiet)
        if args.command == "ensemble":
            return cmd_ensemble(cfg, args.quiet)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.quiet)
        if args.command == "verify":
            return cmd_verify(args.which, seed=cfg.seed, quick=args.quick,
                              include_broken=args.inject_broken, quiet=args.quiet,
                              out_dir=args.out)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
