"""Command-line interface: ``uvnlos sweep|validate|weights|presets``."""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, ScenarioConfig, parse_models, preset_names, preset_text, resolve_config
from .pathloss import Model, linspace_ranges, sweep
from .scatter import Branch, BoundaryApproximation, psi_limit, scatter_point, weight_field, exact_weights

EXIT_OK, EXIT_THRESHOLD, EXIT_CONFIG = 0, 1, 2
CSV_HEADER = ["r_m", "model", "Q_sca_J", "Q_ref_J", "L_dB", "err_dB", "error"]


def fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".9g")


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        res = row.result
        if res is None:
            w.writerow([fmt(row.r), row.model.value, "", "", "", "", row.error])
        else:
            w.writerow([fmt(row.r), row.model.value, fmt(res.q_sca), fmt(res.q_ref), fmt(res.l_db),
                        fmt(res.err_db), ""])
    return buf.getvalue()


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", required=True, help="scenario file or shipped preset name")
    p.add_argument("--rmin", type=float, help="shortest range (m)")
    p.add_argument("--rmax", type=float, help="longest range (m)")
    p.add_argument("--steps", type=int, help="number of ranges")
    p.add_argument("--models", help="comma-separated subset of analytic_approx,analytic_exact,mcpt")
    p.add_argument("--photons", type=int, help="MCPT photon count")
    p.add_argument("--seed", type=int, help="MCPT seed (unsigned 64-bit)")
    p.add_argument("--workers", type=int, help="MCPT worker processes")
    p.add_argument("--no-obstacle", action="store_true", help="drop the obstacle from the scene")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--plot", help="also render a figure to this file (format from extension)")


def _setup(args):
    """Config, ranges, models and settings with flag overrides applied."""
    cfg = resolve_config(args.config)
    ranges = cfg.ranges()
    rmin = args.rmin if args.rmin is not None else ranges[0]
    rmax = args.rmax if args.rmax is not None else ranges[-1]
    steps = args.steps if args.steps is not None else len(ranges)
    ranges = linspace_ranges(rmin, rmax, steps)
    models = parse_models(args.models) if args.models else cfg.models()
    settings = cfg.settings()
    mc = settings.mcpt
    overrides = {k: v for k, v in (("n_photons", args.photons), ("seed", args.seed),
                                   ("workers", args.workers)) if v is not None}
    if overrides:
        settings = replace(settings, mcpt=replace(mc, **overrides))
    return cfg, ranges, models, settings


def _scene_factory(cfg: ScenarioConfig, obstacle: bool):
    return lambda r: cfg.scene(r, obstacle=obstacle)


def cmd_sweep(args) -> int:
    cfg, ranges, models, settings = _setup(args)
    rows = sweep(_scene_factory(cfg, not args.no_obstacle), ranges, models, settings)
    _emit(rows_to_csv(rows), args.out)
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(rows, args.plot, title=args.config)
    return EXIT_OK


def compare(rows, thresholds: dict[str, float]):
    """Per-range deltas and pass/fail checks for a validation sweep.

    Returns ``(lines, deltas, ok)``; ``deltas`` maps a label to ``(r, d)``.
    """
    by = {}
    for row in rows:
        by.setdefault(row.model, {})[row.r] = row
    lines, deltas, ok = [], {}, True
    errors = [row for row in rows if row.result is None]
    for row in errors:
        lines.append(f"ERROR r={fmt(row.r)} {row.model.value}: {row.error}")
        ok = False

    def pairs(a, b):
        for r in sorted(set(by.get(a, {})) & set(by.get(b, {}))):
            ra, rb = by[a][r].result, by[b][r].result
            if ra is not None and rb is not None:
                yield r, ra, rb

    if Model.ANALYTIC_APPROX in by and Model.ANALYTIC_EXACT in by:
        lim = thresholds["threshold_db"]
        pts = list(pairs(Model.ANALYTIC_APPROX, Model.ANALYTIC_EXACT))
        d = [ra.l_db - rb.l_db for _, ra, rb in pts]
        deltas["approx - exact"] = ([r for r, _, _ in pts], d)
        for (r, _, _), x in zip(pts, d):
            lines.append(f"r={fmt(r)} approx-exact {x:+.3f} dB")
        worst = max((abs(x) for x in d), default=0.0)
        passed = worst <= lim
        ok &= passed
        lines.append(f"{'PASS' if passed else 'FAIL'} max |approx - exact| = {worst:.3f} dB (limit {lim:g} dB)")
    ref = Model.ANALYTIC_APPROX if Model.ANALYTIC_APPROX in by else Model.ANALYTIC_EXACT
    if Model.MCPT in by and ref in by:
        pts = list(pairs(ref, Model.MCPT))
        d = [ra.l_db - rb.l_db for _, ra, rb in pts]
        deltas[f"{ref.value.split('_')[1]} - mcpt"] = ([r for r, _, _ in pts], d)
        all_ok = True
        for (r, _, rb), x in zip(pts, d):
            sigma = rb.err_db or 0.0
            lim = max(thresholds["mc_sigma"] * sigma, thresholds["mc_floor_db"])
            good = abs(x) <= lim
            all_ok &= good
            lines.append(f"r={fmt(r)} {ref.value}-mcpt {x:+.3f} dB (sigma {sigma:.3f}, limit {lim:.3f}) "
                         f"{'ok' if good else 'FAIL'}")
        worst = max((abs(x) for x in d), default=0.0)
        lines.append(f"{'PASS' if all_ok else 'FAIL'} max |{ref.value} - mcpt| = {worst:.3f} dB")
        ok &= all_ok
    return lines, deltas, ok


def cmd_validate(args) -> int:
    cfg, ranges, models, settings = _setup(args)
    if not args.models:
        models = list(Model)
    thresholds = cfg.validate_thresholds()
    if args.threshold_db is not None:
        thresholds["threshold_db"] = args.threshold_db
    rows = sweep(_scene_factory(cfg, not args.no_obstacle), ranges, models, settings)
    lines, deltas, ok = compare(rows, thresholds)
    if settings.scatter_only:
        lines.insert(0, "scattered energy only")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        _emit(rows_to_csv(rows), args.out)
    if args.plot:
        from .plotting import plot_validation

        plot_validation(rows, deltas, args.plot, title=args.config)
    return EXIT_OK if ok else EXIT_THRESHOLD


def weights_table(cfg: ScenarioConfig, r: float, n_theta: int, n_psi: int, n_nu: int) -> str:
    """Weighting factor, its exact counterpart and the decision branch on a
    coarse (theta, psi, nu) grid."""
    scene = cfg.scene(r)
    g, obs = scene.geom, scene.obstacle
    approx = BoundaryApproximation(g, obs) if obs is not None else None
    b = g.rx_half_fov
    thetas = -b + (np.arange(n_theta) + 0.5) * 2 * b / n_theta
    nus = np.geomspace(1.0, 4.0 * r, n_nu)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta_rad", "psi_rad", "nu_m", "x_m", "y_m", "z_m", "s_wei", "exact", "branch"])
    for th in thetas:
        pm = float(psi_limit(th, b))
        psis = -pm + (np.arange(n_psi) + 0.5) * 2 * pm / n_psi
        P = scatter_point(nus[None, :], psis[:, None], th, g).reshape(-1, 3)
        vals, branch = weight_field(P, th, g, obs, approx)
        exact = exact_weights(P, g, obs)
        grid_psi = np.repeat(psis, n_nu)
        grid_nu = np.tile(nus, n_psi)
        for k in range(len(P)):
            w.writerow([fmt(th), fmt(grid_psi[k]), fmt(grid_nu[k]), fmt(P[k, 0]), fmt(P[k, 1]), fmt(P[k, 2]),
                        int(vals[k]), int(exact[k]), Branch(int(branch[k])).name])
    return buf.getvalue()


def cmd_weights(args) -> int:
    cfg = resolve_config(args.config)
    r = args.r if args.r is not None else cfg.default_range
    _emit(weights_table(cfg, r, args.n_theta, args.n_psi, args.n_nu), args.out)
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.action == "list":
        for name in preset_names():
            first = preset_text(name).splitlines()[0].lstrip("# ").strip()
            print(f"{name}\t{first}")
    else:
        sys.stdout.write(preset_text(args.name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uvnlos", description="NLoS UV path loss with prism obstacles")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="path loss against range as CSV")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="compare the analytic models and MCPT")
    _add_common(p)
    p.add_argument("--threshold-db", type=float, help="limit on max |approx - exact| (dB)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("weights", help="dump the weighting factor on a grid")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--r", type=float, help="link range (m); defaults to [link] range")
    p.add_argument("--n-theta", type=int, default=8)
    p.add_argument("--n-psi", type=int, default=8)
    p.add_argument("--n-nu", type=int, default=32)
    p.add_argument("--out")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("presets", help="list or print shipped scenario files")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "action", None) == "show" and not args.name:
        parser.error("presets show needs a preset name")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"uvnlos: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
