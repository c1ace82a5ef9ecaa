"""Command-line interface: ``hopfbounds <subcommand> ...``.

Single runs print a JSON report; ``sweep`` writes a CSV. Exit codes are
0 on success, 1 for invalid input and 2 when an internal consistency
check fails.
"""
from __future__ import annotations

import argparse
import csv
import enum
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import billiard as bl
from . import conformal as cm
from . import geodesic_bounds as gb
from . import geodesic_sim as gs
from .billiard_bounds import TOL_ISO, bounds_for_curve
from .curves import (DEFAULT_SAMPLES, TOL_GB, build_curve, curve_invariants, load_curve_spec,
                     spec_from_dict)
from .errors import ConsistencyError, HopfBoundsError, ValidationError
from .sampling import CHUNK_SIZE, RNG_ALGORITHM
from .verify import TOLERANCES, billiard_identities

SCHEMA_VERSION = "1.0"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _digest(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, enum.Enum):
        return obj.name.lower()
    return obj


def _report(command, inputs, outputs, started, tolerances, rng=None) -> dict:
    return {"schema_version": SCHEMA_VERSION, "version": __version__, "command": command,
            "inputs": inputs, "outputs": outputs,
            "timing": {"wall_seconds": time.perf_counter() - started},
            "rng": rng, "tolerances": tolerances}


def _curve(args):
    spec, raw = load_curve_spec(args.spec)
    n = args.samples_curve or int(raw.get("samples", DEFAULT_SAMPLES))
    c = build_curve(spec, n, args.tol_gb)
    inputs = {"spec": str(args.spec), "spec_sha256": _digest(raw), "spec_data": raw,
              "curve_samples": n}
    return c, inputs


def _metric(args):
    p, raw = cm.load_metric_spec(args.metric)
    return p, {"metric": str(args.metric), "metric_sha256": _digest(raw), "metric_data": raw}


def _curve_tols(args) -> dict:
    return {"tol_gb": args.tol_gb, "tol_iso": TOL_ISO}


# ---------------------------------------------------------------------------
# subcommands

def cmd_curve_info(args, started):
    c, inputs = _curve(args)
    out = curve_invariants(c)
    out.update(surface=c.kind, in_hemisphere=c.in_hemisphere, horocyclic=c.horocyclic)
    return _report("curve-info", inputs, out, started, _curve_tols(args))


def cmd_billiard_bound(args, started):
    c, inputs = _curve(args)
    return _report("billiard-bound", inputs, bounds_for_curve(c).to_dict(), started,
                   _curve_tols(args))


def cmd_billiard_delta(args, started):
    c, inputs = _curve(args)
    est = bl.estimate_delta_billiard(c, args.window, args.samples, args.seed, args.workers)
    bounds = bounds_for_curve(c)
    out = {"estimate": est.to_dict(), "bounds": bounds.present(), "best_bound": bounds.best,
           "consistent": est.delta_hat >= bounds.best - 2 * est.stderr}
    inputs.update(window=args.window, samples=args.samples, seed=args.seed,
                  chunk_size=CHUNK_SIZE)
    return _report("billiard-delta", inputs, out, started, _curve_tols(args), RNG_ALGORITHM)


def cmd_billiard_verify(args, started):
    c, inputs = _curve(args)
    table = billiard_identities(c, args.samples, args.seed, args.workers, args.chords)
    inputs.update(samples=args.samples, seed=args.seed, chords=args.chords)
    report = _report("billiard-verify", inputs, table, started,
                     dict(_curve_tols(args), **TOLERANCES), RNG_ALGORITHM)
    failed = [k for k, v in table.items() if not v["ok"]]
    if failed:
        args._partial = report
        worst = failed[0]
        raise ConsistencyError(f"identity {worst} failed: residual {table[worst]['residual']:.3e}",
                               residual=table[worst]["residual"])
    return report


def cmd_torus_curvature(args, started):
    p, inputs = _metric(args)
    field = cm.eval_field(p, args.grid)
    curv = cm.curvature(field)
    out = cm.field_norms(curv)
    out["f_min"], out["f_max"] = cm.f_range(p, args.grid)
    if p.n == 2:
        out["total_curvature"] = cm.total_curvature(curv)
        out["K_min"] = float(curv.K.min())
        out["K_max"] = float(curv.K.max())
    else:
        out["trace_residual"] = curv.trace_residual
        out["scal_min"] = float(curv.Scal.min())
        out["scal_max"] = float(curv.Scal.max())
    inputs["grid"] = args.grid
    return _report("torus-curvature", inputs, out, started,
                   {"pos_margin": cm.POS_MARGIN, "trace_tol": cm.TRACE_TOL})


def _parse_scan(text: str):
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise ValidationError("--alpha-scan expects LO:HI:STEPS") from None
    if steps < 1 or hi < lo:
        raise ValidationError("--alpha-scan needs STEPS >= 1 and HI >= LO")
    return np.linspace(lo, hi, steps)


def cmd_torus_bound(args, started):
    p, inputs = _metric(args)
    field = cm.eval_field(p, args.grid)
    curv = cm.curvature(field)
    inputs["grid"] = args.grid
    if args.alpha is not None:
        rep = gb.bound_theorem2(field, curv, gb.Power(args.alpha))
        inputs["alpha"] = args.alpha
        out = rep.to_dict()
    else:
        alphas = _parse_scan(args.alpha_scan)
        a_star, d_star, reps = gb.optimize_alpha(field, curv, alphas)
        inputs["alpha_scan"] = args.alpha_scan
        out = {"alpha_star": a_star, "delta_lb_star": d_star,
               "scan": [r.to_dict() for r in reps]}
    return _report("torus-bound", inputs, out, started, {"pos_margin": cm.POS_MARGIN})


def cmd_torus_delta(args, started):
    p, inputs = _metric(args)
    ests = gs.estimate_delta_horizons(p, args.horizon, args.samples, args.seed, args.workers,
                                      args.tol)
    field = cm.eval_field(p, args.grid)
    bound = gb.bound_theorem2(field, cm.curvature(field), gb.Power(args.alpha))
    out = {"estimates": [e.to_dict() for e in ests], "delta_lb": bound.delta_lb,
           "alpha": args.alpha,
           "consistent": ests[-1].delta_hat >= bound.delta_lb - 2 * ests[-1].stderr}
    inputs.update(horizon=args.horizon, samples=args.samples, seed=args.seed, grid=args.grid,
                  chunk_size=CHUNK_SIZE)
    return _report("torus-delta", inputs, out, started, {"integrator_tol": args.tol},
                   RNG_ALGORITHM)


# ---------------------------------------------------------------------------
# sweeps

BILLIARD_COLUMNS = ["label", "surface", "P", "A", "k_min", "defect", "b2_strong", "b2_weak",
                    "b1", "b3", "b4", "best", "delta_hat", "stderr", "window", "samples", "seed"]
TORUS_COLUMNS = ["label", "alpha", "delta_lb", "capital_psi_integral", "curv_sup", "psi_sup",
                 "vol_g", "grid"]


def _sweep_specs(cfg):
    family = cfg.get("family")
    if family == "ellipse":
        b = float(cfg.get("b", 1.0))
        return [(f"ellipse a={a:g} b={b:g}", {"type": "ellipse", "a": a, "b": b})
                for a in cfg["a"]]
    if family == "support_fourier":
        m = int(cfg.get("m", 3))
        return [(f"support c0={cfg.get('c0', 1.0):g} m={m} eps={e:g}",
                 {"type": "support_fourier", "c0": cfg.get("c0", 1.0),
                  "harmonics": [{"m": m, "a": e, "b": 0.0}]}) for e in cfg["eps"]]
    if family == "specs":
        return [(d.get("label", f"spec {i}"), d) for i, d in enumerate(cfg["specs"])]
    raise ValidationError(f"unknown sweep family {family!r}")


def _billiard_rows(cfg):
    delta = cfg.get("delta")
    for label, raw in _sweep_specs(cfg):
        raw = {k: v for k, v in raw.items() if k != "label"}
        c = build_curve(spec_from_dict(raw), int(cfg.get("curve_samples", DEFAULT_SAMPLES)))
        rep = bounds_for_curve(c)
        row = {"label": label, "surface": c.kind.name.lower(), "P": c.P, "A": c.A,
               "k_min": c.k_min, "defect": rep.defect, "best": rep.best}
        row.update(rep.present())
        if delta:
            est = bl.estimate_delta_billiard(c, int(delta.get("window", 32)),
                                             int(delta.get("samples", 10_000)),
                                             int(delta.get("seed", 0)),
                                             int(cfg.get("workers", 1)))
            row.update(delta_hat=est.delta_hat, stderr=est.stderr, window=est.window,
                       samples=est.samples, seed=est.seed)
        yield row


def _torus_rows(cfg, base: Path):
    if "metric_file" in cfg:
        p, _ = cm.load_metric_spec(base / cfg["metric_file"])
    else:
        p = cm.metric_from_dict(cfg["metric"])
    grid = int(cfg.get("grid", 256))
    field = cm.eval_field(p, grid)
    curv = cm.curvature(field)
    alphas = cfg.get("alphas")
    _, _, reps = gb.optimize_alpha(field, curv, alphas)
    for r in reps:
        yield {"label": cfg.get("label", "torus"), "alpha": r.psi["alpha"],
               "delta_lb": r.delta_lb, "capital_psi_integral": r.capital_psi_integral,
               "curv_sup": r.curv_sup, "psi_sup": r.psi_sup, "vol_g": r.vol_g, "grid": grid}


def cmd_sweep(args, started):
    path = Path(args.config)
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read sweep config: {exc}") from None
    if cfg.get("family") == "torus_alpha":
        columns, rows = TORUS_COLUMNS, list(_torus_rows(cfg, path.parent))
    else:
        columns, rows = BILLIARD_COLUMNS, list(_billiard_rows(cfg))
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    inputs = {"config": str(path), "config_sha256": _digest(cfg), "config_data": cfg}
    return _report("sweep", inputs, {"csv": str(args.out), "rows": len(rows),
                                     "columns": columns}, started, {"tol_iso": TOL_ISO},
                   RNG_ALGORITHM if cfg.get("delta") else None)


# ---------------------------------------------------------------------------

def _add_curve_args(sp, samples_alias: bool = False):
    sp.add_argument("--spec", required=True, help="curve spec JSON file")
    # commands without Monte Carlo also accept --samples for the curve resolution
    names = ["--curve-samples", "--samples"] if samples_alias else ["--curve-samples"]
    sp.add_argument(*names, dest="samples_curve", type=int, default=None,
                    help=f"arclength sample count (default: spec value or {DEFAULT_SAMPLES})")
    sp.add_argument("--tol-gb", type=float, default=TOL_GB,
                    help="Gauss-Bonnet residual tolerance (default %(default)s)")


def _add_mc_args(sp, samples):
    sp.add_argument("--samples", type=int, default=samples)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hopfbounds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    report_out = _Parser(add_help=False)
    report_out.add_argument("--out", help="write the JSON report here instead of stdout")

    sp = sub.add_parser("curve-info", parents=[report_out], help="curve invariants and Gauss-Bonnet residual")
    _add_curve_args(sp, samples_alias=True)
    sp.set_defaults(func=cmd_curve_info)

    sp = sub.add_parser("billiard-bound", parents=[report_out], help="closed-form lower bounds for a table")
    _add_curve_args(sp, samples_alias=True)
    sp.set_defaults(func=cmd_billiard_bound)

    sp = sub.add_parser("billiard-delta", parents=[report_out], help="Monte Carlo estimate of the non-minimal fraction")
    _add_curve_args(sp)
    sp.add_argument("--window", type=int, default=bl.DEFAULT_WINDOW)
    _add_mc_args(sp, bl.DEFAULT_MC_SAMPLES)
    sp.set_defaults(func=cmd_billiard_delta)

    sp = sub.add_parser("billiard-verify", parents=[report_out], help="phase-space and variational identity residuals")
    _add_curve_args(sp)
    _add_mc_args(sp, 100_000)
    sp.add_argument("--chords", type=int, default=100)
    sp.set_defaults(func=cmd_billiard_verify)

    sp = sub.add_parser("torus-curvature", parents=[report_out], help="curvature norms of a conformal torus metric")
    sp.add_argument("--metric", required=True)
    sp.add_argument("--grid", type=int, default=256)
    sp.set_defaults(func=cmd_torus_curvature)

    sp = sub.add_parser("torus-bound", parents=[report_out], help="lower bound for a conformal torus metric")
    sp.add_argument("--metric", required=True)
    sp.add_argument("--grid", type=int, default=256)
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--alpha", type=float)
    grp.add_argument("--alpha-scan", metavar="LO:HI:STEPS")
    sp.set_defaults(func=cmd_torus_bound)

    sp = sub.add_parser("torus-delta", parents=[report_out], help="Monte Carlo estimate for the geodesic flow")
    sp.add_argument("--metric", required=True)
    sp.add_argument("--horizon", type=float, nargs="+", default=[50.0])
    sp.add_argument("--grid", type=int, default=256)
    sp.add_argument("--alpha", type=float, default=2.0, help="weight exponent of the compared bound")
    sp.add_argument("--tol", type=float, default=gs.MC_TOL)
    _add_mc_args(sp, 10_000)
    sp.set_defaults(func=cmd_torus_delta)

    sp = sub.add_parser("sweep", help="parameter sweep to CSV")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=cmd_sweep)
    return parser


def _emit(report, dest):
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    if dest:
        Path(dest).write_text(text + "\n")
    else:
        print(text)


def run_command(argv=None) -> tuple[int, dict | None]:
    """Run one subcommand; returns the exit code and the report (if any)."""
    started = time.perf_counter()
    args = argparse.Namespace()
    report_dest = None
    try:
        args = build_parser().parse_args(argv)
        if args.command != "sweep":
            report_dest = args.out
        for name in ("samples", "workers", "window", "chords", "samples_curve"):
            val = getattr(args, name, None)
            if val is not None and val < 1:
                raise ValidationError(f"--{name.replace('_', '-')} must be positive")
        report = args.func(args, started)
    except ConsistencyError as exc:
        print(f"internal consistency error: {exc}", file=sys.stderr)
        partial = getattr(args, "_partial", None)
        if partial is not None:
            _emit(partial, report_dest)
        return 2, partial
    except (ValidationError, HopfBoundsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1, None
    if args.command == "sweep":
        _emit(report, None)
    else:
        _emit(report, report_dest)
    return 0, report


def main(argv=None) -> int:
    return run_command(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
