"""Command-line front end.

Every command writes ``report.json`` (plus CSV tables or grid snapshots)
into the output directory and exits with 0 on PASS/complete, 2 on an audit
FAIL (artifacts still written) and 1 on errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import cone_membership, eigenvalues, elementary_symmetric, sigma_k
from .barriers import barrier_sigma2_value, h_star, make_cylinder_barrier, make_wdelta, pogorelov_gallery
from .config import COMMANDS, ConfigError, boundary_function, grid_input, load_config, resolve_nodes, rhs_function
from .experiments import (
    BoundaryDatum,
    c2_at_origin_experiment,
    modulus_experiment,
    pogorelov_region,
    pogorelov_value,
    smooth_family,
    solve_family,
    wall_barrier_for,
)
from .grid import BoundaryProximityError, discrete_hessian, write_grid
from .solver import ConvergenceError, DirichletProblem, solve_dirichlet
from .support import strict_2convexity_audit

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
log = logging.getLogger("hessianlab")


def _clean(obj):
    # JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def write_json(path, obj):
    text = json.dumps(_clean(obj), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n")


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _envelope(cfg, status, result):
    config = cfg.to_dict()
    config.pop("out")
    return {
        "command": cfg.command,
        "status": status,
        "version": __version__,
        "config_hash": cfg.digest(),
        "config": config,
        "result": result,
    }


# -- commands ---------------------------------------------------------------------

def _problem(cfg):
    g = boundary_function(cfg.boundary, cfg.n, cfg.base_dir)
    return DirichletProblem(cfg.n, cfg.k, cfg.domain_obj(), rhs_function(cfg), g)


def _origin_hessian_norm(u):
    try:
        return float(np.linalg.norm(discrete_hessian(u, u.origin_node).dense(), 2))
    except BoundaryProximityError:
        return float("nan")


def cmd_solve(cfg, out):
    u, rep = solve_dirichlet(_problem(cfg), cfg.resolution)
    write_grid(out / "solution.hgf", u)
    result = rep.to_dict()
    result.update(sup_norm=u.sup_norm(), hessian_norm_origin=_origin_hessian_norm(u), grid="solution.hgf")
    return ("PASS" if rep.converged else "FAIL"), result, f"residual {rep.residual:.3e} after {rep.iterations} sweeps"


def _audit_input(cfg):
    if cfg.input == "solve":
        u, _ = solve_dirichlet(_problem(cfg), cfg.resolution)
        return u
    return grid_input(cfg)


def _audit(cfg, out, certify):
    u = _audit_input(cfg)
    nodes = resolve_nodes(cfg, u)
    rep = strict_2convexity_audit(u, nodes, tuple(cfg.deltas), cfg.r, certify=certify)
    rows = []
    for a in rep.nodes:
        for lev in a.levels:
            rows.append([" ".join(map(str, a.node)), lev["delta"], lev["count"], lev["dimension"], *lev["widths"]])
    write_csv(out / "flatset.csv", ["node", "delta", "count", "dimension"] + [f"width_{d}" for d in range(u.n + 1)], rows)
    dims = sorted({a.dimension for a in rep.nodes})
    return u, rep, dims


def cmd_audit_flatset(cfg, out):
    _, rep, dims = _audit(cfg, out, certify=True)
    return rep.status, rep.to_dict(), f"dimension {'/'.join(map(str, dims))} at {len(rep.nodes)} node(s)"


def cmd_certify(cfg, out):
    _, rep, dims = _audit(cfg, out, certify=True)
    certs = [c.to_dict() for c in rep.certificates]
    write_json(out / "certificate.json", {"certificates": certs})
    found = sum(1 for c in certs if c.get("certificate", True) is not None)
    if rep.passed:
        msg = "no flat set above dimension n-2; nothing to certify"
    else:
        msg = f"{found} certificate(s) for {len(rep.offenders)} offending node(s)"
    return rep.status, {"audit": rep.to_dict(), "certificates": certs}, msg


def cmd_barriers(cfg, out):
    n, h, H = cfg.n, float(cfg.h), float(cfg.H)
    P = make_cylinder_barrier(h, H, n)
    closed = barrier_sigma2_value(h, H, n)
    minors = float(sigma_k(P.hessian(), 2))
    spectral = float(elementary_symmetric(eigenvalues(P.hessian()).eigenvalues, 2))
    tol = 1e-12 * max(1.0, abs(closed))
    hs = h_star(n, H)
    rows = [["sigma2_cylinder_barrier", closed, minors, abs(closed - minors)],
            ["sigma2_cylinder_barrier_eigen", closed, spectral, abs(closed - spectral)]]
    result = {
        "n": n, "h": h, "H": H,
        "barrier": P.to_triple(),
        "sigma2": closed,
        "sigma2_minors": minors,
        "sigma2_eigen": spectral,
        "agree": abs(closed - minors) <= tol and abs(closed - spectral) <= tol,
        "h_star": hs,
        "below_one": closed < 1.0,
        "h_below_h_star": h <= hs,
    }
    ok = result["agree"] and (closed < 1.0 or h > hs)
    if n >= 3:
        d = float(cfg.delta)
        W = make_wdelta(d, n)
        wc = 2 * d * d * (n - 2) * (n - 3)
        wo = float(sigma_k(W.hessian(), 2))
        member = cone_membership(W.hessian(), 2, "closed").in_closure
        rows.append(["sigma2_wdelta", wc, wo, abs(wc - wo)])
        result["wdelta"] = {"delta": d, "sigma2": wc, "sigma2_minors": wo, "closed_cone": member,
                            "agree": abs(wc - wo) <= 1e-12 * max(1.0, wc)}
        ok = ok and member and result["wdelta"]["agree"]
    write_csv(out / "barriers.csv", ["quantity", "closed_form", "oracle", "abs_diff"], rows)
    return ("PASS" if ok else "FAIL"), result, f"sigma2(D^2 P_h) = {closed:.12g} (oracle {minors:.12g})"


def _gallery_rows():
    u = pogorelov_gallery(3, 4)
    rows = []
    for rho in (1e-1, 1e-2, 1e-3):
        x = np.array([rho, 0.0, 0.0, 0.1])
        H = u.hessian(x)
        rows.append([rho, float(np.linalg.norm(H, 2)), float(sigma_k(H, 3))])
    t = np.linspace(-0.25, 0.25, 11)
    s3 = u.sigma_k_closed_form(t)
    return rows, float(s3.min()), float(s3.max())


def cmd_pogorelov(cfg, out):
    res = cfg.resolutions or [cfg.resolution // 2, cfg.resolution]
    datum = BoundaryDatum(cfg.boundary["family"], boundary_function(cfg.boundary, cfg.n, cfg.base_dir))
    sols = [solve_family([datum], cfg.n, N, cfg.domain_obj())[0][1] for N in res]
    w, info = wall_barrier_for(sols[0], mode=cfg.wall)
    rows = []
    for N, u in zip(res, sols):
        rows.append([N, int(pogorelov_region(u, w).sum()), pogorelov_value(u, w)])
    write_csv(out / "pogorelov.csv", ["resolution", "region_nodes", "value"], rows)
    change = abs(rows[-1][2] - rows[-2][2]) / abs(rows[-1][2]) if len(rows) > 1 else 0.0
    tol = 0.10 if cfg.stability_tol is None else float(cfg.stability_tol)
    grows, lo, hi = _gallery_rows()
    write_csv(out / "gallery.csv", ["rho", "hessian_norm", "sigma3"], grows)
    growth = grows[-1][1] / grows[0][1]
    result = {
        "wall": info.to_dict(),
        "barrier": w.to_triple(),
        "functional": [{"resolution": r[0], "region_nodes": r[1], "value": r[2]} for r in rows],
        "relative_change": change,
        "tolerance": tol,
        "gallery": {"growth": growth, "sigma3_bracket": [lo, hi], "rows": grows},
    }
    ok = change <= tol and growth >= 10 and lo > 0
    return ("PASS" if ok else "FAIL"), result, f"relative change {change:.2e}; gallery growth {growth:.1f}x"


def cmd_modulus(cfg, out):
    family = smooth_family(cfg.family_size, cfg.n, seed=cfg.seed)
    sols = solve_family(family, cfg.n, cfg.resolution, cfg.domain_obj())
    K = cfg.K if cfg.K is not None else max(u.sup_norm() for _, u, _ in sols)
    r = 0.1 if cfg.r is None else float(cfg.r)
    table = modulus_experiment([(lab, u) for lab, u, _ in sols], K, r)
    write_csv(out / "modulus.csv", table.COLUMNS, table.rows)
    write_csv(out / "members.csv", ["label", "delta", "capped", "flagged", "count", "sup_norm"],
              [[m.label, m.delta, m.capped, m.flagged, m.count, m.sup_norm] for m in table.members])
    status = "PASS" if table.delta > 0 else "FAIL"
    return status, table.to_dict(), f"delta({cfg.n}, {K:.4g}, {r:g}) = {table.delta:.6g}"


def cmd_c2(cfg, out):
    specs = cfg.data or [cfg.boundary]
    data = [BoundaryDatum(s.get("label", s["family"]), boundary_function(s, cfg.n, cfg.base_dir)) for s in specs]
    labels = [d.label for d in data]
    if len(set(labels)) != len(labels):
        raise ConfigError("data: labels must be distinct (add a 'label' key)")
    res = cfg.resolutions or [cfg.resolution // 2, cfg.resolution]
    table = c2_at_origin_experiment(data, res, cfg.n, cfg.domain_obj())
    write_csv(out / "c2.csv", table.COLUMNS, table.rows)
    tol = 0.05 if cfg.stability_tol is None else float(cfg.stability_tol)
    changes = {lab: table.refinement_change(lab) for lab in table.labels()}
    ok = all(c <= tol for c in changes.values() if not math.isnan(c))
    result = {**table.to_dict(), "refinement_change": changes, "tolerance": tol}
    worst = max((c for c in changes.values() if not math.isnan(c)), default=0.0)
    return ("PASS" if ok else "FAIL"), result, f"largest refinement change {worst:.2e}"


HANDLERS = {
    "solve": cmd_solve,
    "audit-flatset": cmd_audit_flatset,
    "certify": cmd_certify,
    "barriers": cmd_barriers,
    "pogorelov": cmd_pogorelov,
    "modulus": cmd_modulus,
    "c2": cmd_c2,
}


def run(command, cfg):
    """Run one command; returns the exit status. Artifacts go to cfg.out."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        status, result, summary = HANDLERS[command](cfg, out)
    except ConvergenceError as e:
        write_json(out / "report.json", _envelope(cfg, "ERROR", {"error": str(e), "solve": e.report.to_dict()}))
        print(f"{command}: ERROR: {e}", file=sys.stderr)
        return EXIT_ERROR
    write_json(out / "report.json", _envelope(cfg, status, result))
    print(f"{command}: {status}: {summary} -> {out / 'report.json'}")
    return EXIT_OK if status == "PASS" else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="hessianlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hessianlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--n", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--res", type=int, dest="resolution")
        p.add_argument("--h", type=float)
        p.add_argument("--H", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--r", type=float)
        p.add_argument("--K", type=float)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    overrides = {k: getattr(args, k) for k in ("n", "k", "resolution", "h", "H", "delta", "r", "K", "out", "seed")}
    try:
        cfg = load_config(args.config, overrides, command=args.command)
        return run(args.command, cfg)
    except ConfigError as e:
        print(f"hessianlab: config error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:  # noqa: BLE001 - every failure maps to exit status 1
        log.debug("unhandled error", exc_info=True)
        print(f"hessianlab: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
