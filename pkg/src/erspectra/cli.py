"""Command line interface.

Every output carries the resolved configuration, the seeds, the schema
version and the RNG identity.  JSON reports hold them under ``"meta"``; CSV
files start with a single ``# meta: {...}`` comment line.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from erspectra import __version__
from erspectra.config import RNG_IDENTITY, SCHEMA_VERSION, Config
from erspectra.errors import DomainError
from erspectra.experiments import edge_process_seed, mass_intervals, poisson_tests, rigidity_seed
from erspectra.graph import (
    ball_spanning_tree,
    classify_vertices,
    dump_edges,
    sample_er,
    tree_radius,
)
from erspectra.intensity import limit_cdf_largest, make_curve, rho_density, rho_tail, solve_kappa
from erspectra.scalar_theory import solve_scale_params
from erspectra.spectra import build_tridiag_basis, compare_M_Z, model_block, stray_estimate, top_k_eigenpairs, verify_yerror

RIGIDITY_COLUMNS = [
    "seed",
    "top_nonstray",
    "vertex",
    "prediction",
    "gap",
    "n_w",
    "restricted_mu",
    "restricted_radius",
    "restricted_gap",
    "symmetry",
    "stray_overlap",
    "exact_match",
    "max_match_gap",
]
LOCALIZE_COLUMNS = ["seed", "vertex", "sigma", "q"] + [f"outside_{i}" for i in range(5)] + [f"bound_{i}" for i in range(5)] + ["radial_residual"]
CURVE_COLUMNS = ["s", "rho_tail", "density", "cdf"]


def parse_seeds(text: str) -> list[int]:
    """``"3"`` or the inclusive range ``"0..49"``."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def parse_grid(text: str) -> np.ndarray:
    lo, hi, step = (float(t) for t in text.split(":"))
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    return np.arange(lo, hi + 0.5 * step, step)


def meta(cfg: Config, command: str, **extra) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "command": command,
        "rng": RNG_IDENTITY,
        "config": cfg.to_dict(),
    }
    out.update(extra)
    return out


def _clean(obj):
    """Make numpy scalars, arrays and non-finite floats JSON friendly."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload) -> None:
    text = json.dumps(_clean(payload), indent=2)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def write_csv(path, header: dict, columns: list, rows: list) -> None:
    fh = sys.stdout if path is None or str(path) == "-" else open(path, "w", newline="", encoding="utf-8")
    try:
        fh.write("# meta: " + json.dumps(_clean(header)) + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def read_csv(path) -> tuple[dict, list[dict]]:
    """Inverse of the CSV writer: the meta header and the rows as dicts."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# meta: "):
            raise ValueError("missing meta header")
        header = json.loads(first[len("# meta: ") :])
        return header, list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(args, cfg):
    g = sample_er(args.n, args.d, args.seed)
    if args.dump:
        dump_edges(g, args.dump)
    payload = {
        "meta": meta(cfg, "sample", seed=args.seed),
        "graph": g.metadata(),
        "n_edges": g.n_edges,
        "max_degree": int(g.degrees.max(initial=0)),
        "isolated": int(np.count_nonzero(g.degrees == 0)),
    }
    write_json(args.out, payload)


def regime_label(params, u_critical_max: float = 10.0, resonance_width: float = 0.1) -> str:
    """Finite-N label for the asymptotic regimes of the largest eigenvalue.

    u of order one is read as critical; a larger u is subcritical, resonant
    when d u sits within ``resonance_width`` of an integer.
    """
    if params.u_frak < u_critical_max:
        return "critical"
    return "subcritical-resonant" if abs(params.frac_du) < resonance_width else "subcritical-nonresonant"


def cmd_predict(args, cfg):
    params = solve_scale_params(args.n, args.d)
    curve = make_curve(params)
    spec = solve_kappa(curve, cfg.K)
    grid = args.s_grid if args.s_grid is not None else np.arange(-spec.kappa - 2.0, spec.kappa + 5.0 + 1e-9, 0.05)
    tail = rho_tail(curve, grid)
    rows = zip(grid.tolist(), tail.tolist(), rho_density(curve, grid).tolist(), np.exp(-tail).tolist())
    header = meta(cfg, "predict", params=params.to_dict(), kappa=spec.kappa, K=spec.K, regime=regime_label(params))
    write_csv(args.out, header, CURVE_COLUMNS, rows)
    summary = {
        "meta": meta(cfg, "predict"),
        "params": params.to_dict(),
        "frac_du": params.frac_du,
        "kappa": spec.kappa,
        "kappa_residual": spec.residual,
        "K": spec.K,
        "regime": regime_label(params),
        "cdf_at_zero": float(limit_cdf_largest(params.u_frak, curve.frac_part, 0.0)),
    }
    if args.out not in (None, "-"):
        write_json(None, summary)


def cmd_spectrum(args, cfg):
    g = sample_er(args.n, args.d, args.seed)
    eig = top_k_eigenpairs(g, args.k, "both", seed=args.seed, tol=cfg.eig_tol, ncv=cfg.eig_ncv, residual_tol=cfg.residual_tol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        stray = stray_estimate(g, eig)
    payload = {
        "meta": meta(cfg, "spectrum", seed=args.seed),
        "N": g.N,
        "d": g.d,
        "k": eig.k,
        "top_values": eig.top_values,
        "bottom_values": eig.bottom_values,
        "top_residuals": eig.top_residuals,
        "bottom_residuals": eig.bottom_residuals,
        "stray": {
            "value": stray.nu_hat,
            "overlap": stray.overlap,
            "predictor": stray.predictor,
            "separated": stray.separated,
            "index": stray.index,
        },
    }
    try:
        params = solve_scale_params(args.n, args.d)
        payload["params"] = params.to_dict()
        payload["rescaled_top"] = params.rescale(eig.top_values)
    except DomainError as exc:
        payload["params"] = None
        payload["params_error"] = str(exc)
    write_json(args.out, payload)


def _rigidity_rows(args, cfg):
    for seed in args.seeds:
        yield seed, rigidity_seed(args.n, args.d, seed, cfg, k=args.k)


def cmd_rigidity(args, cfg):
    rows = []
    for seed, res in _rigidity_rows(args, cfg):
        m = res.match
        rows.append(
            [
                seed,
                res.top_nonstray,
                res.best_vertex,
                res.best_prediction,
                res.best_gap,
                res.n_w,
                res.restricted_mu,
                res.restricted_radius,
                res.restricted_gap,
                res.symmetry,
                res.stray_overlap,
                None if m is None else int(m.exact_match),
                None if m is None else m.max_gap,
            ]
        )
    write_csv(args.out, meta(cfg, "rigidity", N=args.n, d=args.d, seeds=args.seeds, k=args.k), RIGIDITY_COLUMNS, rows)


def cmd_localize(args, cfg):
    params = solve_scale_params(args.n, args.d)
    q = cfg.loc_factor / params.sigma
    rows = []
    for seed, res in _rigidity_rows(args, cfg):
        outside = list(res.outside_mass) + [None] * (5 - len(res.outside_mass))
        bound = list(res.loc_bound) + [None] * (5 - len(res.loc_bound))
        rows.append([seed, res.best_vertex, params.sigma, q] + outside[:5] + bound[:5] + [res.radial_residual])
    write_csv(args.out, meta(cfg, "localize", N=args.n, d=args.d, seeds=args.seeds, k=args.k), LOCALIZE_COLUMNS, rows)


def window_k(curve, K: float) -> int:
    """Eigenpairs to request so that the window above -kappa(K) is covered
    with high probability, plus one for the stray eigenvalue."""
    return int(min(32, math.ceil(K + 4.0 * math.sqrt(K) + 3.0) + 1))


def cmd_poisson(args, cfg):
    params = solve_scale_params(args.n, args.d)
    curve = make_curve(params)
    K = args.k_window if args.k_window is not None else cfg.K
    spec = solve_kappa(curve, K)
    k = args.k if args.k is not None else window_k(curve, K)
    ivs = mass_intervals(curve)
    procs = [edge_process_seed(args.n, args.d, s, cfg, k) for s in args.seeds]
    res = poisson_tests(procs, curve, ivs, s_grid=[-spec.kappa] + [lo for lo, _ in ivs])
    payload = {
        "meta": meta(cfg, "poisson", N=args.n, d=args.d, seeds=args.seeds, k=k, K=K),
        "params": params.to_dict(),
        "kappa": spec.kappa,
        "n_processes": res.n_processes,
        "ks_statistic": res.ks_statistic,
        "ks_p_value": res.ks_p_value,
        "intervals": [
            {"lo": t.lo, "hi": t.hi, "mass": t.mass, "chi2": t.chi2, "dof": t.dof, "p_value": t.p_value, "mean_count": float(t.counts.mean())}
            for t in res.intervals
        ],
        "dkappa_terms": res.dkappa_terms,
        "dkappa_estimate": res.dkappa_estimate,
        "largest_points": res.largest_points,
        "calibration_gates": {"ks_max": 0.15, "chi2_p_min": 0.01},
    }
    write_json(args.out, payload)


def cmd_tridiag(args, cfg):
    g = sample_er(args.n, args.d, args.seed)
    if args.vertex == "auto":
        params = solve_scale_params(args.n, args.d)
        W = classify_vertices(g, params, cfg.gamma, cfg.c_star).W
        pool = W if W.size else np.arange(g.N)
        x = int(pool[np.argmax(g.degrees[pool])])
    else:
        x = int(args.vertex)
    r_tree = tree_radius(g, x, args.r)
    used_spanning = False
    if r_tree >= args.r:
        graph, center, r = g, x, args.r
    elif args.spanning_tree:
        graph, ids = ball_spanning_tree(g, x, args.r + 1)
        center, r, used_spanning = 0, args.r, True
    else:
        graph, center, r = g, x, r_tree
    payload = {"meta": meta(cfg, "tridiag", seed=args.seed), "vertex": x, "requested_r": args.r, "tree_radius": r_tree, "spanning_tree": used_spanning}
    if r < 1:
        payload["error"] = "the ball of radius 2 around the vertex is not a tree; rerun with --spanning-tree"
        write_json(args.out, payload)
        return 1
    basis = build_tridiag_basis(graph, center, r)
    rep = verify_yerror(basis, cfg.gamma)
    cmp_ = compare_M_Z(basis, gamma=cfg.gamma, C=cfg.C_mz)
    payload.update(
        {
            "r": r,
            "alpha": basis.alpha,
            "beta": basis.beta,
            "sphere_sizes": basis.sphere_sizes[: r + 2],
            "F": basis.F,
            "M": basis.M,
            "Z_block": model_block(basis.alpha, basis.beta, g.d, r),
            "identity_residual": rep.identity_residual,
            "g_norm_ratio": rep.g_norm_ratio,
            "orthogonality": rep.orthogonality,
            "yerror_passes": rep.passes(),
            "mz_deviation": cmp_.deviation,
            "mz_envelope": cmp_.envelope,
        }
    )
    write_json(args.out, payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erspectra", description="Spectral edge numerics for sparse Erdos-Renyi graphs.")
    parser.add_argument("--config", help="JSON file overriding calibrated constants")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=False, seed=False):
        p.add_argument("--n", type=int, required=True, help="number of vertices")
        p.add_argument("--d", type=float, required=True, help="expected degree")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if seeds:
            p.add_argument("--seeds", type=parse_seeds, default=[0], help="seed or inclusive range S0..S1")
        p.add_argument("--out", default=None, help="output path; stdout when omitted")

    p = sub.add_parser("sample", help="sample a graph and summarize it")
    common(p, seed=True)
    p.add_argument("--dump", help="write the edge list to this file")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("predict", help="intensity curve, kappa and scale parameters")
    common(p)
    p.add_argument("--s-grid", type=parse_grid, default=None, help="lo:hi:step on the rescaled axis")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("spectrum", help="extreme eigenvalues and the stray eigenvalue")
    common(p, seed=True)
    p.add_argument("--k", type=int, default=8)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("rigidity", help="top eigenvalue against vertex predictors, per seed")
    common(p, seeds=True)
    p.add_argument("--k", type=int, default=6)
    p.set_defaults(func=cmd_rigidity)

    p = sub.add_parser("poisson", help="Poisson statistics of the rescaled edge across seeds")
    common(p, seeds=True)
    p.add_argument("--k-window", type=float, default=None, help="expected number of points above the window edge")
    p.add_argument("--k", type=int, default=None, help="eigenpairs per seed; derived from the window when omitted")
    p.set_defaults(func=cmd_poisson)

    p = sub.add_parser("localize", help="eigenvector mass outside balls around the matched vertex")
    common(p, seeds=True)
    p.add_argument("--k", type=int, default=6)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("tridiag", help="tridiagonal basis and M matrix around a vertex")
    common(p, seed=True)
    p.add_argument("--vertex", default="auto", help="vertex id, or auto for the highest degree in W")
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--spanning-tree", action="store_true", help="use the BFS spanning tree when the ball has cycles")
    p.set_defaults(func=cmd_tridiag)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = Config.from_json(args.config)
    except (OSError, ValueError) as exc:
        parser.error(f"bad config: {exc}")
    try:
        code = args.func(args, cfg)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
