"""Command-line surface.

Subcommands: generate, solve, sweep, semireal, threshold, oracle-check,
expand, degrade. Report-style commands write a delimited table, a JSON
run manifest, and a rendered PNG figure into the output directory.
Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .datasets import contact_network_path
from .experiments import (
    AXES,
    VARIANTS,
    SemiRealSpec,
    SweepSpec,
    run_sweep,
    degrade_network,
    semi_real_pipeline,
)
from .formats import (
    ConfigError,
    ParseError,
    clique_expand,
    load_config,
    model_params_from_config,
    params_to_config,
    read_network,
    read_observed_matrix,
    write_clusters,
    write_completed_matrix,
    write_network,
    write_observed_matrix,
)
from .mch import RefineConfig, run_mch
from .model import ModelParams
from .oracle import LikelihoodWeights, log_likelihood_rel, ml_brute_force
from .synth import ARTIFACT_DEGRADE, GenSeed, gen_instance
from .theory import gain_curve, info_d, kink_quality, max_gain, p_star
from .plots import save_semi_real_figure, save_sweep_figure, save_threshold_figure

ORACLE_TOLERANCE = 1e-9


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        raise _UsageError(self, message)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    path.write_text(buf.getvalue())


def _write_manifest(path: Path, payload: dict) -> None:
    payload = {"format": "hypermc-manifest v1", "version": __version__, **payload}
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _out_dir(args) -> Path:
    out = args.out if args.out is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_required_config(args) -> dict:
    if args.config is None:
        raise ConfigError("this command needs --config <path>")
    return load_config(args.config)


def _refine_override(config: dict) -> RefineConfig | None:
    table = config.get("refine")
    if table is None:
        return None
    c = {int(k): float(v) for k, v in table.get("c", {}).items()}
    T = int(table["T"]) if "T" in table else None
    if T is None:
        raise ConfigError("refine.T: missing required key")
    return RefineConfig(T=T, c=c)


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    config = _load_required_config(args)
    params = model_params_from_config(config)
    master = args.seed if args.seed is not None else int(config.get("seed", 0))
    seed = GenSeed(master=master, trial=0)
    assignment, rating, observed, bundle = gen_instance(params, seed)
    out = _out_dir(args)
    write_network(bundle, out / "network.txt", labels=assignment.labels)
    write_observed_matrix(observed, out / "observed.txt")
    write_completed_matrix(rating.full(), out / "truth_matrix.txt")
    write_clusters(assignment.labels, assignment.K, out / "truth_clusters.txt")
    _write_manifest(
        out / "instance.json",
        {"command": "generate", "seed": master, "model": params_to_config(params)},
    )
    print(f"wrote instance files to {out}")
    return 0


def cmd_solve(args) -> int:
    U = read_observed_matrix(args.matrix)
    network = read_network(args.network)
    if network.bundle.n != U.n:
        raise ConfigError(
            f"user count mismatch: network file has n = {network.bundle.n}, "
            f"matrix file has n = {U.n}"
        )
    config = load_config(args.config) if args.config is not None else {}
    params: ModelParams | None = None
    if "model" in config:
        params = model_params_from_config(config)
    refine_cfg = _refine_override(config)
    master = args.seed if args.seed is not None else 0
    result = run_mch(
        network.bundle,
        U,
        args.k,
        params=params,
        refine_config=refine_cfg,
        seed=GenSeed(master=master).algorithm_seed(),
    )
    out = _out_dir(args)
    write_completed_matrix(result.completed, out / "completed.txt")
    write_clusters(result.assignment.labels, result.assignment.K, out / "clusters.txt")
    estimates = None
    if result.estimates is not None:
        estimates = {
            "theta": result.estimates.theta_est,
            "alpha": {str(d): v for d, v in result.estimates.alpha_est.items()},
            "beta": {str(d): v for d, v in result.estimates.beta_est.items()},
        }
    _write_manifest(
        out / "estimates.json",
        {
            "command": "solve",
            "seed": master,
            "estimates": estimates,
            "refine": {
                "iterations_run": result.refine_outcome.iterations_run,
                "converged": result.refine_outcome.converged,
                "halted_empty": result.refine_outcome.halted_empty,
            },
        },
    )
    print(f"wrote completed matrix and clusters to {out}")
    return 0


def _sweep_spec_from_config(config: dict, seed_override: int | None) -> SweepSpec:
    params = model_params_from_config(config)
    table = config.get("sweep")
    if table is None:
        raise ConfigError("sweep: missing required table")
    axis = table.get("axis", "p_ratio")
    if axis not in AXES:
        raise ConfigError(f"sweep.axis: must be one of {AXES}")
    grid = table.get("grid")
    if not isinstance(grid, list) or not grid:
        raise ConfigError("sweep.grid: expected a nonempty array")
    variants = tuple(table.get("variants", ["mch"]))
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"sweep.variants: unknown variant {v!r}")
    master = seed_override if seed_override is not None else int(table.get("master_seed", 0))
    try:
        return SweepSpec(
            base=params,
            axis=axis,
            grid=tuple(float(g) for g in grid),
            trials=int(table.get("trials", 50)),
            master_seed=master,
            variants=variants,
            alpha_beta_ratio=float(table.get("alpha_beta_ratio", 16.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}")


def cmd_sweep(args) -> int:
    config = _load_required_config(args)
    spec = _sweep_spec_from_config(config, args.seed)
    rows = run_sweep(spec, workers=max(1, args.threads))
    out = _out_dir(args)
    header = ["axis", "variant", "n_trials", "err_prob", "err_ci", "mean_mae", "mae_sd"]
    table = [
        [r.axis_value, r.variant, r.n_trials, r.err_prob, r.err_ci, r.mean_mae, r.mae_sd]
        for r in rows
    ]
    if args.format == "json":
        (out / "sweep.json").write_text(
            json.dumps([dict(zip(header, row)) for row in table], indent=2) + "\n"
        )
    _write_csv(out / "sweep.csv", header, table)
    _write_manifest(
        out / "manifest.json",
        {
            "command": "sweep",
            "model": params_to_config(spec.base),
            "sweep": {
                "axis": spec.axis,
                "grid": list(spec.grid),
                "trials": spec.trials,
                "variants": list(spec.variants),
                "master_seed": spec.master_seed,
                "alpha_beta_ratio": spec.alpha_beta_ratio,
            },
        },
    )
    save_sweep_figure(rows, spec.axis, out / "sweep.png")
    print(f"wrote sweep results to {out}")
    return 0


def cmd_semireal(args) -> int:
    config = _load_required_config(args)
    table = config.get("semi_real")
    if table is None:
        raise ConfigError("semi_real: missing required table")
    network = table.get("network", "bundled")
    path = contact_network_path() if network == "bundled" else Path(network)
    parsed = read_network(path)
    if parsed.labels is None:
        raise ConfigError(f"semi_real.network: {path} carries no class labels")
    master = args.seed if args.seed is not None else int(table.get("master_seed", 0))
    q_grid = table.get("q_grid", [1.0])
    variants = tuple(table.get("variants", ["mch", "graph", "clique"]))
    all_rows = []
    for q in q_grid:
        spec = SemiRealSpec(
            m=int(table["m"]),
            gamma=float(table["gamma"]),
            theta=float(table["theta"]),
            p=float(table["p"]),
            q=float(q),
            trials=int(table.get("trials", 20)),
            master_seed=master,
            variants=variants,
            refine_c=float(table.get("refine_c", 0.01)),
        )
        all_rows.extend(semi_real_pipeline(parsed.bundle, parsed.labels, spec))
    out = _out_dir(args)
    header = ["q", "variant", "n_trials", "err_prob", "mean_mae", "mae_sd", "mean_cluster_error"]
    _write_csv(
        out / "semireal.csv",
        header,
        [
            [r.q, r.variant, r.n_trials, r.err_prob, r.mean_mae, r.mae_sd, r.mean_cluster_error]
            for r in all_rows
        ],
    )
    _write_manifest(
        out / "manifest.json",
        {
            "command": "semireal",
            "semi_real": {**{k: table[k] for k in sorted(table)}, "master_seed": master},
        },
    )
    save_semi_real_figure(all_rows, out / "semireal.png")
    print(f"wrote semi-real comparison to {out}")
    return 0


def _info_map_from_model(table: dict) -> tuple[dict[int, float], dict]:
    n = int(table["n"])
    if "quality" in table:
        return (
            {
                int(d): float(q) * math.log(n) / math.comb(n - 1, int(d) - 1)
                for d, q in table["quality"].items()
            },
            {"quality": dict(table["quality"])},
        )
    if "alpha" in table and "beta" in table:
        return (
            {
                int(d): info_d(float(a), float(table["beta"][d]))
                for d, a in table["alpha"].items()
            },
            {"alpha": dict(table["alpha"]), "beta": dict(table["beta"])},
        )
    return {}, {}


def cmd_threshold(args) -> int:
    config = _load_required_config(args)
    table = config.get("model")
    if table is None:
        raise ConfigError("model: missing required table")
    for key in ("n", "m", "K", "theta", "gamma"):
        if key not in table:
            raise ConfigError(f"model.{key}: missing required key")
    n, m, K = int(table["n"]), int(table["m"]), int(table["K"])
    theta, gamma = float(table["theta"]), float(table["gamma"])
    i_map, layers_desc = _info_map_from_model(table)
    ps = p_star(n, m, K, gamma, theta, i_map)
    g_star, g_pos = max_gain(n, m, K, gamma, theta)
    kink = kink_quality(n, m, K, gamma)
    curve_grid = config.get("threshold", {}).get("curve_grid")
    if curve_grid is None:
        top = max(1.2 * math.log(n), kink * 1.2, 1e-9)
        curve_grid = [top * i / 20.0 for i in range(21)]
    series = gain_curve(n, m, K, gamma, theta, curve_grid)
    record = {
        "inputs": {"n": n, "m": m, "K": K, "theta": theta, "gamma": gamma, **layers_desc},
        "p_star": ps.value,
        "regime": ps.regime,
        "p_star_clamped": ps.clamped,
        "g_star": g_star,
        "g_star_positive": g_pos,
        "kink_quality": kink,
        "curve": [{"i_h": ih, "p_star": v} for ih, v in series],
    }
    if args.format == "json":
        print(json.dumps(record, indent=2))
    else:
        print(f"p_star,{_fmt(ps.value)}")
        print(f"regime,{ps.regime}")
        print(f"g_star,{_fmt(g_star)}")
        print(f"kink_quality,{_fmt(kink)}")
    if args.out is not None:
        out = _out_dir(args)
        _write_csv(
            out / "threshold_curve.csv",
            ["i_h", "p_star"],
            [[ih, v] for ih, v in series],
        )
        _write_manifest(out / "threshold.json", {"command": "threshold", **record})
        save_threshold_figure(series, kink, g_star, out / "threshold.png")
    return 0


def cmd_oracle_check(args) -> int:
    params = ModelParams(
        n=args.n,
        m=args.m,
        K=args.k,
        theta=args.theta,
        p=args.p,
        gamma=args.gamma,
        alpha={2: args.alpha2},
        beta={2: args.beta2},
    )
    master = args.seed if args.seed is not None else 0
    weights = LikelihoodWeights.from_params(params.theta, params.alpha, params.beta)
    rows = []
    matched = 0
    for trial in range(args.trials):
        seed = GenSeed(master=master, trial=trial)
        assignment, rating, U, bundle = gen_instance(params, seed)
        result = run_mch(bundle, U, params.K, params=params, seed=seed.algorithm_seed())
        from .model import RatingMatrix

        candidate = RatingMatrix(vectors=result.vectors, assignment=result.assignment)
        mch_value = log_likelihood_rel(candidate, bundle, U, weights)
        ml = ml_brute_force(bundle, U, params.K, params.m, params.gamma, weights)
        ok = mch_value >= ml.value - ORACLE_TOLERANCE
        matched += ok
        rows.append([trial, mch_value, ml.value, int(ok)])
    print(
        f"oracle-check: solver matched the brute-force optimum in "
        f"{matched}/{args.trials} trials"
    )
    if args.out is not None:
        out = _out_dir(args)
        _write_csv(out / "oracle_check.csv", ["trial", "solver_value", "ml_value", "matched"], rows)
        _write_manifest(
            out / "manifest.json",
            {
                "command": "oracle-check",
                "seed": master,
                "trials": args.trials,
                "matched": matched,
                "model": params_to_config(params),
            },
        )
    return 0


def cmd_expand(args) -> int:
    parsed = read_network(args.network)
    expanded = clique_expand(parsed.bundle)
    write_network(expanded, args.out_file, labels=parsed.labels)
    print(f"wrote clique-expanded network to {args.out_file}")
    return 0


def cmd_degrade(args) -> int:
    if not (0.0 <= args.q <= 1.0):
        raise ConfigError(f"--q must lie in [0, 1], got {args.q}")
    parsed = read_network(args.network)
    master = args.seed if args.seed is not None else 0
    rng = GenSeed(master=master).rng(ARTIFACT_DEGRADE)
    degraded = degrade_network(parsed.bundle, args.q, rng)
    write_network(degraded, args.out_file, labels=parsed.labels)
    print(f"wrote degraded network to {args.out_file}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed override")
    common.add_argument("--config", type=Path, default=None, help="TOML or JSON config")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--threads", type=int, default=1, help="parallel trial workers")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = _Parser(prog="hypermc", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("generate", parents=[common], help="emit instance files from config")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", parents=[common], help="run the solver on files")
    p.add_argument("--matrix", type=Path, required=True)
    p.add_argument("--network", type=Path, required=True)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweep from config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("semireal", parents=[common], help="semi-real MAE comparison")
    p.set_defaults(func=cmd_semireal)

    p = sub.add_parser("threshold", parents=[common], help="threshold calculators")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("oracle-check", parents=[common], help="tiny-instance ML equivalence")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=0.05)
    p.add_argument("--p", type=float, default=0.9)
    p.add_argument("--alpha2", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.1)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("expand", parents=[common], help="clique-expand a network file")
    p.add_argument("--network", type=Path, required=True)
    p.add_argument("--out-file", type=Path, required=True)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("degrade", parents=[common], help="q-subsample a network file")
    p.add_argument("--network", type=Path, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--out-file", type=Path, required=True)
    p.set_defaults(func=cmd_degrade)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ConfigError, ParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
