#!/usr/bin/env python3
"""
Stochastic LQG Balancer - command-line pipeline.

Usage:
    python src/cli.py bench --n 36 --out runs/system
    python src/cli.py gramians --system runs/system --out runs/gramians
    python src/cli.py reduce --system runs/system --gramians runs/gramians --tol 1e-3 --out runs/reduced
    python src/cli.py bounds --system runs/system --gramians runs/gramians --reduced runs/reduced --horizon 10 --out runs/bounds.json
    python src/cli.py simulate --system runs/system --gramians runs/gramians --reduced runs/reduced --mode closed --out runs/sim

Exit codes: 0 ok, 2 input error, 3 order selection, 4 non-convergence, 5 certificate failure.
"""

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from core.config import load_config
from core.errors import CertificateError, InputError, LQGBTError, OrderSelectionError, PreconditionError
from core.orchestrator import ReductionPipeline, SIMULATION_MODES
from deployers.bundles import (
    load_gramians, load_reduced, read_csv, save_gramians, save_reduced, save_system, write_json, write_sigma_csv,
)
from generators.heat_benchmark import reference_input

logger = logging.getLogger("lqgbt")

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
STRATEGIES = ["subgradient_feasibility", "constructive_epsilon", "external_sdp"]


def _banner(title: str) -> None:
    print("\n" + "═" * 60)
    print(f"  {title}")
    print("═" * 60)


def _pipeline(args) -> ReductionPipeline:
    config = load_config(args.config)
    pipeline = ReductionPipeline(config)
    if getattr(args, "system", None):
        pipeline.load_system(Path(args.system))
    return pipeline


def _with_gramians(pipeline: ReductionPipeline, directory: str) -> None:
    P, Q = load_gramians(Path(directory))
    pipeline.set_gramians(P, Q)


def _with_reduced(pipeline: ReductionPipeline, directory: str) -> None:
    """Attach a saved reduced model, checking it belongs to the loaded Gramians."""
    reduced = load_reduced(Path(directory))
    bal = pipeline.balance()
    if reduced.V.shape[0] != bal.n or not np.allclose(reduced.sigma_r, bal.sigma[: reduced.r], rtol=1e-8):
        raise InputError(f"Reduced model in {directory} was not built from these Gramians")
    pipeline.state.reduced = reduced


def _control_signal(spec: str, m: int):
    """'reference', 'zero' or a CSV with columns t and u (or u1..um), linearly interpolated."""
    if spec == "zero":
        return None
    if spec == "reference":
        return reference_input
    columns = read_csv(Path(spec))
    if "t" not in columns:
        raise InputError(f"Control file {spec} needs a 't' column")
    names = ["u"] if m == 1 and "u" in columns else [f"u{k + 1}" for k in range(m)]
    missing = [name for name in names if name not in columns]
    if missing:
        raise InputError(f"Control file {spec} lacks columns {missing}")
    t_data = columns["t"]

    def signal(t):
        return np.column_stack([np.interp(t, t_data, columns[name]) for name in names])

    return signal


# =============================================================================
# COMMANDS
# =============================================================================

def cmd_bench(args) -> int:
    pipeline = _pipeline(args)
    sys_ = pipeline.build_benchmark(n=args.n, alpha=args.alpha, nu=args.nu, quad_points=args.quad_points)
    out = Path(args.out)
    save_system(sys_, out)
    checks = pipeline.check_preconditions()
    write_json(out / "checks.json", checks)

    _banner(f"Heat benchmark n={sys_.n}")
    print(f"  spectral abscissa   {checks['spectral_abscissa']:+.6e}")
    print(f"  mean-square stable  {checks['mean_square_stable']}")
    print(f"  detectable          {checks['detectable']}")
    print(f"  stabilizable        {checks['stabilizable']}")
    print(f"  bundle              {out}")
    # open-loop instability is expected; the later stages need the other two
    failed = [name for name in ("detectable", "stabilizable") if not checks[name]]
    if failed:
        raise PreconditionError(f"Benchmark system is not {' and '.join(failed)}; see {out / 'checks.json'}")
    return 0


def cmd_gramians(args) -> int:
    pipeline = _pipeline(args)
    if args.tol is not None:
        pipeline.config.solver.tol = args.tol
    if args.external_dir:
        pipeline.config.solver.external_dir = args.external_dir
    pair = pipeline.compute_gramians(args.strategy)
    diagnostics = pair.to_dict()
    save_gramians(pair.P, pair.Q, diagnostics, Path(args.out))

    _banner("Gramians")
    print(f"  strategy            {pair.strategy}")
    print(f"  Riccati residual    {pair.q_residual:.3e}")
    print(f"  inequality margin   {pair.p_margin:.3e}")
    print(f"  closed loop stable  {pair.closed_loop_certificate.stable}")
    return 0


def cmd_reduce(args) -> int:
    pipeline = _pipeline(args)
    _with_gramians(pipeline, args.gramians)
    out = Path(args.out)
    try:
        reduced = pipeline.reduce(r=args.order, tol=args.tol)
    except OrderSelectionError as e:
        print(f"  order rejected: {e} (suggested r={e.suggestion})")
        raise
    sigma = pipeline.state.balanced.sigma
    save_reduced(reduced, out, extra={"gap_check": {"passed": True, "gap_tol": pipeline.config.balancing.gap_tol}})
    write_sigma_csv(out / "sigma.csv", sigma)

    _banner(f"Reduced model r={reduced.r} of n={sigma.size}")
    for k, s in enumerate(sigma[: min(sigma.size, reduced.r + 3)], start=1):
        marker = "*" if k <= reduced.r else " "
        print(f"  {marker} σ_{k:<3d} {s:.6e}")
    return 0


def cmd_bounds(args) -> int:
    pipeline = _pipeline(args)
    _with_gramians(pipeline, args.gramians)
    _with_reduced(pipeline, args.reduced)
    report, certificates = pipeline.evaluate_bounds(T=args.horizon, gamma_method=args.gamma_method)
    write_json(Path(args.out), {"report": report.to_dict(), "certificates": certificates.to_dict()})

    _banner(f"Bounds r={report.r}")
    print(f"  tail coefficient    {report.tail_coefficient:.6e}")
    print(f"  plain tail          {report.plain_tail:.6e}")
    print(f"  beta                {report.beta:.6e}")
    print(f"  gamma_T             {report.gamma_T}")
    print(f"  certificates        {'pass' if certificates.passed else 'FAIL'}")
    pipeline.require_certificates()
    return 0


def cmd_simulate(args) -> int:
    pipeline = _pipeline(args)
    if not args.gramians:
        raise InputError("simulate needs --gramians")
    _with_gramians(pipeline, args.gramians)
    _with_reduced(pipeline, args.reduced)

    changes = {"seed": args.seed, "n_paths": args.paths}
    if args.T is not None:
        changes["T"] = args.T
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.x0:
        changes["x0"] = args.x0
    elif args.mode == "reduced-feedback":
        changes["x0"] = "random-unit"
    cfg = pipeline.config.simulation.with_updates(**changes)
    signal = _control_signal(args.control, pipeline.state.system.m)

    result = pipeline.simulate(args.mode, signal, cfg)
    result.to_files(Path(args.out))

    _banner(f"Simulation ({args.mode})")
    summary = result.summary
    failed = []
    for name, bound in summary.get("bounds", {}).items():
        if "holds" in bound:
            print(f"  {name:<10s} bound {bound['value']:.6e}  holds {bound['holds']}")
            if not bound["holds"]:
                failed.append(name)
    if "error_norm" in summary:
        print(f"  error norm          {summary['error_norm']:.6e}")
    if "monte_carlo" in summary:
        mc = summary["monte_carlo"]
        print(f"  Monte Carlo         {mc['within_3se']}/{mc['checkpoints']} checkpoints within 3 SE")
    if failed:
        raise CertificateError(f"Bounds violated: {', '.join(failed)}")
    return 0


# =============================================================================
# ENTRY POINT
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="LQG balanced truncation for stochastic systems")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings only")
    parser.add_argument("--config", default=None, help="YAML file overriding config/defaults.yaml")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="Build the heat benchmark bundle")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--quad-points", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gramians", help="Compute the Gramian pair")
    p.add_argument("--system", required=True)
    p.add_argument("--strategy", default="subgradient_feasibility", choices=STRATEGIES)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--external-dir", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gramians)

    p = sub.add_parser("reduce", help="Balance and truncate")
    p.add_argument("--system", required=True)
    p.add_argument("--gramians", required=True)
    order = p.add_mutually_exclusive_group(required=True)
    order.add_argument("--order", type=int)
    order.add_argument("--tol", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("bounds", help="Error bounds and preservation certificates")
    p.add_argument("--system", required=True)
    p.add_argument("--gramians", required=True)
    p.add_argument("--reduced", required=True)
    p.add_argument("--horizon", type=float, default=math.inf)
    p.add_argument("--gamma-method", default="worst_case", choices=["worst_case", "operator_norm"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="Moment ODE and Monte Carlo validation")
    p.add_argument("--system", required=True)
    p.add_argument("--gramians", default=None)
    p.add_argument("--reduced", required=True)
    p.add_argument("--mode", default="closed", choices=list(SIMULATION_MODES))
    p.add_argument("--control", default="reference", help="reference, zero or a CSV file")
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--paths", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x0", choices=["zero", "random-unit"], default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    try:
        return args.func(args)
    except LQGBTError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
