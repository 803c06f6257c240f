#!/usr/bin/env python3
"""
Stochastic LQG Balancer - Reproduction run on the heat benchmark.

Builds the heat benchmark, computes the Gramian pair, sweeps reduction
orders, then simulates the open-loop and closed-loop error systems and the
full model under the reduced feedback. Every figure-ready series is written
as CSV under the output directory.

Usage:
    python demo/run_demo.py
    python demo/run_demo.py --n 100 --order 6 --paths 1000 --out results/heat
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).parent))

from core.config import load_config
from core.errors import LQGBTError
from core.orchestrator import ReductionPipeline
from deployers.bundles import save_gramians, save_reduced, save_system, write_json, write_sigma_csv
from generators.heat_benchmark import reference_input
from lib.order_sweep import create_order_sweep


def print_banner():
    """Print the demo banner."""
    print("""
╔══════════════════════════════════════════════════════════════════════════════╗
║                                                                              ║
║               STOCHASTIC LQG BALANCED TRUNCATION - HEAT BENCHMARK            ║
║                                                                              ║
╚══════════════════════════════════════════════════════════════════════════════╝
    """)


def print_step(title: str) -> None:
    print("\n" + "─" * 70)
    print(f"  {title}")
    print("─" * 70)


def run_demo(
    n: int | None = None,
    order: int | None = None,
    paths: int = 0,
    seed: int = 0,
    config_path: str | None = None,
    output_dir: Path = Path("results/heat"),
) -> int:
    """Run the full reproduction and return a process exit code."""
    print_banner()
    started = time.perf_counter()
    config = load_config(config_path)
    pipeline = ReductionPipeline(config, output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    try:
        print_step("1. Heat benchmark")
        heat = pipeline.build_benchmark(n=n)
        save_system(heat, output_dir / "system")
        checks = pipeline.check_preconditions()
        write_json(output_dir / "checks.json", checks)
        print(f"  n={heat.n}  abscissa {checks['spectral_abscissa']:+.4e}  "
              f"mean-square stable {checks['mean_square_stable']}")

        print_step("2. Gramians")
        pair = pipeline.compute_gramians()
        save_gramians(pair.P, pair.Q, pair.to_dict(), output_dir / "gramians")
        print(f"  Riccati residual {pair.q_residual:.3e}  inequality margin {pair.p_margin:.3e}")

        print_step("3. Singular values and order sweep")
        bal = pipeline.balance()
        write_sigma_csv(output_dir / "sigma.csv", bal.sigma)
        sweep = create_order_sweep(config.balancing)
        sweep_result = sweep.run(bal, list(range(1, min(heat.n, 12) + 1)))
        sweep.print_summary(sweep_result)
        write_json(output_dir / "order_sweep.json", {"orders": [s.to_dict() for s in sweep_result.statuses]})

        print_step("4. Reduction and bounds")
        if order is None:
            admissible = [s.r for s in sweep_result.statuses if s.status == "certified"]
            order = admissible[min(5, len(admissible) - 1)] if admissible else 1
        reduced = pipeline.reduce(r=order)
        save_reduced(reduced, output_dir / "reduced")
        report, certificates = pipeline.evaluate_bounds(T=config.simulation.T, gamma_method="operator_norm")
        write_json(output_dir / "bounds.json", {"report": report.to_dict(), "certificates": certificates.to_dict()})
        print(f"  r={reduced.r}  tail {report.tail_coefficient:.4e}  gamma_T {report.gamma_T:.4e}")

        print_step("5. Error systems")
        cfg = config.simulation.with_updates(n_paths=paths, seed=seed)
        for mode in ("open", "closed"):
            result = pipeline.simulate(mode, reference_input, cfg)
            result.to_files(output_dir / f"error_{mode}")
            for name, bound in result.summary.get("bounds", {}).items():
                if "holds" in bound:
                    print(f"  {mode:<6s} {name:<10s} {bound['value']:.4e}  holds {bound['holds']}")

        print_step("6. Reduced feedback on the full model")
        feedback_cfg = cfg.with_updates(x0="random-unit")
        result = pipeline.simulate("reduced-feedback", None, feedback_cfg)
        result.to_files(output_dir / "reduced_feedback")
        summary = result.summary
        print(f"  uncontrolled final power {summary['uncontrolled_final_power']:.4e}")
        print(f"  controlled final power   {summary['controlled_final_power']:.4e}")

    except LQGBTError as e:
        print(f"\n❌ {type(e).__name__}: {e}")
        print(f"   {pipeline.get_status()}")
        return e.exit_code

    print(f"\n✅ Done in {time.perf_counter() - started:.1f}s, results in {output_dir}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Heat benchmark reproduction")
    parser.add_argument("--n", type=int, default=None, help="Number of retained modes")
    parser.add_argument("--order", type=int, default=None, help="Reduced order (picked from the sweep by default)")
    parser.add_argument("--paths", type=int, default=0, help="Monte Carlo paths per simulation")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", default=None)
    parser.add_argument("--out", default="results/heat")
    args = parser.parse_args()

    sys.exit(run_demo(args.n, args.order, args.paths, args.seed, args.config, Path(args.out)))
