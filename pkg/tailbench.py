#!/usr/bin/env python3
"""
tailbench.py - Regret tail lab for bandit policies
Runs experiment plans (simulate / tail / sweep / bounds / oracle), offline fits, and an interactive menu
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Import our package modules
from tailbandits import bounds, experiment
from tailbandits.errors import TailBanditError
from tailbandits.stats import FitMode


DEFAULT_PLAN = Path("defaults/domination.yaml")


def show_help():
    """Display help information"""
    print("\n" + "="*60)
    print("tailbench - Regret Tail Lab - Help")
    print("="*60)
    print("\nAvailable Commands:")
    print("  1. simulate - Run episode batches (episodes.jsonl, summary.csv)")
    print("  2. tail     - Tail curves with Wilson intervals and matched bounds")
    print("  3. sweep    - Worst-case gap sweep with [sup] curves")
    print("  4. bounds   - Closed-form bound curves only")
    print("  5. oracle   - Exact enumeration vs Monte Carlo on tiny instances")
    print("  6. fit      - Exponent fits from an earlier summary.csv / tail.csv")
    print("  7. noise    - Noise concentration bound exp(-x^2/(2 sigma^2 T))")
    print("  h. help     - Show this help message")
    print("  q. quit     - Exit the program")
    print("\nExamples:")
    print("  tailbench tail --config defaults/domination.yaml --out out/domination --threads 0")
    print("  tailbench fit --csv out/scaling/summary.csv --mode regret_scaling")
    print("="*60)


def print_menu():
    """Print the main menu"""
    print("\n" + "="*60)
    print("Regret Tail Lab")
    print("="*60)
    print("\n[1] Simulate episodes")
    print("[2] Tail curves + bounds")
    print("[3] Worst-case sweep")
    print("[4] Bound curves")
    print("[5] Oracle check")
    print("[6] Fit exponents from CSV")
    print("[7] Noise concentration bound")
    print("[h] Help")
    print("[q] Quit")
    print("-"*60)


def run_stage(stage: experiment.Stage, config: str, out: Optional[str] = None, seed: Optional[int] = None,
              threads: int = 1, progress: bool = False) -> experiment.RunArtifact:
    plan = experiment.with_overrides(experiment.load_plan(config), seed=seed)
    print(f"[{stage.value.upper()}] Running plan '{plan.name}' ({len(plan.cells)} cells, "
          f"{plan.replications} replications)")
    artifact = experiment.run_plan(plan, stage=stage, out_dir=out, threads=threads, progress=progress)
    for name, digest in sorted(artifact.files.items()):
        print(f"[{stage.value.upper()}] {name}  sha256={digest[:16]}")
    return artifact


def run_fit(csv_path: str, mode: str, rank: int = 0) -> None:
    for row in experiment.fit_from_csv(csv_path, FitMode(mode), rank=rank):
        if row.get("note"):
            print(f"[FIT] {row['policy']}: {row['note']}")
        else:
            print(f"[FIT] {row['policy']}: slope={row['slope']:.4f} r2={row['r_squared']:.3f} "
                  f"({row['points']} points, {row['discarded']} discarded)")


def interactive():
    """Main interactive loop"""
    print("\n" + "="*60)
    print("Welcome to tailbench - Regret Tail Lab")
    print("SE / SEwRP / UCB / UCB-L tails vs closed-form bounds")
    print("="*60)
    print("\nType 'h' for help or 'q' to quit")

    stages = {
        '1': experiment.Stage.SIMULATE, 'simulate': experiment.Stage.SIMULATE,
        '2': experiment.Stage.TAIL, 'tail': experiment.Stage.TAIL,
        '3': experiment.Stage.SWEEP, 'sweep': experiment.Stage.SWEEP,
        '4': experiment.Stage.BOUNDS, 'bounds': experiment.Stage.BOUNDS,
        '5': experiment.Stage.ORACLE, 'oracle': experiment.Stage.ORACLE,
    }

    while True:
        print_menu()
        choice = input("\nEnter your choice: ").strip().lower()

        try:
            if choice in stages:
                stage = stages[choice]
                config = input(f"[{stage.value.upper()}] Enter plan path (Default '{DEFAULT_PLAN}'): ").strip()
                run_stage(stage, config or str(DEFAULT_PLAN))

            elif choice == '6' or choice == 'fit':
                csv_path = input("[FIT] Enter CSV path: ").strip()
                if not csv_path:
                    print("[ERROR] CSV path cannot be empty")
                    continue
                mode = input("[FIT] Mode (regret_scaling / poly_tail / stretch_tail, Default regret_scaling): ").strip()
                run_fit(csv_path, mode or FitMode.REGRET_SCALING.value)

            elif choice == '7' or choice == 'noise':
                x = float(input("[NOISE] Threshold x: ").strip())
                sigma = float(input("[NOISE] sigma: ").strip())
                T = int(input("[NOISE] T: ").strip())
                print(f"[NOISE] P(N > {x:g}) <= {bounds.noise_tail_bound(x, sigma, T):.6g}")

            elif choice == 'h' or choice == 'help':
                show_help()

            elif choice == 'q' or choice == 'quit':
                print("\nBye :)\n")
                sys.exit(0)

            else:
                print(f"\n[ERROR] Invalid choice: '{choice}'")
                print("Type 'h' for help")

        except (TailBanditError, OSError, ValueError) as e:
            print(f"[ERROR] {e}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailbench", description="Regret tail lab for bandit policies")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command")

    for stage in experiment.Stage:
        p = sub.add_parser(stage.value, help=f"Run the {stage.value} stage of a plan")
        p.add_argument("--config", "-c", required=True, help="YAML experiment plan")
        p.add_argument("--out", "-o", default=None, help="Output directory (overrides outputs.dir)")
        p.add_argument("--threads", "-t", type=int, default=1, help="Worker processes, 0 = all CPUs")
        p.add_argument("--seed", "-s", type=int, default=None, help="Override the plan seed")
        p.add_argument("--progress", action="store_true", help="Show progress bars")

    p = sub.add_parser("fit", help="Exponent fits from an earlier summary.csv or tail.csv")
    p.add_argument("--csv", required=True, help="summary.csv (regret_scaling) or tail.csv (tail modes)")
    p.add_argument("--mode", default=FitMode.REGRET_SCALING.value, choices=[m.value for m in FitMode])
    p.add_argument("--rank", type=int, default=0, help="Threshold rank within each tail curve")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command is None:
        interactive()
        return 0

    try:
        if args.command == "fit":
            run_fit(args.csv, args.mode, args.rank)
        else:
            run_stage(experiment.Stage(args.command), args.config, out=args.out, seed=args.seed,
                      threads=args.threads, progress=args.progress)
    except (TailBanditError, OSError) as e:
        print(f"[ERROR] {e}")
        return 1
    return 0


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nInterrupted by user. Goodbye!\n")
        sys.exit(0)
