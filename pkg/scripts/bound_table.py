import argparse
import math
import sys

import numpy as np

from tailbandits import bounds
from tailbandits.errors import TailBanditError
from tailbandits.policy import BonusSpec, phase_transition_count


def print_table(params: bounds.BoundParams, points: int, start: float, stop: float) -> None:
    """
    Print the tail bound over a linear threshold grid.

    Args:
        params (BoundParams): Bound parameters
        points (int): Number of thresholds
        start (float): First threshold
        stop (float): Last threshold
    """
    xs = np.linspace(start, stop, points)
    print(f"{'x':>14}  {'bound':>14}  {'log10 bound':>12}")
    for x, value in zip(xs, bounds.bound_curve(params, xs)):
        log10 = math.log10(value) if value > 0 else -math.inf
        print(f"{x:>14.6g}  {value:>14.6g}  {log10:>12.3f}")


def main(args: argparse.Namespace) -> int:
    """
    Main function to tabulate a closed-form tail bound.

    Args:
        args (argparse.Namespace): Parsed command-line arguments.

    Returns:
        int: Exit code (0 for success, 1 for failure).
    """
    try:
        params = bounds.BoundParams(
            scenario=args.scenario, timing=args.timing, env=args.env, horizon=args.horizon, size=args.size,
            sigma=args.sigma, alpha=args.alpha, beta=args.beta, eta1=args.eta1, eta2=args.eta2,
            gaps=tuple(args.gaps) if args.gaps else None, baseline_bound=args.baseline_bound,
            uniform_gap=args.uniform_gap,
        )
        start = args.start if args.start is not None else (
            2.0 * math.sqrt(args.size) if args.env == bounds.BoundEnv.LINEAR.value else float(args.size))
        stop = args.stop if args.stop is not None else float(args.horizon)
        print(f"[BOUNDS] {params.scenario.value} / {params.timing.value} / {params.env.value}, "
              f"T={params.horizon}, size={params.size}, sigma={params.sigma}")
        if params.env != bounds.BoundEnv.LINEAR and params.timing == bounds.Timing.FIXED:
            spec = BonusSpec.tail_fixed(args.eta1, args.eta2, args.alpha, args.beta,
                                        horizon=args.horizon, arms=args.size)
            print(f"[BOUNDS] Radius switches branch at n* = {phase_transition_count(spec):.6g} pulls")
        print_table(params, args.points, start, stop)
    except TailBanditError as e:
        print(f"[ERROR] {e}")
        return 1
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Tabulate a closed-form regret tail bound.")
    parser.add_argument("--scenario", choices=[s.value for s in bounds.Scenario], default="worst_case", help="Bound scenario.")
    parser.add_argument("--timing", choices=[t.value for t in bounds.Timing], default="fixed", help="Fixed horizon or any-time radius.")
    parser.add_argument("--env", choices=[e.value for e in bounds.BoundEnv], default="plain", help="Environment family.")
    parser.add_argument("--horizon", "-T", type=int, required=True, help="Horizon T.")
    parser.add_argument("--size", "-K", type=int, default=2, help="Arms K, or dimension d for linear bounds.")
    parser.add_argument("--sigma", type=float, default=1.0, help="Noise scale.")
    parser.add_argument("--alpha", type=float, default=0.5, help="Worst-case exponent alpha.")
    parser.add_argument("--beta", type=float, default=0.5, help="Instance exponent beta (<= alpha).")
    parser.add_argument("--eta1", type=float, default=1.0, help="Radius constant eta1.")
    parser.add_argument("--eta2", type=float, default=1.0, help="Radius constant eta2.")
    parser.add_argument("--gaps", type=float, nargs="*", help="Per-arm gaps for instance-dependent bounds.")
    parser.add_argument("--baseline-bound", type=float, default=0.0, help="Baseline range B.")
    parser.add_argument("--uniform-gap", type=float, help="Uniform gap of a linear instance.")
    parser.add_argument("--points", "-n", type=int, default=20, help="Number of thresholds.")
    parser.add_argument("--start", type=float, help="First threshold (Default: K, or 2 sqrt(d) for linear).")
    parser.add_argument("--stop", type=float, help="Last threshold (Default: T).")
    sys.exit(main(parser.parse_args()))
