"""Command-line harness for BER sweeps and MSE-convergence traces."""

from __future__ import annotations

import argparse
import sys

from .codes import builtin_code_ids
from .experiment import SweepConfig, ber_sweep, mse_trace_experiment, parse_h_mode
from .runner import Variant


def _parse_snr_list(text):
    """Accept '6', '3,4,5', or an inclusive range 'a:b:step'."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"malformed range {text!r}, expected a:b:step")
        a, b, step = (float(p) for p in parts)
        if step <= 0 or b < a:
            raise ValueError(f"malformed range {text!r}: need step > 0 and b >= a")
        count = int(round((b - a) / step)) + 1
        return tuple(a + i * step for i in range(count) if a + i * step <= b + 1e-9)
    return tuple(float(p) for p in text.split(",") if p)


def _parse_variants(text):
    return tuple(Variant.from_name(name) for name in text.split(",") if name)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scvamp",
        description=(
            "Monte Carlo experiments for the three-stage VAMP receiver on "
            "LDPC-coded (non)linear channels"
        ),
    )
    parser.add_argument("--experiment", choices=("ber", "mse-trace"), default="ber")
    parser.add_argument("--snr-db", required=True,
                        help="comma list or inclusive range a:b:step, in dB")
    parser.add_argument("--variant", default="scvamp3",
                        help="comma list of: " + ",".join(v.value for v in Variant))
    parser.add_argument("--code", required=True,
                        help="alist path or builtin:<id>; builtins: "
                             + ", ".join(builtin_code_ids()))
    parser.add_argument("--h", dest="h_mode", required=True,
                        help="channel matrix mode: iid:MxN or blockdiag:B")
    parser.add_argument("--nonlinearity", choices=("id", "tanh"), default="id")
    parser.add_argument("--outer-iters", type=int, default=20)
    parser.add_argument("--bp-iters", type=int, default=20)
    parser.add_argument("--min-errors", type=int, default=500)
    parser.add_argument("--max-seeds", type=int, default=2000)
    parser.add_argument("--error-unit", choices=("bit", "frame"), default="bit")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=50,
                        help="trial count for the mse-trace experiment")
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--deterministic", action="store_true",
                        help="suppress the timestamp comment for byte-identical reruns")
    parser.add_argument("--capacity-db", type=float, default=None,
                        help="capacity estimate echoed into the CSV metadata")
    parser.add_argument("--early-stop", action="store_true",
                        help="stop a trial once decisions are stable with zero syndrome")
    return parser


def parse_cli(argv=None) -> SweepConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        snr_list = _parse_snr_list(args.snr_db)
        variants = _parse_variants(args.variant)
        parse_h_mode(args.h_mode)
        if not snr_list:
            raise ValueError("empty SNR list")
        return SweepConfig(
            snr_db_list=snr_list,
            code=args.code,
            h_mode=args.h_mode,
            variants=variants,
            nonlinearity=args.nonlinearity,
            outer_iters=args.outer_iters,
            bp_iters=args.bp_iters,
            min_errors=args.min_errors,
            max_seeds=args.max_seeds,
            master_seed=args.seed,
            output_path=args.out,
            workers=args.workers,
            error_unit=args.error_unit,
            mse_trials=args.trials,
            experiment=args.experiment,
            deterministic=args.deterministic,
            capacity_db=args.capacity_db,
            early_stop=args.early_stop,
        )
    except ValueError as exc:
        parser.error(str(exc))


def main(argv=None) -> int:
    config = parse_cli(argv)
    try:
        if config.experiment == "ber":
            points = ber_sweep(config)
            for p in points:
                print(
                    f"snr={p.snr_db:g} dB  {p.variant.value:<18s} "
                    f"frames={p.frames:<5d} ber={p.ber:.3e} fer={p.fer:.3e}"
                )
        else:
            summary = mse_trace_experiment(config)
            for variant, (mean, _) in summary.items():
                print(f"{variant.value:<18s} final mean MSE {mean[-1]:.3e}")
        print(f"wrote {config.output_path}")
        return 0
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
