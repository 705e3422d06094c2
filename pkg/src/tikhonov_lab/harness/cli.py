"""Command line entry point ``tikhonov-lab``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import sys

from .._validation import NumericalFailure
from .config import ConfigError, load_config
from .presets import get_preset, presets
from .runner import OUTPUT_ROOT_ENV, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parser():
    parser = argparse.ArgumentParser(
        prog="tikhonov-lab",
        description="Run Tikhonov regularization experiments.",
        epilog=f"Outputs go to --out, the config's output_dir, or ${OUTPUT_ROOT_ENV}/<name>.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment from an INI file")
    p_run.add_argument("config", help="path to the configuration file")
    p_run.add_argument("--out", help="output directory")
    p_pre = sub.add_parser("preset", help="run a named preset")
    p_pre.add_argument("name")
    p_pre.add_argument("--out", help="output directory")
    p_pre.add_argument("--seed", type=int, help="override the experiment seed")
    sub.add_parser("list-presets", help="print the names of all presets")
    return parser


def _report(record, stream):
    s = record.summary
    status = "pass" if record.passed else "FAIL"
    keys = [k for k in ("slope", "r_squared", "target_slope", "objective",
                        "bregman_error", "K_alpha_bar", "max_phi_identity_residual",
                        "c1", "c2", "K") if k in s]
    detail = ", ".join(f"{k}={s[k]:.6g}" if isinstance(s[k], float) else f"{k}={s[k]}"
                       for k in keys)
    print(f"[{status}] {record.output_dir} {detail}", file=stream)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            for cfg in presets():
                print(f"{cfg.name}\t{cfg.task}")
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
        else:
            cfg = get_preset(args.name, seed=args.seed)
        record = run(cfg, out=args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _report(record, sys.stdout)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
