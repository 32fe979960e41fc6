"""Command line entry point ``porous-euler``."""
import argparse
from dataclasses import replace
import logging
import os
import sys

from .conformal import ConformalFitError
from .harness import (DEFAULT_SPREAD, SWEEPS, ConfigError, configure_threads, contrast_summary,
                      flow_summary, flux_contrast, load_config, run_flow, run_sweep, sweep_summary,
                      write_csv)
from .solver import NumericalFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3

log = logging.getLogger("porous_euler")


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("thread count must be positive")
    return v


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is reserved for numerical failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="porous-euler",
                                description="Scaling sweeps and vortex-flow experiments for Euler flow "
                                "through rows of small inclusions.")
    common = _Parser(add_help=False)
    common.add_argument("--out", default=None, help="output directory (default: config 'output' or .)")
    common.add_argument("--seed", type=_u64, default=None, help="RNG seed, overrides the config")
    common.add_argument("--threads", type=_positive, default=None, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sweep", parents=[common], help="run a discrepancy, cutoff or gap-area sweep")
    s.add_argument("config")
    f = sub.add_parser("flow", parents=[common], help="run a vortex flow or the flux contrast")
    f.add_argument("config")
    sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    return p


def _write_summary(out, lines):
    with open(os.path.join(out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_sweep(args, cfg, out):
    if cfg.experiment == "verify_all":
        return cmd_verify(args, out, cfg.seed)
    if cfg.experiment not in SWEEPS:
        raise ConfigError(f"'{cfg.experiment}' is a flow experiment; use 'porous-euler flow'")
    name = f"{cfg.experiment}.csv"
    table = run_sweep(cfg, os.path.join(out, name), threads=args.threads or 1)
    lines = sweep_summary(cfg, table, DEFAULT_SPREAD[cfg.experiment]) + [f"seed = {cfg.seed}", f"csv = {name}"]
    _write_summary(out, lines)
    print("\n".join(lines))
    return EXIT_OK


def cmd_flow(args, cfg, out):
    if cfg.experiment == "flux_contrast":
        res = flux_contrast(cfg, threads=args.threads or 1)
        write_csv(res.table, os.path.join(out, "flux_contrast.csv"))
        lines = contrast_summary(cfg, res)
    elif cfg.experiment == "flow_run":
        res = run_flow(cfg)
        write_csv(res.table, os.path.join(out, "flow_run.csv"))
        lines = flow_summary(cfg, res)
    else:
        raise ConfigError(f"'{cfg.experiment}' is not a flow experiment; use 'porous-euler sweep'")
    lines.append(f"seed = {cfg.seed}")
    _write_summary(out, lines)
    print("\n".join(lines))
    return EXIT_OK


def cmd_verify(args, out, seed):
    from .verify import run_verify

    results = run_verify(out, seed, log=print)
    n_pass = sum(r.passed for r in results)
    lines = [r.line() for r in results] + [f"seed = {seed}", f"{n_pass}/{len(results)} criteria passed"]
    _write_summary(out, lines)
    print(lines[-1])
    return EXIT_OK if n_pass == len(results) else EXIT_ACCEPTANCE


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    configure_threads(args.threads)
    try:
        if args.command == "verify":
            out = args.out or "."
            os.makedirs(out, exist_ok=True)
            return cmd_verify(args, out, args.seed or 0)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        out = args.out or cfg.output or "."
        os.makedirs(out, exist_ok=True)
        if args.command == "sweep":
            return cmd_sweep(args, cfg, out)
        return cmd_flow(args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, ConformalFitError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
