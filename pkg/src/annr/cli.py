"""Command line entry point: ``annr run|compare|export|oracle-check``.

Exit codes: 0 success, 1 configuration error, 2 run failure, 3 failed oracle check.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .exceptions import ANNRError, ConfigurationError

EXIT_OK, EXIT_CONFIG, EXIT_RUN, EXIT_CHECK = 0, 1, 2, 3

CONFIG_HELP = """\
config file sections and defaults:
  [experiment] method=annr (annr|defer|nannr)  budget=100 (total evaluations)
               repetitions=1  seed=0 (run r uses seed+r)  checkpoints= (e.g. 100,200,400)
               output= (directory for CSV results)
  [target]     name=gaussian (gaussian|spiral|ellipse|ball|lens|sqnorm), other keys are
               target parameters, e.g. angle=30 for the ellipse
  [annr]       lambda=auto  epsilon=1e-6  walk_steps=25  cell_steps=32  top_k=4
               alpha0=off (clipping angle in degrees)  n_init=10  include_corners=true
               check_invariants=false
  [test_set]   mode=uniform (uniform|grid)  size=10000  seed=12345
overrides use section.key=value, e.g. --override target.angle=30
"""


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="annr", description="Active nearest neighbor regression experiments",
                                epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment config", epilog=CONFIG_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("--config", required=True)
    r.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    r.add_argument("--output", help="output directory (overrides experiment.output)")

    c = sub.add_parser("compare", help="compare configs on a shared target and test set")
    c.add_argument("--configs", nargs="+", required=True)
    c.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    c.add_argument("--sweep", metavar="SECTION.KEY=V1,V2,...",
                   help="repeat the comparison over parameter values, e.g. target.angle=0,10,20")
    c.add_argument("--output")

    e = sub.add_parser("export", help="turn a result CSV into plot data")
    e.add_argument("--input", required=True)
    e.add_argument("--kind", required=True, choices=["scatter", "curve", "hist"])
    e.add_argument("--output", help="default: <input stem>_<kind>.csv")
    e.add_argument("--bins", type=int, default=20)

    o = sub.add_parser("oracle-check", help="walk recall against brute-force Delaunay")
    o.add_argument("--dim", type=int, default=2)
    o.add_argument("--n", type=int, default=30)
    o.add_argument("--seeds", type=int, default=10)
    o.add_argument("--steps", type=int, default=2000)
    o.add_argument("--min-recall", type=float, default=None,
                   help="default 0.95 in 2-D, 0.90 otherwise")
    return p


def _cmd_run(args) -> int:
    from .harness import load_config, run_experiment

    cfg = load_config(args.config, args.override)
    result = run_experiment(cfg, output=args.output)
    failed = sum(r.status != "ok" for r in result.runs)
    print(f"{cfg.method} on {cfg.target}: MAE {result.mae_mean:.6g} +- {result.mae_std:.4g} "
          f"over {len(result.ok)} runs ({failed} failed), test set {result.test_hash}")
    return EXIT_RUN if failed else EXIT_OK


def _cmd_compare(args) -> int:
    from .harness import compare, load_config, sweep

    cfgs = [load_config(path, args.override) for path in args.configs]
    if args.sweep:
        if "=" not in args.sweep:
            raise ConfigurationError("--sweep needs SECTION.KEY=V1,V2,...")
        key, vals = args.sweep.split("=", 1)
        _, text = sweep(cfgs, key, [v.strip() for v in vals.split(",")], output=args.output)
    else:
        _, text = compare(cfgs, output=args.output)
    print(text, end="")
    return EXIT_OK


def _cmd_export(args) -> int:
    from pathlib import Path

    from .harness import export_plot_data

    out = args.output or str(Path(args.input).with_name(f"{Path(args.input).stem}_{args.kind}.csv"))
    try:
        path = export_plot_data(args.input, args.kind, out, bins=args.bins)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    print(path)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    from .oracle import oracle_check

    res = oracle_check(args.dim, args.n, args.seeds, args.steps)
    need = args.min_recall if args.min_recall is not None else (0.95 if args.dim == 2 else 0.90)
    ok = res["soundness"] == 1.0 and res["recall"] >= need
    print(f"dim={args.dim} n={args.n} seeds={args.seeds} steps={args.steps}: "
          f"soundness {res['soundness']:.4f}, mean recall {res['recall']:.4f} "
          f"(need 1.0 / {need}) -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "export": _cmd_export, "oracle-check": _cmd_oracle}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ANNRError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
