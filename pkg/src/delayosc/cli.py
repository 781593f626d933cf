"""Command line front end.

Subcommands::

    delayosc run CONFIG [CONFIG ...]   integrate scenarios, write CSVs
    delayosc compare CONFIG            run + deviation report between methods
    delayosc stability [flags]         export boundary curves and a grid
    delayosc presets list              list bundled scenario presets

``CONFIG`` is a path to a scenario JSON file or the name of a bundled
preset.  The memory budget resolves as: ``--budget`` flag, then the
``DELAYOSC_BUDGET_BYTES`` environment variable, then the config field.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

from .config import (
    BUDGET_ENV_VAR,
    load_preset,
    preset_names,
    resolve_budget,
    resolve_config,
)
from .errors import DelayOscError
from .runner import compare_methods, export_stability_chart, run_scenario, summarize_report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delayosc",
        description="Simulate time-delayed feedback self-oscillators: "
                    "classical delay equations, the cascaded quantum master "
                    "equation, and cumulant-truncated moment dynamics.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run scenarios and write CSV output")
    run_p.add_argument("configs", nargs="+",
                       help="scenario file path or preset name")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--budget", type=int, default=None,
                       help="memory budget in bytes (also %s)" % BUDGET_ENV_VAR)
    run_p.add_argument("--plots", action="store_true",
                       help="also write SVG line charts")
    run_p.add_argument("--parallel", type=int, default=1, metavar="N",
                       help="run up to N scenarios concurrently")

    cmp_p = sub.add_parser("compare",
                           help="run a scenario and report method deviations")
    cmp_p.add_argument("config", help="scenario file path or preset name")
    cmp_p.add_argument("--out", default=None)
    cmp_p.add_argument("--budget", type=int, default=None)
    cmp_p.add_argument("--plots", action="store_true")

    st_p = sub.add_parser("stability",
                          help="export oscillation-boundary curves and a "
                               "classification grid")
    st_p.add_argument("--out", default=".")
    st_p.add_argument("--branches", type=int, default=3)
    st_p.add_argument("--samples", type=int, default=400)
    st_p.add_argument("--alpha-range", type=float, nargs=2,
                      default=(-5.0, 2.0), metavar=("LO", "HI"))
    st_p.add_argument("--beta-range", type=float, nargs=2,
                      default=(-6.0, 2.0), metavar=("LO", "HI"))
    st_p.add_argument("--grid-n", type=int, default=41)
    st_p.add_argument("--plots", action="store_true")

    pre_p = sub.add_parser("presets", help="inspect bundled presets")
    pre_p.add_argument("action", choices=["list"])
    return parser


def _run_one(spec, args):
    config = resolve_config(spec)
    budget = resolve_budget(config, args.budget)
    result = run_scenario(config, out_dir=args.out, budget_bytes=budget,
                          plots=args.plots)
    for path in result["files"]:
        print(path)
    return result


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.parallel > 1 and len(args.configs) > 1:
                with ThreadPoolExecutor(max_workers=args.parallel) as pool:
                    list(pool.map(lambda s: _run_one(s, args), args.configs))
            else:
                for spec in args.configs:
                    _run_one(spec, args)
        elif args.command == "compare":
            config = resolve_config(args.config)
            budget = resolve_budget(config, args.budget)
            report = compare_methods(config, out_dir=args.out,
                                     budget_bytes=budget)
            print(summarize_report(report))
            print(report["report_path"])
        elif args.command == "stability":
            files = export_stability_chart(
                args.out, branches=args.branches, n_samples=args.samples,
                alpha_range=tuple(args.alpha_range),
                beta_range=tuple(args.beta_range), grid_n=args.grid_n,
                plots=args.plots)
            for path in files:
                print(path)
        elif args.command == "presets":
            for name in preset_names():
                cfg = load_preset(name)
                print("%-16s methods=%s  gain=%g  tau=%g" %
                      (name, cfg.methods, cfg.gain, cfg.tau))
    except DelayOscError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
