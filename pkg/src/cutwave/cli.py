"""Command-line front end.

Four subcommands drive the scenario runners; every run is configured by a
TOML file plus --set overrides, so no physical parameter is baked into the
code paths.  Exit codes separate the failure classes a batch caller cares
about: 2 structural-assumption violation, 3 identity-verification failure,
4 non-finite coefficients, 1 anything else.
"""

import argparse
import sys

from . import runner
from .config import RunConfig, apply_overrides, load_config
from .errors import AssumptionViolated, NanEncountered, VerificationFailure
from .verify import require_all

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ASSUMPTION = 2
EXIT_VERIFY = 3
EXIT_NAN = 4


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cutwave",
        description="cut-cell DG solver for the first-order acoustic wave "
                    "equation, stabilized on small cells")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = (
        ("convergence", "refinement study on the rotated square "
                        "(scenario=custom gives the uncut baseline)"),
        ("channel", "long-time wave run in the periodic 45-degree channel"),
        ("verify-forms", "randomized checks of the exact algebraic "
                         "identities behind the stabilization"),
        ("mesh-dump", "write cut-mesh geometry and small-cell diagnostics"),
    )
    for name, text in commands:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="FILE",
                       help="TOML file with run settings")
        p.add_argument("--set", dest="overrides", action="append",
                       default=[], metavar="KEY=VALUE",
                       help="override one config field (repeatable)")
        p.add_argument("--seed", type=int, help="RNG seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int,
                       help="worker processes for resolution sweeps")
    return parser


def resolve_config(args):
    config = load_config(args.config) if args.config else RunConfig()
    if args.overrides:
        config = apply_overrides(config, args.overrides)
    updates = {}
    if args.command == "channel":
        updates["scenario"] = "channel"
    elif args.command == "convergence" and config.scenario != "custom":
        # "custom" is honored so the uncut baseline can run through the
        # same sweep driver; everything else means the rotated square
        updates["scenario"] = "convergence"
    elif args.command == "verify-forms":
        updates["scenario"] = "verify-forms"
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.threads is not None:
        updates["threads"] = args.threads
    if updates:
        config = config.replace(**updates)
    config.validate()
    return config


def _run_convergence(config):
    results, rates = runner.run_convergence(config)
    for res in results:
        rep = res["report"]
        print("n=%-4d steps=%-6d scheme=%-8s L2(p)=%.6e Linf(p)=%.6e"
              % (res["n"], res["steps"], res["scheme"], rep.l2[0],
                 rep.linf[0]))
    for comp in sorted(rates):
        print("L2 rate %-3s: %s"
              % (comp, "  ".join("%.3f" % v for v in rates[comp])))


def _run_channel(config):
    res = runner.run_channel(config)
    print("n=%d steps=%d dt=%.3e min_alpha=%.3e"
          % (res["n"], res["steps"], res["dt"], res["min_alpha"]))
    print("relative energy drift %.6e over t in [0, %g]"
          % (res["drift"], res["times"][-1]))


def _run_verify(config):
    results, text = runner.run_verify(config)
    print(text)
    require_all(results)


def _run_mesh_dump(config):
    mesh, small = runner.run_mesh_dump(config)
    print("%d cells, %d small (alpha < %g), min alpha %.6e"
          % (len(mesh.cells), len(small), small.alpha, mesh.min_alpha()))


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {
        "convergence": _run_convergence,
        "channel": _run_channel,
        "verify-forms": _run_verify,
        "mesh-dump": _run_mesh_dump,
    }
    try:
        config = resolve_config(args)
        handlers[args.command](config)
    except AssumptionViolated as exc:
        print("assumption violated: %s" % exc, file=sys.stderr)
        return EXIT_ASSUMPTION
    except VerificationFailure as exc:
        print("verification failed: %s" % exc, file=sys.stderr)
        return EXIT_VERIFY
    except NanEncountered as exc:
        print("aborted: %s" % exc, file=sys.stderr)
        return EXIT_NAN
    except (OSError, ValueError, KeyError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
