"""Command line entry point: ``shiftpore run`` and ``shiftpore study``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigurationError, GeometryError, NumericalError, ShiftPoreError, UsageError
from .cases import BUILTIN, builtin_case
from .config import load_spec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("shiftpore")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shiftpore", description="Shifted-interface Biot crack simulations.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "run one case at one mesh level"),
                      ("study", "convergence / tip-trimming study over mesh levels")):
        p = sub.add_parser(name, help=hlp)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--case", choices=sorted(BUILTIN))
        src.add_argument("--config", metavar="PATH", help="JSON case file")
        p.add_argument("--n", type=_ints, help="elements per side (comma list for study)")
        p.add_argument("--enforcement", choices=("weak", "strong", "both"))
        p.add_argument("--t-end", type=float, dest="t_end")
        p.add_argument("--trim", type=_floats, help="tip-trim fractions, e.g. 0,0.02,0.05")
        p.add_argument("--with-hessian-blocks", action="store_true", dest="with_hessian")
        p.add_argument("--out", required=True, metavar="DIR")
        p.add_argument("--snapshots", default=None, help="final | stride:K | all")
        p.add_argument("--no-figures", action="store_true")
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return ap


def _spec_from_args(args):
    spec = load_spec(args.config) if args.config else builtin_case(args.case)
    kw = {}
    if args.n:
        kw["n"] = args.n[0]
    if args.enforcement:
        kw["mode"] = args.enforcement
    if args.t_end is not None:
        kw["t_end"] = args.t_end
    if args.trim:
        kw["trim"] = tuple(args.trim)
    if args.with_hessian:
        kw["with_hessian"] = True
    if args.snapshots:
        kw["snapshots"] = args.snapshots
    return spec.with_(**kw) if kw else spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .run import run_case
    from .study import convergence_study, summary_lines

    try:
        spec = _spec_from_args(args)
        if args.command == "run":
            if args.n and len(args.n) > 1:
                raise UsageError("run takes a single --n; use study for several levels")
            res = run_case(spec, args.out, figures=not args.no_figures)
            with open(f"{res.out_dir}/summary.txt", encoding="utf-8") as fh:
                sys.stdout.write(fh.read())
            return EXIT_OK
        ns = args.n or [spec.n]
        rep = convergence_study(spec, ns, args.trim, out_dir=args.out, level_dirs=True,
                                figures=not args.no_figures, keep_results=False)
        sys.stdout.write("\n".join(summary_lines(rep)) + "\n")
        if rep.partial:
            kinds = {f["error"] for f in rep.failures}
            numerical = {"NumericalError", "AssemblyError"}
            return EXIT_NUMERICAL if kinds & numerical else EXIT_CONFIG
        return EXIT_OK
    except (ConfigurationError, UsageError, GeometryError) as exc:
        print(f"shiftpore: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"shiftpore: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ShiftPoreError) as exc:
        print(f"shiftpore: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
