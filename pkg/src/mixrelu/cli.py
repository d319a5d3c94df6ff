"""Command line interface.

Exit codes: 0 success, 2 infeasible tolerance, 3 certificate violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from .faber import get_preset
from .measure import constants_table, measure_sup_error, run, sweep
from .network import ReluNetwork
from .nonadaptive import InfeasibleTolerance
from .quantizer import CertificateViolation

EXIT_INFEASIBLE = 2
EXIT_CERTIFICATE = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixrelu", description="Explicit ReLU networks for mixed-smoothness functions.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build one network and report its measured error")
    b.add_argument("--method", choices=("nonadaptive", "adaptive"), required=True)
    b.add_argument("--preset", required=True)
    b.add_argument("--alpha", type=float, default=None)
    b.add_argument("--dim", type=int, required=True)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--out", required=True, help="network document (JSON)")
    b.add_argument("--report", default=None, help="also write the run report here")
    b.add_argument("--grid", type=int, default=None)
    b.add_argument("--n", type=int, default=None, help="adaptive only: explicit truncation level")
    b.add_argument("--m", type=int, default=None, help="adaptive only: explicit quantization level")

    e = sub.add_parser("eval", help="measure a saved network against a preset")
    e.add_argument("--net", required=True)
    e.add_argument("--preset", required=True)
    e.add_argument("--alpha", type=float, default=None)
    e.add_argument("--grid", type=int, required=True)

    s = sub.add_parser("sweep", help="build for several tolerances and write a CSV")
    s.add_argument("--method", choices=("nonadaptive", "adaptive"), required=True)
    s.add_argument("--preset", required=True)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--eps", required=True, help="comma separated tolerances")
    s.add_argument("--csv", required=True)
    s.add_argument("--grid", type=int, default=None)

    c = sub.add_parser("bounds", help="print bound values and constants")
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--dim", type=int, required=True)
    c.add_argument("--m", type=int, required=True)
    c.add_argument("--n", type=int, required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "build":
            _, report = run(args.method, args.preset, args.alpha, args.dim, args.eps, args.out, args.grid, args.n, args.m)
            text = report.to_json()
            if args.report:
                with open(args.report, "w") as fh:
                    fh.write(text + "\n")
            print(text)
        elif args.command == "eval":
            net = ReluNetwork.load(args.net)
            f = get_preset(args.preset, net.input_dim, args.alpha)
            print(json.dumps({"preset": f.name, "grid_level": args.grid, "measured_error": measure_sup_error(net, f, args.grid)}))
        elif args.command == "sweep":
            eps = [float(v) for v in args.eps.split(",") if v.strip()]
            text = sweep(args.method, args.preset, args.alpha, args.dim, eps, args.grid)
            with open(args.csv, "w", newline="") as fh:
                fh.write(text)
            print(text, end="")
        elif args.command == "bounds":
            print(json.dumps(constants_table(args.alpha, args.dim, args.m, args.n), indent=2))
    except InfeasibleTolerance as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CertificateViolation as exc:
        print(f"certificate violation: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    return 0


if __name__ == "__main__":
    sys.exit(main())
