"""Command-line entry point: ``intrinsic-bf {compare,threshold,simulate,anova}``.

Results go to stdout (or a file) as JSON or CSV; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .commands import OUTPUT_DIR_ENV, execute
from .errors import IntrinsicBFError
from .simulation import DEFAULT_SEED

log = logging.getLogger("intrinsic_bf")


def _add_output_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument(
        "--output",
        help=f"output file; relative paths resolve under ${OUTPUT_DIR_ENV} when it is set",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intrinsic-bf",
        description="Intrinsic-prior Bayes factors and BIC for nested linear models "
        "with growing dimension.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="compare a nested pair on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--nested-cols", type=int, required=True,
                   help="the nested model uses the first K non-response columns")
    p.add_argument("--regime", help="a,b[,r[,s]] growth regime for a consistency verdict")
    p.add_argument("--delta", type=float,
                   help="limiting distance for the verdict (default: moment estimate)")
    p.add_argument("--linear", action="store_true",
                   help="also report linear-scale values of log fields")
    _add_output_opts(p)

    p = sub.add_parser("threshold", help="tabulate consistency thresholds")
    p.add_argument("--r", help="grid of r = lim n/p values")
    p.add_argument("--s", help="grid of s = lim n/i values (pairs with s > r)")
    p.add_argument("--t", help="grid of training sample sizes for R(t, m)")
    p.add_argument("--berger-replicates", type=int, default=1, metavar="M")
    _add_output_opts(p)

    p = sub.add_parser("simulate", help="Monte Carlo growth-path experiment")
    p.add_argument("--r", type=float, help="lim n/p (required when b = 1)")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--s", type=float)
    p.add_argument("--n-grid", required=True,
                   help="'200:3200:double', 'start:stop:step' or a comma list")
    p.add_argument("--replicates", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--null", action="store_true", help="sample from the nested model")
    p.add_argument("--workers", type=int, default=1)
    _add_output_opts(p)

    p = sub.add_parser("anova", help="factorial ANOVA from a factor-coded CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--factors", required=True, help="comma-separated factor columns")
    p.add_argument("--response", default="y")
    p.add_argument("--no-three-way", dest="three_way", action="store_false")
    p.add_argument("--nested-order", type=int, default=0,
                   help="highest interaction order kept in the nested model (0: intercept)")
    p.add_argument("--regime")
    p.add_argument("--delta", type=float)
    p.add_argument("--linear", action="store_true")
    _add_output_opts(p)
    return parser


def _command_args(ns: argparse.Namespace) -> dict:
    skip = {"command", "verbose", "format", "output"}
    args = {k: v for k, v in vars(ns).items() if k not in skip}
    if ns.command in ("compare", "anova") and not args.get("linear"):
        args.pop("linear", None)
    if ns.command == "simulate":
        if not args.get("null"):
            args.pop("null", None)
    return args


def _destination(ns: argparse.Namespace) -> Path | None:
    out_dir = os.environ.get(OUTPUT_DIR_ENV)
    if ns.output:
        path = Path(ns.output)
        return Path(out_dir) / path if out_dir and not path.is_absolute() else path
    if out_dir:
        return Path(out_dir) / f"{ns.command}.{ns.format}"
    return None


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if ns.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        result = execute(ns.command, _command_args(ns))
    except (IntrinsicBFError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for w in result.warnings:
        log.warning(w)
    text = result.to_json() + "\n" if ns.format == "json" else result.to_csv()
    dest = _destination(ns)
    if dest is None:
        sys.stdout.write(text)
    else:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(text)
        log.info("wrote %s", dest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
